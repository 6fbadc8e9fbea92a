// Value-at-Risk Bellman operators and VaR value iteration.
//
// The empirical operator takes the per-state max over actions of the
// alpha-quantile of one-step returns across an ensemble of posterior models;
// the Gaussian operator evaluates the same quantile in closed form from
// posterior moments. Fixed points of either operator lower-bound the
// percentile criterion when alpha is set to delta/S.
#pragma once

#include "varmdp/posterior.hpp"
#include "varmdp/types.hpp"

namespace varmdp {

enum class VarMode { empirical, gaussian, subgaussian_bound };

struct VarConfig {
    Real alpha = 0.05;     // confidence level in (0, 1/2)
    Real epsilon = 1e-6;   // value approximation error, > 0
    VarMode mode = VarMode::empirical;
    int max_iterations = 0; // 0 = 10x the theoretical iteration bound

    void validate() const;
};

struct VarSolution {
    DeterministicPolicy policy;
    ValueFunction value;
    int iterations = 0;
    bool converged = false;
};

/// Empirical VaR at level alpha: the k-th smallest sample, k = floor(alpha M) + 1.
/// This is the sup form of VaR applied to the empirical distribution, computed
/// by selection (expected O(M)), never a full sort. Throws on an empty list or
/// NaN input.
Real empirical_var(const Vec& values, Real alpha);

/// In-place variant used by the solver hot loop (reorders `values`).
Real empirical_var_inplace(Vec& values, Real alpha);

/// One sweep of the empirical VaR Bellman optimality operator. Returns the
/// updated value and the per-state argmax policy (ties -> lowest action).
std::pair<ValueFunction, DeterministicPolicy>
var_bellman_update_empirical(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                             const ValueFunction& v, Real alpha);

/// One sweep of the Gaussian-case operator:
/// max_a p_bar^T w - Phi^{-1}(1-alpha) sqrt(w^T Sigma w).
std::pair<ValueFunction, DeterministicPolicy>
var_bellman_update_gaussian(const TabularMdp& mdp, const PosteriorMoments& moments,
                            const ValueFunction& v, Real alpha);

/// Sub-Gaussian lower bound on the VaR update for one (s,a):
/// p_bar^T w - sqrt(2 ln(1/alpha)) sqrt(w^T Sigma w).
Real subgaussian_lower_bound(const PosteriorMoments& moments, const Vec& w, int s, int a,
                             Real alpha);

/// Confidence split for the lower-bound guarantee: alpha = delta / S.
Real alpha_for_optimality(Real delta, int S);

/// Generalized VaR value iteration from u_0 = 0 (or a caller-supplied start),
/// stopping when ||u_k - u_{k-1}||_inf <= eps (1-gamma)/gamma. gamma = 0 is
/// handled by a single exact update. Hitting the iteration cap returns
/// converged = false, never an exception.
VarSolution var_value_iteration(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                                const VarConfig& cfg, const ValueFunction* initial = nullptr);

/// Moments-based variant; cfg.mode selects the Gaussian exact form or the
/// sub-Gaussian bound.
VarSolution var_value_iteration(const TabularMdp& mdp, const PosteriorMoments& moments,
                                const VarConfig& cfg, const ValueFunction* initial = nullptr);

/// Fixed point of the policy-restricted empirical VaR operator within eps.
ValueFunction var_policy_evaluation(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                                    const DeterministicPolicy& policy, Real alpha, Real eps);

} // namespace varmdp
