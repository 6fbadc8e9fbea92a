// Robust-MDP baselines over weighted-norm ambiguity balls: BCR and weighted
// BCR l1/linf sets fitted from posterior ensembles, Hoeffding sets from
// visit counts, and the soft-robust (mean-model) solver.
#pragma once

#include "varmdp/posterior.hpp"
#include "varmdp/types.hpp"
#include "varmdp/var_solver.hpp"

namespace varmdp {

enum class Norm { l1, linf };

/// Per-(s,a) weighted-norm ball: center, positive weights, radius.
struct AmbiguitySetSpec {
    int num_states = 0;
    int num_actions = 0;
    Norm norm = Norm::l1;
    Vec centers; // flattened [s][a][s'], rows on the simplex
    Vec weights; // flattened [s][a][s'], strictly positive
    Vec radii;   // flattened [s][a], >= 0

    std::span<const Real> center_row(int s, int a) const {
        return {centers.data() + (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    std::span<const Real> weight_row(int s, int a) const {
        return {weights.data() + (static_cast<size_t>(s) * num_actions + a) * num_states,
                static_cast<size_t>(num_states)};
    }
    Real radius(int s, int a) const {
        return radii[static_cast<size_t>(s) * num_actions + a];
    }

    void validate() const;

    /// Uniform-weight spec with zero radii around the given centers.
    static AmbiguitySetSpec around(const PosteriorMoments& moments, Norm norm);
};

using RobustSolution = VarSolution;

/// ||p - pbar||_{q,b}: sum_i b_i |p_i - pbar_i| for l1, max_i for linf.
Real weighted_norm_distance(std::span<const Real> p, std::span<const Real> p_bar,
                            std::span<const Real> b, Norm q);

/// Radius per (s,a): the ceil((1-alpha) M)-th smallest ensemble distance from
/// the center, so the closed ball holds at least a 1-alpha fraction of the
/// ensemble.
Vec fit_bcr_radius(const ModelEnsemble& ensemble, const Vec& centers, const Vec& weights,
                   Norm q, Real alpha);

/// Exact minimizer of p^T w over the weighted-l1 ball around p_bar
/// intersected with the simplex. Weighted instances go through a small LP;
/// uniform weights use the classical transfer argument directly.
std::pair<Vec, Real> worst_case_l1(const Vec& p_bar, const Vec& w, Real psi, const Vec& b);

/// Exact minimizer over the weighted-linf ball: per-coordinate box bounds,
/// then pour the residual mass in ascending-w order.
std::pair<Vec, Real> worst_case_linf(const Vec& p_bar, const Vec& w, Real psi, const Vec& b);

/// SA-rectangular robust value iteration with the same stopping rule as the
/// VaR solver.
RobustSolution robust_value_iteration(const TabularMdp& mdp, const AmbiguitySetSpec& spec,
                                      Real eps);

/// Value-spread weights for span-optimized (weighted) sets:
/// b_i = |w_i - p_bar^T w| + kappa per (s,a), normalized to mean 1.
/// Intended to be recomputed from the current value function each outer
/// iteration of weighted-BCR value iteration.
Vec optimize_weights(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                     const ValueFunction& v, Norm q);

enum class HoeffdingWeights { naive, optimized };

/// l1-concentration radii: psi_{s,a} = sqrt((2/n_{s,a}) ln(S A 2^S / delta)),
/// with the delta budget split across all SA rows inside the log. Unvisited
/// rows fall back to the l1 diameter 2. The optimized variant keeps the same
/// radii; its guarantee is preserved as long as the caller scales the weight
/// vectors to max <= 1 (the weighted ball then contains the unweighted one).
Vec hoeffding_radius(const std::vector<long>& visit_counts, int S, int A, Real delta,
                     HoeffdingWeights mode);

/// Classical value iteration on the posterior mean model.
RobustSolution soft_robust_solve(const TabularMdp& mdp, const PosteriorMoments& moments,
                                 Real eps);

/// Interleaved weighted-BCR solve: refits weights from the current value
/// function and radii at confidence alpha each outer round (at most
/// max_outer rounds, default 10), stopping when the value stabilizes.
RobustSolution wbcr_solve(const TabularMdp& mdp, const ModelEnsemble& ensemble, Norm q,
                          Real alpha, Real eps, int max_outer = 10);

} // namespace varmdp
