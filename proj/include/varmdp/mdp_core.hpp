// Exact policy evaluation and classical Bellman machinery.
//
// All operations are pure and re-entrant; callers may evaluate many
// (policy, model) pairs in parallel with read-only sharing.
#pragma once

#include "varmdp/types.hpp"

namespace varmdp {

/// One-step returns w_{s,a} with w[s'] = R(s,a,s') + gamma * v[s'].
Vec one_step_returns(const TabularMdp& mdp, const ValueFunction& v, int s, int a);

/// One sweep of the Bellman evaluation operator for a deterministic policy:
/// v'[s] = p_{s,pi(s)}^T (r_{s,pi(s)} + gamma v).
ValueFunction bellman_eval_update(const TabularMdp& mdp, const TransitionModel& model,
                                  const DeterministicPolicy& policy, const ValueFunction& v);

/// Fixed point of the evaluation operator within tol (sup norm).
/// Uses a direct linear solve of (I - gamma P_pi) v = r_pi for S <= 2000 and
/// iterative evaluation above that.
ValueFunction policy_value(const TabularMdp& mdp, const TransitionModel& model,
                           const DeterministicPolicy& policy, Real tol);

/// p0^T v^pi, the expected discounted return from the initial distribution.
Real expected_return(const TabularMdp& mdp, const TransitionModel& model,
                     const DeterministicPolicy& policy);

struct ClassicalSolution {
    DeterministicPolicy policy;
    ValueFunction value;
    int iterations = 0;
    bool converged = false;
};

/// Classical (non-robust) value iteration on a single model; stops when
/// ||v_k - v_{k-1}||_inf <= eps (1-gamma)/gamma, matching the robust solvers.
ClassicalSolution value_iteration(const TabularMdp& mdp, const TransitionModel& model,
                                  Real eps);

/// sup-norm distance, used by every stopping rule.
Real sup_norm_diff(const Vec& a, const Vec& b);

} // namespace varmdp
