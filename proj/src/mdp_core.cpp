#include "varmdp/mdp_core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace varmdp {

namespace detail {

void check_distribution(std::span<const Real> v, Real tol, const std::string& what) {
    Real sum = 0.0;
    for (Real x : v) {
        if (!std::isfinite(x)) { throw InvalidInput(what + ": non-finite entry"); }
        if (x < -tol) { throw InvalidInput(what + ": negative entry"); }
        sum += x;
    }
    if (std::abs(sum - 1.0) > tol) {
        throw InvalidInput(what + ": entries sum to " + std::to_string(sum) + ", expected 1");
    }
}

} // namespace detail

TabularMdp::TabularMdp(int S, int A, Vec rewards_sas, Real gamma, Vec p0) :
    num_states(S), num_actions(A), rewards(std::move(rewards_sas)), discount(gamma),
    initial_dist(std::move(p0)) {
    validate();
}

void TabularMdp::validate() const {
    if (num_states <= 0 || num_actions <= 0) {
        throw InvalidInput("TabularMdp: num_states and num_actions must be positive");
    }
    if (!(discount >= 0.0 && discount < 1.0)) {
        throw InvalidInput("TabularMdp: discount must lie in [0, 1)");
    }
    const size_t expected = static_cast<size_t>(num_states) * num_actions * num_states;
    if (rewards.size() != expected) { throw InvalidInput("TabularMdp: rewards tensor has wrong size"); }
    for (Real r : rewards) {
        if (!std::isfinite(r)) { throw InvalidInput("TabularMdp: non-finite reward"); }
    }
    if (initial_dist.size() != static_cast<size_t>(num_states)) {
        throw InvalidInput("TabularMdp: initial_dist has wrong length");
    }
    detail::check_distribution(initial_dist, 1e-9, "TabularMdp initial_dist");
}

Real TabularMdp::reward_scale() const {
    Real r_max = 0.0;
    for (Real r : rewards) { r_max = std::max(r_max, std::abs(r)); }
    return r_max;
}

TransitionModel::TransitionModel(int S, int A, Vec probs_sas) :
    num_states(S), num_actions(A), probs(std::move(probs_sas)) {
    validate();
}

void TransitionModel::validate() const {
    if (num_states <= 0 || num_actions <= 0) {
        throw InvalidInput("TransitionModel: dimensions must be positive");
    }
    const size_t expected = static_cast<size_t>(num_states) * num_actions * num_states;
    if (probs.size() != expected) { throw InvalidInput("TransitionModel: tensor has wrong size"); }
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            detail::check_distribution(row(s, a), 1e-9, "TransitionModel row");
        }
    }
}

Vec one_step_returns(const TabularMdp& mdp, const ValueFunction& v, int s, int a) {
    const auto r = mdp.reward_row(s, a);
    Vec w(mdp.num_states);
    for (int i = 0; i < mdp.num_states; ++i) { w[i] = r[i] + mdp.discount * v[i]; }
    return w;
}

static void check_policy(const TabularMdp& mdp, const DeterministicPolicy& policy) {
    if (policy.size() != static_cast<size_t>(mdp.num_states)) {
        throw InvalidInput("policy length does not match num_states");
    }
    for (int a : policy) {
        if (a < 0 || a >= mdp.num_actions) { throw InvalidInput("policy contains invalid action"); }
    }
}

ValueFunction bellman_eval_update(const TabularMdp& mdp, const TransitionModel& model,
                                  const DeterministicPolicy& policy, const ValueFunction& v) {
    check_policy(mdp, policy);
    ValueFunction out(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        const int a = policy[s];
        const auto p = model.row(s, a);
        const auto r = mdp.reward_row(s, a);
        Real acc = 0.0;
        for (int i = 0; i < mdp.num_states; ++i) { acc += p[i] * (r[i] + mdp.discount * v[i]); }
        out[s] = acc;
    }
    return out;
}

ValueFunction policy_value(const TabularMdp& mdp, const TransitionModel& model,
                           const DeterministicPolicy& policy, Real tol) {
    check_policy(mdp, policy);
    if (!(tol > 0.0)) { throw InvalidInput("policy_value: tol must be > 0"); }
    const int S = mdp.num_states;

    if (S <= 2000) {
        // Direct solve of (I - gamma P_pi) v = r_pi.
        Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S);
        Eigen::VectorXd rhs(S);
        for (int s = 0; s < S; ++s) {
            const int a = policy[s];
            const auto p = model.row(s, a);
            const auto r = mdp.reward_row(s, a);
            Real reward = 0.0;
            for (int i = 0; i < S; ++i) {
                system(s, i) -= mdp.discount * p[i];
                reward += p[i] * r[i];
            }
            rhs(s) = reward;
        }
        Eigen::VectorXd v = system.partialPivLu().solve(rhs);
        return ValueFunction(v.data(), v.data() + S);
    }

    // Iterative evaluation: contraction factor gamma per sweep.
    ValueFunction v(S, 0.0);
    for (;;) {
        ValueFunction next = bellman_eval_update(mdp, model, policy, v);
        const Real diff = sup_norm_diff(next, v);
        v = std::move(next);
        if (mdp.discount == 0.0 || diff * mdp.discount / (1.0 - mdp.discount) <= tol) { return v; }
    }
}

Real expected_return(const TabularMdp& mdp, const TransitionModel& model,
                     const DeterministicPolicy& policy) {
    const ValueFunction v = policy_value(mdp, model, policy, 1e-10);
    Real out = 0.0;
    for (int s = 0; s < mdp.num_states; ++s) { out += mdp.initial_dist[s] * v[s]; }
    return out;
}

Real sup_norm_diff(const Vec& a, const Vec& b) {
    Real out = 0.0;
    for (size_t i = 0; i < a.size(); ++i) { out = std::max(out, std::abs(a[i] - b[i])); }
    return out;
}

ClassicalSolution value_iteration(const TabularMdp& mdp, const TransitionModel& model,
                                  Real eps) {
    if (!(eps > 0.0)) { throw InvalidInput("value_iteration: eps must be > 0"); }
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const Real gamma = mdp.discount;

    ClassicalSolution sol;
    sol.value.assign(S, 0.0);
    sol.policy.assign(S, 0);

    const Real r_max = mdp.reward_scale();
    long cap = 1;
    if (gamma > 0.0 && r_max > 0.0) {
        const Real arg = r_max / (eps * (1.0 - gamma));
        cap = 10 * std::max<long>(1, static_cast<long>(std::ceil(std::log(arg) / std::log(1.0 / gamma))));
    }
    const Real threshold = gamma > 0.0 ? eps * (1.0 - gamma) / gamma
                                       : std::numeric_limits<Real>::infinity();

    for (long k = 0; k < cap; ++k) {
        ValueFunction next(S);
        for (int s = 0; s < S; ++s) {
            Real best = -std::numeric_limits<Real>::infinity();
            int best_a = 0;
            for (int a = 0; a < A; ++a) {
                const auto p = model.row(s, a);
                const auto r = mdp.reward_row(s, a);
                Real acc = 0.0;
                for (int i = 0; i < S; ++i) { acc += p[i] * (r[i] + gamma * sol.value[i]); }
                if (acc > best) {
                    best = acc;
                    best_a = a;
                }
            }
            next[s] = best;
            sol.policy[s] = best_a;
        }
        const Real diff = sup_norm_diff(next, sol.value);
        sol.value = std::move(next);
        sol.iterations = static_cast<int>(k) + 1;
        if (gamma == 0.0 || diff <= threshold) {
            sol.converged = true;
            return sol;
        }
    }
    return sol;
}

} // namespace varmdp
