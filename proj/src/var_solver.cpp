#include "varmdp/var_solver.hpp"

#include "varmdp/analysis.hpp"
#include "varmdp/mdp_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace varmdp {

void VarConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 0.5)) {
        throw InvalidInput("VarConfig: alpha must lie in (0, 1/2)");
    }
    if (!(epsilon > 0.0)) { throw InvalidInput("VarConfig: epsilon must be > 0"); }
    if (max_iterations < 0) { throw InvalidInput("VarConfig: max_iterations must be >= 0"); }
}

static size_t var_order_index(size_t m, Real alpha) {
    // k = floor(alpha M) + 1 (1-indexed); the 1e-9 guard keeps products like
    // 0.3 * 10 = 2.999... from landing one order statistic low.
    const Real pos = std::floor(alpha * static_cast<Real>(m) + 1e-9);
    const size_t k = static_cast<size_t>(pos);
    return std::min(k, m - 1);
}

Real empirical_var_inplace(Vec& values, Real alpha) {
    if (values.empty()) { throw InvalidInput("empirical_var: empty sample list"); }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidInput("empirical_var: alpha must lie in (0, 1)");
    }
    for (Real x : values) {
        if (std::isnan(x)) { throw InvalidInput("empirical_var: NaN sample"); }
    }
    const size_t idx = var_order_index(values.size(), alpha);
    std::nth_element(values.begin(), values.begin() + idx, values.end());
    return values[idx];
}

Real empirical_var(const Vec& values, Real alpha) {
    Vec scratch(values);
    return empirical_var_inplace(scratch, alpha);
}

Real alpha_for_optimality(Real delta, int S) {
    if (!(delta > 0.0 && delta < 0.5)) {
        throw InvalidInput("alpha_for_optimality: delta must lie in (0, 1/2)");
    }
    if (S < 1) { throw InvalidInput("alpha_for_optimality: S must be >= 1"); }
    return delta / static_cast<Real>(S);
}

std::pair<ValueFunction, DeterministicPolicy>
var_bellman_update_empirical(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                             const ValueFunction& v, Real alpha) {
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const int M = ensemble.size();
    if (M < 1) { throw InvalidInput("var_bellman_update_empirical: empty ensemble"); }

    ValueFunction out(S);
    DeterministicPolicy policy(S, 0);
    Vec returns(M);
    for (int s = 0; s < S; ++s) {
        Real best = -std::numeric_limits<Real>::infinity();
        int best_a = 0;
        for (int a = 0; a < A; ++a) {
            const Vec w = one_step_returns(mdp, v, s, a);
            for (int m = 0; m < M; ++m) {
                const auto p = ensemble.models[m].row(s, a);
                Real acc = 0.0;
                for (int i = 0; i < S; ++i) { acc += p[i] * w[i]; }
                returns[m] = acc;
            }
            const Real q = empirical_var_inplace(returns, alpha);
            if (q > best) { // strict: ties keep the lowest action index
                best = q;
                best_a = a;
            }
        }
        out[s] = best;
        policy[s] = best_a;
    }
    return {std::move(out), std::move(policy)};
}

Real subgaussian_lower_bound(const PosteriorMoments& moments, const Vec& w, int s, int a,
                             Real alpha) {
    const auto mean = moments.mean_row(s, a);
    Real location = 0.0;
    for (size_t i = 0; i < mean.size(); ++i) { location += mean[i] * w[i]; }
    const Real spread = std::sqrt(moments.quadratic_form(s, a, w));
    return location - std::sqrt(2.0 * std::log(1.0 / alpha)) * spread;
}

static std::pair<ValueFunction, DeterministicPolicy>
moments_update(const TabularMdp& mdp, const PosteriorMoments& moments, const ValueFunction& v,
               Real alpha, bool subgaussian) {
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const Real penalty =
        subgaussian ? std::sqrt(2.0 * std::log(1.0 / alpha)) : std_normal_quantile(1.0 - alpha);

    ValueFunction out(S);
    DeterministicPolicy policy(S, 0);
    for (int s = 0; s < S; ++s) {
        Real best = -std::numeric_limits<Real>::infinity();
        int best_a = 0;
        for (int a = 0; a < A; ++a) {
            const Vec w = one_step_returns(mdp, v, s, a);
            const auto mean = moments.mean_row(s, a);
            Real location = 0.0;
            for (int i = 0; i < S; ++i) { location += mean[i] * w[i]; }
            const Real q = location - penalty * std::sqrt(moments.quadratic_form(s, a, w));
            if (q > best) {
                best = q;
                best_a = a;
            }
        }
        out[s] = best;
        policy[s] = best_a;
    }
    return {std::move(out), std::move(policy)};
}

std::pair<ValueFunction, DeterministicPolicy>
var_bellman_update_gaussian(const TabularMdp& mdp, const PosteriorMoments& moments,
                            const ValueFunction& v, Real alpha) {
    return moments_update(mdp, moments, v, alpha, /*subgaussian=*/false);
}

namespace {

// Shared VI loop; `update` applies one Bellman sweep.
template <typename Update>
VarSolution var_iterate(const TabularMdp& mdp, const VarConfig& cfg, const Update& update,
                        const ValueFunction* initial) {
    cfg.validate();
    const Real gamma = mdp.discount;
    const Real eps = cfg.epsilon;

    VarSolution sol;
    sol.value = initial ? *initial : ValueFunction(mdp.num_states, 0.0);
    sol.policy.assign(mdp.num_states, 0);

    if (gamma == 0.0) {
        // Stopping rule divides by gamma; one update is exact here.
        auto [value, policy] = update(sol.value);
        sol.value = std::move(value);
        sol.policy = std::move(policy);
        sol.iterations = 1;
        sol.converged = true;
        return sol;
    }

    long cap = cfg.max_iterations;
    if (cap == 0) {
        const Real r_max = mdp.reward_scale();
        cap = r_max > 0.0 ? 10L * iteration_bound(gamma, eps, r_max) : 10;
    }
    const Real threshold = eps * (1.0 - gamma) / gamma;

    for (long k = 0; k < cap; ++k) {
        auto [value, policy] = update(sol.value);
        const Real diff = sup_norm_diff(value, sol.value);
        sol.value = std::move(value);
        sol.policy = std::move(policy);
        sol.iterations = static_cast<int>(k) + 1;
        if (diff <= threshold) {
            sol.converged = true;
            return sol;
        }
    }
    sol.converged = false;
    return sol;
}

} // namespace

VarSolution var_value_iteration(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                                const VarConfig& cfg, const ValueFunction* initial) {
    if (cfg.mode != VarMode::empirical) {
        throw InvalidInput("var_value_iteration: ensemble source requires empirical mode");
    }
    return var_iterate(mdp, cfg,
                       [&](const ValueFunction& v) {
                           return var_bellman_update_empirical(mdp, ensemble, v, cfg.alpha);
                       },
                       initial);
}

VarSolution var_value_iteration(const TabularMdp& mdp, const PosteriorMoments& moments,
                                const VarConfig& cfg, const ValueFunction* initial) {
    if (cfg.mode == VarMode::empirical) {
        throw InvalidInput("var_value_iteration: moments source requires gaussian or "
                           "subgaussian-bound mode");
    }
    const bool subgaussian = cfg.mode == VarMode::subgaussian_bound;
    return var_iterate(mdp, cfg,
                       [&](const ValueFunction& v) {
                           return moments_update(mdp, moments, v, cfg.alpha, subgaussian);
                       },
                       initial);
}

ValueFunction var_policy_evaluation(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                                    const DeterministicPolicy& policy, Real alpha, Real eps) {
    VarConfig cfg;
    cfg.alpha = alpha;
    cfg.epsilon = eps;
    const int M = ensemble.size();
    Vec returns(M);
    const auto update = [&](const ValueFunction& v) {
        ValueFunction out(mdp.num_states);
        for (int s = 0; s < mdp.num_states; ++s) {
            const int a = policy[s];
            const Vec w = one_step_returns(mdp, v, s, a);
            for (int m = 0; m < M; ++m) {
                const auto p = ensemble.models[m].row(s, a);
                Real acc = 0.0;
                for (int i = 0; i < mdp.num_states; ++i) { acc += p[i] * w[i]; }
                returns[m] = acc;
            }
            out[s] = empirical_var_inplace(returns, alpha);
        }
        return std::pair<ValueFunction, DeterministicPolicy>(std::move(out), policy);
    };
    VarSolution sol = var_iterate(mdp, cfg, update, nullptr);
    if (!sol.converged) {
        throw std::runtime_error("var_policy_evaluation: iteration cap exceeded");
    }
    return std::move(sol.value);
}

} // namespace varmdp
