#include "varmdp/robust_baselines.hpp"

#include "varmdp/analysis.hpp"
#include "varmdp/mdp_core.hpp"
#include "varmdp/simplex_lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace varmdp {

void AmbiguitySetSpec::validate() const {
    const size_t sa = static_cast<size_t>(num_states) * num_actions;
    if (centers.size() != sa * num_states || weights.size() != sa * num_states ||
        radii.size() != sa) {
        throw InvalidInput("AmbiguitySetSpec: inconsistent tensor sizes");
    }
    for (Real b : weights) {
        if (!(b > 0.0)) { throw InvalidInput("AmbiguitySetSpec: weights must be positive"); }
    }
    for (Real r : radii) {
        if (!(r >= 0.0)) { throw InvalidInput("AmbiguitySetSpec: radii must be nonnegative"); }
    }
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            detail::check_distribution(center_row(s, a), 1e-9, "AmbiguitySetSpec center");
        }
    }
}

AmbiguitySetSpec AmbiguitySetSpec::around(const PosteriorMoments& moments, Norm norm) {
    AmbiguitySetSpec spec;
    spec.num_states = moments.num_states;
    spec.num_actions = moments.num_actions;
    spec.norm = norm;
    spec.centers = moments.mean;
    spec.weights.assign(moments.mean.size(), 1.0);
    spec.radii.assign(static_cast<size_t>(moments.num_states) * moments.num_actions, 0.0);
    return spec;
}

Real weighted_norm_distance(std::span<const Real> p, std::span<const Real> p_bar,
                            std::span<const Real> b, Norm q) {
    if (p.size() != p_bar.size() || p.size() != b.size()) {
        throw InvalidInput("weighted_norm_distance: size mismatch");
    }
    Real out = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const Real term = b[i] * std::abs(p[i] - p_bar[i]);
        out = (q == Norm::l1) ? out + term : std::max(out, term);
    }
    return out;
}

Vec fit_bcr_radius(const ModelEnsemble& ensemble, const Vec& centers, const Vec& weights,
                   Norm q, Real alpha) {
    const int M = ensemble.size();
    if (M < 1) { throw InvalidInput("fit_bcr_radius: empty ensemble"); }
    if (!(alpha > 0.0 && alpha < 1.0)) { throw InvalidInput("fit_bcr_radius: alpha in (0,1)"); }
    const int S = ensemble.num_states();
    const int A = ensemble.num_actions();

    // k-th smallest distance, k = ceil((1-alpha) M); the epsilon keeps exact
    // products like 0.8 * 100 on the intended order statistic.
    const int k = std::clamp(
        static_cast<int>(std::ceil((1.0 - alpha) * static_cast<Real>(M) - 1e-9)), 1, M);

    Vec radii(static_cast<size_t>(S) * A);
    Vec distances(M);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const size_t offset = (static_cast<size_t>(s) * A + a) * S;
            const std::span<const Real> center(centers.data() + offset, S);
            const std::span<const Real> weight(weights.data() + offset, S);
            for (int m = 0; m < M; ++m) {
                distances[m] = weighted_norm_distance(ensemble.models[m].row(s, a), center,
                                                      weight, q);
            }
            std::nth_element(distances.begin(), distances.begin() + (k - 1), distances.end());
            radii[static_cast<size_t>(s) * A + a] = distances[k - 1];
        }
    }
    return radii;
}

// Uniform-weight transfer argument: move mass from the most expensive
// coordinates onto the cheapest one, spending at most psi/(2 b0) of it.
static std::pair<Vec, Real> worst_case_l1_uniform(const Vec& p_bar, const Vec& w, Real psi,
                                                  Real b0) {
    const size_t n = p_bar.size();
    Vec p(p_bar);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t i, size_t j) { return w[i] < w[j]; });

    const size_t cheapest = order.front();
    Real budget = std::min(psi / (2.0 * b0), 1.0 - p_bar[cheapest]);
    p[cheapest] += budget;
    for (size_t t = n; t-- > 0 && budget > 0.0;) {
        const size_t donor = order[t];
        if (donor == cheapest) { continue; }
        const Real move = std::min(budget, p[donor]);
        p[donor] -= move;
        budget -= move;
    }
    Real value = 0.0;
    for (size_t i = 0; i < n; ++i) { value += p[i] * w[i]; }
    return {std::move(p), value};
}

std::pair<Vec, Real> worst_case_l1(const Vec& p_bar, const Vec& w, Real psi, const Vec& b) {
    const size_t n = p_bar.size();
    if (w.size() != n || b.size() != n || n == 0) {
        throw InvalidInput("worst_case_l1: size mismatch");
    }
    if (!(psi >= 0.0)) { throw InvalidInput("worst_case_l1: psi must be >= 0"); }
    for (Real bi : b) {
        if (!(bi > 0.0)) { throw InvalidInput("worst_case_l1: weights must be positive"); }
    }

    const bool uniform = std::all_of(b.begin(), b.end(), [&](Real bi) { return bi == b[0]; });
    if (uniform) { return worst_case_l1_uniform(p_bar, w, psi, b[0]); }

    // Weighted case: small LP over gains g and losses h, p = p_bar + g - h.
    //   min  w^T (g - h)
    //   s.t. 1^T g - 1^T h = 0,  b^T g + b^T h <= psi,  h <= p_bar,  g,h >= 0
    const size_t nv = 2 * n;
    Vec c(nv, 0.0);
    for (size_t i = 0; i < n; ++i) {
        c[i] = w[i];
        c[n + i] = -w[i];
    }
    std::vector<Vec> a_ub;
    Vec b_ub;
    Vec budget_row(nv, 0.0);
    for (size_t i = 0; i < n; ++i) {
        budget_row[i] = b[i];
        budget_row[n + i] = b[i];
    }
    a_ub.push_back(std::move(budget_row));
    b_ub.push_back(psi);
    for (size_t i = 0; i < n; ++i) {
        Vec row(nv, 0.0);
        row[n + i] = 1.0;
        a_ub.push_back(std::move(row));
        b_ub.push_back(p_bar[i]);
    }
    std::vector<Vec> a_eq(1, Vec(nv, 0.0));
    for (size_t i = 0; i < n; ++i) {
        a_eq[0][i] = 1.0;
        a_eq[0][n + i] = -1.0;
    }
    const Vec b_eq(1, 0.0);

    const LpResult lp = solve_lp(a_ub, b_ub, a_eq, b_eq, c);
    if (lp.status != LpResult::Status::optimal) {
        throw std::runtime_error("worst_case_l1: inner LP did not solve"); // p_bar is feasible
    }
    Vec p(n);
    Real value = 0.0;
    for (size_t i = 0; i < n; ++i) {
        p[i] = std::max(Real(0), p_bar[i] + lp.x[i] - lp.x[n + i]);
        value += p[i] * w[i];
    }
    return {std::move(p), value};
}

std::pair<Vec, Real> worst_case_linf(const Vec& p_bar, const Vec& w, Real psi, const Vec& b) {
    const size_t n = p_bar.size();
    if (w.size() != n || b.size() != n || n == 0) {
        throw InvalidInput("worst_case_linf: size mismatch");
    }
    if (!(psi >= 0.0)) { throw InvalidInput("worst_case_linf: psi must be >= 0"); }

    Vec lower(n);
    Vec upper(n);
    Real lower_sum = 0.0;
    Real upper_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (!(b[i] > 0.0)) { throw InvalidInput("worst_case_linf: weights must be positive"); }
        lower[i] = std::max(Real(0), p_bar[i] - psi / b[i]);
        upper[i] = std::min(Real(1), p_bar[i] + psi / b[i]);
        lower_sum += lower[i];
        upper_sum += upper[i];
    }
    if (upper_sum < 1.0 - 1e-12 || lower_sum > 1.0 + 1e-12) {
        throw std::runtime_error("worst_case_linf: box does not meet the simplex");
    }

    // Start at the lower bounds, pour the residual mass cheapest-first.
    Vec p(lower);
    Real residual = 1.0 - lower_sum;
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t i, size_t j) { return w[i] < w[j]; });
    for (size_t idx : order) {
        if (residual <= 0.0) { break; }
        const Real add = std::min(residual, upper[idx] - lower[idx]);
        p[idx] += add;
        residual -= add;
    }
    Real value = 0.0;
    for (size_t i = 0; i < n; ++i) { value += p[i] * w[i]; }
    return {std::move(p), value};
}

RobustSolution robust_value_iteration(const TabularMdp& mdp, const AmbiguitySetSpec& spec,
                                      Real eps) {
    spec.validate();
    if (!(eps > 0.0)) { throw InvalidInput("robust_value_iteration: eps must be > 0"); }
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const Real gamma = mdp.discount;

    RobustSolution sol;
    sol.value.assign(S, 0.0);
    sol.policy.assign(S, 0);

    const Real r_max = mdp.reward_scale();
    long cap = 10;
    if (gamma > 0.0 && r_max > 0.0) { cap = 10L * iteration_bound(gamma, eps, r_max); }
    const Real threshold = gamma > 0.0 ? eps * (1.0 - gamma) / gamma
                                       : std::numeric_limits<Real>::infinity();

    Vec p_bar(S);
    Vec weight(S);
    for (long k = 0; k < cap; ++k) {
        ValueFunction next(S);
        for (int s = 0; s < S; ++s) {
            Real best = -std::numeric_limits<Real>::infinity();
            int best_a = 0;
            for (int a = 0; a < A; ++a) {
                const Vec w = one_step_returns(mdp, sol.value, s, a);
                const auto center = spec.center_row(s, a);
                const auto bw = spec.weight_row(s, a);
                p_bar.assign(center.begin(), center.end());
                weight.assign(bw.begin(), bw.end());
                const Real q = (spec.norm == Norm::l1)
                                   ? worst_case_l1(p_bar, w, spec.radius(s, a), weight).second
                                   : worst_case_linf(p_bar, w, spec.radius(s, a), weight).second;
                if (q > best) {
                    best = q;
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
    sol.converged = false;
    return sol;
}

Vec optimize_weights(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                     const ValueFunction& v, Norm /*q*/) {
    constexpr Real kFloor = 1e-3;
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const PosteriorMoments mom = moments(ensemble);

    Vec weights(static_cast<size_t>(S) * A * S);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const Vec w = one_step_returns(mdp, v, s, a);
            const auto mean = mom.mean_row(s, a);
            Real anchor = 0.0;
            for (int i = 0; i < S; ++i) { anchor += mean[i] * w[i]; }
            Real* row = weights.data() + (static_cast<size_t>(s) * A + a) * S;
            Real total = 0.0;
            for (int i = 0; i < S; ++i) {
                row[i] = std::abs(w[i] - anchor) + kFloor;
                total += row[i];
            }
            const Real scale = static_cast<Real>(S) / total; // mean weight 1
            for (int i = 0; i < S; ++i) { row[i] *= scale; }
        }
    }
    return weights;
}

Vec hoeffding_radius(const std::vector<long>& visit_counts, int S, int A, Real delta,
                     HoeffdingWeights /*mode*/) {
    if (!(delta > 0.0 && delta < 1.0)) { throw InvalidInput("hoeffding_radius: delta in (0,1)"); }
    if (visit_counts.size() != static_cast<size_t>(S) * A) {
        throw InvalidInput("hoeffding_radius: counts size mismatch");
    }
    // ln(S A 2^S / delta), the union-bound budget over rows and successor
    // subsets. The radii are identical in both weight modes; see the header.
    const Real log_term =
        std::log(static_cast<Real>(S) * A / delta) + static_cast<Real>(S) * std::log(2.0);
    Vec radii(visit_counts.size());
    for (size_t i = 0; i < visit_counts.size(); ++i) {
        radii[i] = visit_counts[i] >= 1
                       ? std::min(Real(2), std::sqrt(2.0 / static_cast<Real>(visit_counts[i]) *
                                                     log_term))
                       : Real(2); // l1 diameter for unvisited rows
    }
    return radii;
}

RobustSolution soft_robust_solve(const TabularMdp& mdp, const PosteriorMoments& mom,
                                 Real eps) {
    TransitionModel mean_model(mdp.num_states, mdp.num_actions, Vec(mom.mean));
    const ClassicalSolution classical = value_iteration(mdp, mean_model, eps);
    RobustSolution sol;
    sol.policy = classical.policy;
    sol.value = classical.value;
    sol.iterations = classical.iterations;
    sol.converged = classical.converged;
    return sol;
}

RobustSolution wbcr_solve(const TabularMdp& mdp, const ModelEnsemble& ensemble, Norm q,
                          Real alpha, Real eps, int max_outer) {
    const PosteriorMoments mom = moments(ensemble);
    AmbiguitySetSpec spec = AmbiguitySetSpec::around(mom, q);

    RobustSolution sol;
    Vec previous;
    for (int round = 0; round < std::max(1, max_outer); ++round) {
        spec.radii = fit_bcr_radius(ensemble, spec.centers, spec.weights, q, alpha);
        sol = robust_value_iteration(mdp, spec, eps);
        if (!previous.empty() && sup_norm_diff(sol.value, previous) <= eps) { break; }
        previous = sol.value;
        spec.weights = optimize_weights(mdp, ensemble, sol.value, q);
    }
    return sol;
}

} // namespace varmdp
