#include "varmdp/analysis.hpp"

#include "varmdp/mdp_core.hpp"
#include "varmdp/var_solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace varmdp {

Real std_normal_cdf(Real x) {
    return 0.5 * std::erfc(-x / 1.4142135623730950488);
}

// Wichura's PPND16 rational approximation (Applied Statistics 241).
Real std_normal_quantile(Real p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidInput("std_normal_quantile: p must lie in (0, 1)");
    }
    const Real q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const Real r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    Real r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    Real val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -val : val;
}

// Regularized lower incomplete gamma P(a, x): series for x < a+1, Lentz
// continued fraction for the complement otherwise.
static Real regularized_gamma_p(Real a, Real x) {
    if (x <= 0.0) { return 0.0; }
    const Real log_prefactor = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        Real term = 1.0 / a;
        Real sum = term;
        for (int n = 1; n < 10000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) { break; }
        }
        return sum * std::exp(log_prefactor);
    }
    const Real tiny = 1e-300;
    Real b = x + 1.0 - a;
    Real c = 1.0 / tiny;
    Real d = 1.0 / b;
    Real h = d;
    for (int i = 1; i < 10000; ++i) {
        const Real an = -static_cast<Real>(i) * (static_cast<Real>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) { d = tiny; }
        c = b + an / c;
        if (std::abs(c) < tiny) { c = tiny; }
        d = 1.0 / d;
        const Real delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 3e-16) { break; }
    }
    return 1.0 - std::exp(log_prefactor) * h;
}

Real chi_squared_quantile(int dof, Real p) {
    if (dof < 1) { throw InvalidInput("chi_squared_quantile: dof must be >= 1"); }
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidInput("chi_squared_quantile: p must lie in (0, 1)");
    }
    const Real a = 0.5 * dof;
    const auto cdf = [a](Real x) { return regularized_gamma_p(a, 0.5 * x); };

    Real lo = 0.0;
    Real hi = dof + 10.0;
    while (cdf(hi) < p) { hi *= 2.0; }
    for (int i = 0; i < 200 && (hi - lo) > 1e-14 * std::max(Real(1), hi); ++i) {
        const Real mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
    }
    Real x = 0.5 * (lo + hi);
    // Newton polish on the CDF.
    for (int i = 0; i < 3; ++i) {
        const Real log_pdf = (a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a);
        const Real pdf = std::exp(log_pdf);
        if (!(pdf > 1e-300)) { break; }
        const Real step = (cdf(x) - p) / pdf;
        const Real next = x - step;
        if (!(next > lo && next < hi)) { break; }
        x = next;
    }
    return x;
}

Real radius_ratio(int S, Real alpha) {
    if (S < 2) { throw InvalidInput("radius_ratio: S must be >= 2"); }
    if (!(alpha > 0.0 && alpha < 0.5)) {
        throw InvalidInput("radius_ratio: alpha must lie in (0, 1/2)");
    }
    return std::sqrt(chi_squared_quantile(S - 1, 1.0 - alpha)) /
           std_normal_quantile(1.0 - alpha);
}

GapReport performance_gap_bound(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                                const ValueFunction& v_hat, Real delta) {
    if (!(delta > 0.0 && delta < 0.5)) {
        throw InvalidInput("performance_gap_bound: delta must lie in (0, 1/2)");
    }
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const Real alpha = alpha_for_optimality(delta, S);
    const Real upper_level = 1.0 - (1.0 - delta) / S;

    GapReport report;
    report.delta = delta;
    report.alpha = alpha;
    report.per_sa_gaps.assign(static_cast<size_t>(S) * A, 0.0);

    Vec returns(ensemble.size());
    Real worst = 0.0;
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const Vec w = one_step_returns(mdp, v_hat, s, a);
            for (int m = 0; m < ensemble.size(); ++m) {
                const auto p = ensemble.models[m].row(s, a);
                Real acc = 0.0;
                for (int i = 0; i < S; ++i) { acc += p[i] * w[i]; }
                returns[m] = acc;
            }
            const Real hi = empirical_var(returns, upper_level);
            const Real lo = empirical_var(returns, alpha);
            const Real gap = hi - lo;
            report.per_sa_gaps[static_cast<size_t>(s) * A + a] = gap;
            worst = std::max(worst, gap);
        }
    }
    report.gap_bound = worst / (1.0 - mdp.discount);
    return report;
}

AsymptoticGapBound asymptotic_gap_bound(const TabularMdp& mdp, const PosteriorMoments& mom,
                                        const ValueFunction& v_hat, Real delta, Real gamma,
                                        Real n_observations) {
    if (!(delta > 0.0 && delta < 0.5)) {
        throw InvalidInput("asymptotic_gap_bound: delta must lie in (0, 1/2)");
    }
    if (!(n_observations > 0.0)) {
        throw InvalidInput("asymptotic_gap_bound: N must be > 0");
    }
    const int S = mdp.num_states;
    Real max_quadratic = 0.0;
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            const Vec w = one_step_returns(mdp, v_hat, s, a);
            max_quadratic = std::max(max_quadratic, mom.quadratic_form(s, a, w));
        }
    }
    AsymptoticGapBound out;
    out.sigma_max = std::sqrt(n_observations * max_quadratic);
    const Real scale = out.sigma_max / ((1.0 - gamma) * std::sqrt(n_observations));
    out.tight = 2.0 * std_normal_quantile(1.0 - delta / S) * scale;
    out.loose = std::sqrt(8.0 * std::log(S / delta)) * scale;
    return out;
}

int iteration_bound(Real gamma, Real eps, Real r_max) {
    if (!(gamma > 0.0 && gamma < 1.0)) { throw InvalidInput("iteration_bound: gamma in (0,1)"); }
    if (!(eps > 0.0)) { throw InvalidInput("iteration_bound: eps must be > 0"); }
    if (!(r_max > 0.0)) { throw InvalidInput("iteration_bound: r_max must be > 0"); }
    const Real arg = r_max / (eps * (1.0 - gamma));
    if (arg <= 1.0) { return 1; }
    // The 1e-9 guard keeps exactly-representable ratios (log2(4) = 2) from
    // rounding up through the ceiling.
    const Real k = std::ceil(std::log(arg) / std::log(1.0 / gamma) - 1e-9);
    return std::max(1, static_cast<int>(k));
}

Real sample_complexity(Real eta, Real eps, Real zeta) {
    if (!(eta > 0.0)) { throw InvalidInput("sample_complexity: eta must be > 0"); }
    if (!(eps > 0.0)) { throw InvalidInput("sample_complexity: eps must be > 0"); }
    if (!(zeta > 0.0 && zeta < 1.0)) { throw InvalidInput("sample_complexity: zeta in (0,1)"); }
    return std::log(2.0 / zeta) / (2.0 * eps * eps * eta * eta);
}

Real coverage_check(const TabularMdp& mdp, const DeterministicPolicy& policy,
                    const ValueFunction& value, const ModelEnsemble& fresh_ensemble,
                    bool statewise) {
    if (fresh_ensemble.models.empty()) { throw InvalidInput("coverage_check: empty ensemble"); }
    const Real slack = 1e-9;
    int covered = 0;
    for (const auto& model : fresh_ensemble.models) {
        const ValueFunction v_model = policy_value(mdp, model, policy, 1e-10);
        if (statewise) {
            bool ok = true;
            for (int s = 0; s < mdp.num_states; ++s) {
                if (value[s] > v_model[s] + slack) {
                    ok = false;
                    break;
                }
            }
            covered += ok ? 1 : 0;
        } else {
            Real lhs = 0.0;
            Real rhs = 0.0;
            for (int s = 0; s < mdp.num_states; ++s) {
                lhs += mdp.initial_dist[s] * value[s];
                rhs += mdp.initial_dist[s] * v_model[s];
            }
            covered += (lhs <= rhs + slack) ? 1 : 0;
        }
    }
    return static_cast<Real>(covered) / fresh_ensemble.size();
}

bool var_ellipsoid_membership(std::span<const Real> p, std::span<const Real> p_star,
                              std::span<const Real> cov_reduced, Real alpha,
                              Real n_observations) {
    const int dim = static_cast<int>(p.size()) - 1;
    if (dim < 1 || p_star.size() != p.size() ||
        cov_reduced.size() != static_cast<size_t>(dim) * dim) {
        throw InvalidInput("var_ellipsoid_membership: inconsistent shapes");
    }
    Eigen::MatrixXd cov(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) { cov(i, j) = cov_reduced[static_cast<size_t>(i) * dim + j]; }
    }
    Eigen::VectorXd q(dim);
    for (int i = 0; i < dim; ++i) { q(i) = p[i] - p_star[i]; }

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("var_ellipsoid_membership: reduced covariance is not positive definite");
    }
    const Real quad = n_observations * q.dot(llt.solve(q));
    if (!std::isfinite(quad)) {
        throw std::runtime_error("var_ellipsoid_membership: singular reduced covariance");
    }
    return std::sqrt(std::max(Real(0), quad)) <= std_normal_quantile(1.0 - alpha);
}

} // namespace varmdp
