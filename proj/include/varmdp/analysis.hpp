// Quantile mathematics and the analytical quantities behind the performance
// and ambiguity-set-geometry results: gap bounds, iteration and sample
// complexity formulas, coverage validation, and ellipsoid membership.
#pragma once

#include "varmdp/posterior.hpp"
#include "varmdp/types.hpp"

namespace varmdp {

/// Inverse standard normal CDF. Accuracy: |error| <= 1e-9 on
/// p in [1e-12, 1-1e-12]. Throws outside (0, 1).
Real std_normal_quantile(Real p);

/// Standard normal CDF (helper for discretizations and tests).
Real std_normal_cdf(Real x);

/// Chi-squared p-quantile with dof degrees of freedom, via monotone
/// inversion of the regularized incomplete gamma. Relative error <= 1e-7.
Real chi_squared_quantile(int dof, Real p);

/// Ratio of asymptotic BCR to VaR ambiguity-set radii:
/// xi = sqrt(chi2_{S-1, 1-alpha}) / Phi^{-1}(1 - alpha).
Real radius_ratio(int S, Real alpha);

/// Finite-sample performance gap (the two-quantile bound): max over (s,a) of
/// VaR_{1-(1-delta)/S} - VaR_{delta/S} of ensemble returns, scaled by
/// 1/(1-gamma).
struct GapReport {
    Real gap_bound = 0.0;
    Vec per_sa_gaps; // flattened [s][a]
    Real delta = 0.0;
    Real alpha = 0.0;
};
GapReport performance_gap_bound(const TabularMdp& mdp, const ModelEnsemble& ensemble,
                                const ValueFunction& v_hat, Real delta);

/// Asymptotic gap: (1/(1-gamma)) 2 Phi^{-1}(1-delta/S) sigma_max / sqrt(N),
/// with sigma_max^2 = N * max_{s,a} w^T Sigma_{s,a} w (posterior covariance
/// as the Fisher-information surrogate). Also reports the looser
/// sqrt(8 ln(S/delta)) form.
struct AsymptoticGapBound {
    Real tight = 0.0;
    Real loose = 0.0;
    Real sigma_max = 0.0;
};
AsymptoticGapBound asymptotic_gap_bound(const TabularMdp& mdp, const PosteriorMoments& moments,
                                        const ValueFunction& v_hat, Real delta, Real gamma,
                                        Real n_observations);

/// ceil(log_{1/gamma}(r_max / (eps (1-gamma)))), clamped to >= 1.
int iteration_bound(Real gamma, Real eps, Real r_max);

/// Posterior samples needed for empirical-VaR accuracy eps at density eta
/// with failure probability zeta: ln(2/zeta) / (2 eps^2 eta^2).
Real sample_complexity(Real eta, Real eps, Real zeta);

/// Fraction of fresh posterior models under which `value` is a valid lower
/// bound for the policy. statewise: v <= v^pi(P) componentwise; otherwise
/// compares p0^T value against the exact expected return.
Real coverage_check(const TabularMdp& mdp, const DeterministicPolicy& policy,
                    const ValueFunction& value, const ModelEnsemble& fresh_ensemble,
                    bool statewise);

/// Membership in the asymptotic VaR ambiguity ellipsoid:
/// sqrt(N q^T C^{-1} q) <= Phi^{-1}(1-alpha), with q the first S-1
/// coordinates of p - p_star and C the (S-1)x(S-1) reduced covariance scaled
/// by N (the per-observation Fisher-information-inverse surrogate).
/// cov_reduced is row-major (S-1)^2; singular C throws.
bool var_ellipsoid_membership(std::span<const Real> p, std::span<const Real> p_star,
                              std::span<const Real> cov_reduced, Real alpha,
                              Real n_observations);

} // namespace varmdp
