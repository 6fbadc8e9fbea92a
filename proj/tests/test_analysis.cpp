#include "varmdp/analysis.hpp"

#include "test_helpers.hpp"
#include "varmdp/mdp_core.hpp"
#include "varmdp/var_solver.hpp"

#include <doctest.h>

#include <cmath>

using namespace varmdp;
using namespace varmdp::testing;

namespace {

// Independent oracle: invert the erfc-based normal CDF by bisection.
Real normal_quantile_oracle(Real p) {
    Real lo = -40.0;
    Real hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const Real mid = 0.5 * (lo + hi);
        (std_normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("std_normal_quantile") {
    CHECK(std_normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(std_normal_quantile(0.975) - 1.959964) <= 1e-6);
    CHECK(std::abs(std_normal_quantile(0.95) - 1.644854) <= 1e-6);
    SUBCASE("matches the bisection oracle across the domain") {
        for (const Real p : {1e-12, 1e-9, 1e-4, 0.01, 0.2, 0.4, 0.6, 0.9, 0.999, 1 - 1e-9}) {
            CHECK(std::abs(std_normal_quantile(p) - normal_quantile_oracle(p)) <= 1e-9);
        }
    }
    SUBCASE("antisymmetry") {
        for (const Real p : {0.001, 0.1, 0.25, 0.49}) {
            CHECK(std::abs(std_normal_quantile(1.0 - p) + std_normal_quantile(p)) <= 1e-9);
        }
    }
    CHECK_THROWS_AS(std_normal_quantile(0.0), InvalidInput);
    CHECK_THROWS_AS(std_normal_quantile(1.0), InvalidInput);
}

TEST_CASE("chi_squared_quantile") {
    CHECK(std::abs(chi_squared_quantile(1, 0.8) - 1.642374) <= 1e-5);
    SUBCASE("dof=2 has the exponential closed form") {
        for (const Real p : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99, 0.999}) {
            CHECK(std::abs(chi_squared_quantile(2, p) + 2.0 * std::log(1.0 - p)) <= 1e-9);
        }
        CHECK(std::abs(chi_squared_quantile(2, 0.95) - 5.991465) <= 1e-5);
    }
    SUBCASE("dof=1 is the square of the folded normal quantile") {
        for (const Real p : {0.05, 0.3, 0.5, 0.8, 0.99}) {
            const Real z = std_normal_quantile(0.5 * (1.0 + p));
            CHECK(std::abs(chi_squared_quantile(1, p) - z * z) <= 1e-6);
        }
    }
    SUBCASE("vanishes as p goes to zero") {
        CHECK(chi_squared_quantile(3, 1e-9) < 1e-2);
        CHECK(chi_squared_quantile(3, 1e-9) > 0.0);
    }
    SUBCASE("large dof stays accurate (median near dof)") {
        // median of chi^2_k is about k (1 - 2/(9k))^3
        const int k = 400;
        const Real approx_median = k * std::pow(1.0 - 2.0 / (9.0 * k), 3.0);
        CHECK(chi_squared_quantile(k, 0.5) == doctest::Approx(approx_median).epsilon(1e-3));
    }
    CHECK_THROWS_AS(chi_squared_quantile(0, 0.5), InvalidInput);
    CHECK_THROWS_AS(chi_squared_quantile(2, 1.0), InvalidInput);
}

TEST_CASE("radius_ratio") {
    SUBCASE("S=2 composes the two quantile routines") {
        CHECK(std::abs(radius_ratio(2, 0.2) - 1.52283) <= 2e-5);
    }
    SUBCASE("monotone nondecreasing in S and above one") {
        for (const Real alpha : {0.05, 0.2, 0.4}) {
            Real prev = 1.0;
            for (int S = 2; S <= 60; ++S) {
                const Real xi = radius_ratio(S, alpha);
                CHECK(xi > 1.0);
                CHECK(xi >= prev - 1e-9);
                prev = xi;
            }
        }
    }
    SUBCASE("sqrt(S) growth at alpha = 0.05") {
        const Real ratio = radius_ratio(100, 0.05) / radius_ratio(25, 0.05);
        CHECK(std::abs(ratio - 1.84) <= 0.02);
    }
    SUBCASE("xi / sqrt(S) approaches a positive constant") {
        const Real at_400 = radius_ratio(400, 0.05) / std::sqrt(400.0);
        const Real at_500 = radius_ratio(500, 0.05) / std::sqrt(500.0);
        CHECK(at_500 > 0.0);
        CHECK(std::abs(at_500 - at_400) < 0.01);
        // the limit is 1 / Phi^{-1}(0.95)
        CHECK(std::abs(at_500 - 1.0 / std_normal_quantile(0.95)) < 0.05);
    }
    CHECK_THROWS_AS(radius_ratio(1, 0.1), InvalidInput);
    CHECK_THROWS_AS(radius_ratio(3, 0.6), InvalidInput);
}

TEST_CASE("performance_gap_bound") {
    SUBCASE("point-mass ensemble gives a zero gap") {
        RngStream rng(51);
        TabularMdp mdp = random_mdp(rng, 3, 2, 0.9);
        ModelEnsemble ensemble;
        const TransitionModel model = random_model(rng, 3, 2);
        ensemble.models.assign(20, model);
        const GapReport report = performance_gap_bound(mdp, ensemble, Vec(3, 0.3), 0.1);
        CHECK(report.gap_bound == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("nonnegative and equal to the direct two-quantile recomputation") {
        RngStream rng(52);
        TabularMdp mdp = random_mdp(rng, 4, 2, 0.85);
        const DirichletPosterior post = random_posterior(rng, 4, 2, 5.0);
        const ModelEnsemble ensemble = sample_models(post, 60, 7);
        Vec v_hat(4);
        for (Real& x : v_hat) { x = rng.uniform(); }
        const Real delta = 0.12;
        const GapReport report = performance_gap_bound(mdp, ensemble, v_hat, delta);
        CHECK(report.gap_bound >= 0.0);
        CHECK(report.alpha == doctest::Approx(delta / 4.0));

        Real worst = 0.0;
        for (int s = 0; s < 4; ++s) {
            for (int a = 0; a < 2; ++a) {
                const Vec w = one_step_returns(mdp, v_hat, s, a);
                Vec returns(ensemble.size());
                for (int m = 0; m < ensemble.size(); ++m) {
                    const auto p = ensemble.models[m].row(s, a);
                    Real acc = 0.0;
                    for (int i = 0; i < 4; ++i) { acc += p[i] * w[i]; }
                    returns[m] = acc;
                }
                const Real gap = empirical_var(returns, 1.0 - (1.0 - delta) / 4.0) -
                                 empirical_var(returns, delta / 4.0);
                CHECK(report.per_sa_gaps[static_cast<size_t>(s) * 2 + a] ==
                      doctest::Approx(gap).epsilon(1e-12));
                worst = std::max(worst, gap);
            }
        }
        CHECK(report.gap_bound == doctest::Approx(worst / (1.0 - 0.85)));
    }
    SUBCASE("gap shrinks as the posterior concentrates") {
        const TabularMdp mdp = example_mdp(0.9);
        Real previous = std::numeric_limits<Real>::infinity();
        for (const Real c : {1.0, 10.0, 100.0}) {
            DirichletPosterior post(4, 1, 1e-6);
            auto row = post.mutable_row(0, 0);
            row[1] = 10.0 * c;
            row[2] = 10.0 * c;
            row[3] = c;
            for (int s = 1; s < 4; ++s) {
                post.mutable_row(s, 0)[s] = 1e6; // effectively absorbing
            }
            const ModelEnsemble ensemble = sample_models(post, 20000, 5);
            const Real bound =
                performance_gap_bound(mdp, ensemble, Vec(4, 0.0), 0.2).gap_bound;
            CHECK(bound < previous);
            previous = bound;
        }
    }
}

TEST_CASE("asymptotic_gap_bound") {
    SUBCASE("zero covariance gives a zero bound") {
        RngStream rng(53);
        TabularMdp mdp = random_mdp(rng, 3, 1, 0.9);
        PosteriorMoments mom;
        mom.num_states = 3;
        mom.num_actions = 1;
        mom.mean = {0.3, 0.3, 0.4, 0.3, 0.3, 0.4, 0.3, 0.3, 0.4};
        mom.cov.assign(27, 0.0);
        const AsymptoticGapBound out = asymptotic_gap_bound(mdp, mom, Vec(3, 0.0), 0.1, 0.9, 100);
        CHECK(out.tight == doctest::Approx(0.0));
        CHECK(out.loose == doctest::Approx(0.0));
    }
    SUBCASE("quantile arithmetic example and dominance of the loose form") {
        // One meaningful row with w^T Sigma w = 0.01 under w = e0, S = 5.
        const int S = 5;
        Vec rewards(static_cast<size_t>(S) * S, 0.0);
        rewards[0] = 1.0; // R(0, 0, 0) = 1 so w_{0,0} = e0 at v = 0
        TabularMdp mdp(S, 1, std::move(rewards), 0.9, {1.0, 0.0, 0.0, 0.0, 0.0});
        PosteriorMoments mom;
        mom.num_states = S;
        mom.num_actions = 1;
        mom.mean.assign(static_cast<size_t>(S) * S, 1.0 / S);
        mom.cov.assign(static_cast<size_t>(S) * S * S, 0.0);
        // Sigma_{0,0} = 0.01 (e0 - e1)(e0 - e1)^T : PSD, rows sum to zero.
        Real* cov = mom.cov.data();
        cov[0 * S + 0] = 0.01;
        cov[0 * S + 1] = -0.01;
        cov[1 * S + 0] = -0.01;
        cov[1 * S + 1] = 0.01;
        const AsymptoticGapBound out =
            asymptotic_gap_bound(mdp, mom, Vec(S, 0.0), 0.05, 0.9, 1.0);
        CHECK(out.sigma_max == doctest::Approx(0.1));
        CHECK(out.tight == doctest::Approx(4.652696).epsilon(1e-5));
        CHECK(out.loose >= out.tight);
        CHECK(out.loose ==
              doctest::Approx(std::sqrt(8.0 * std::log(5.0 / 0.05)) * 0.1 / 0.1));
    }
    SUBCASE("loose dominates tight on random instances") {
        RngStream rng(54);
        for (int trial = 0; trial < 10; ++trial) {
            TabularMdp mdp = random_mdp(rng, 4, 2, 0.8);
            const DirichletPosterior post = random_posterior(rng, 4, 2, 4.0);
            const AsymptoticGapBound out = asymptotic_gap_bound(
                mdp, moments(post), Vec(4, 0.5), 0.02 + 0.4 * rng.uniform(), 0.8, 50.0);
            CHECK(out.loose >= out.tight - 1e-12);
        }
    }
}

TEST_CASE("iteration_bound") {
    CHECK(iteration_bound(0.9, 0.01, 1.0) == 66);
    CHECK(iteration_bound(0.9, 1e-3, 1.0) == 88);
    CHECK(iteration_bound(0.5, 0.5, 1.0) == 2);
    CHECK(iteration_bound(0.9, 20.0, 1.0) == 1); // eps >= r_max/(1-gamma)
    CHECK_THROWS_AS(iteration_bound(0.0, 0.1, 1.0), InvalidInput);
    CHECK_THROWS_AS(iteration_bound(0.9, 0.0, 1.0), InvalidInput);
    CHECK_THROWS_AS(iteration_bound(0.9, 0.1, 0.0), InvalidInput);
}

TEST_CASE("sample_complexity") {
    CHECK(sample_complexity(1.0, 1.0, 2.0 / std::exp(1.0)) == doctest::Approx(0.5));
    CHECK(sample_complexity(0.5, 0.1, 0.05) == doctest::Approx(737.78).epsilon(1e-4));
    SUBCASE("halving eps quadruples the requirement") {
        const Real base = sample_complexity(0.7, 0.2, 0.1);
        CHECK(sample_complexity(0.7, 0.1, 0.1) == doctest::Approx(4.0 * base));
    }
    CHECK_THROWS_AS(sample_complexity(0.0, 0.1, 0.1), InvalidInput);
    CHECK_THROWS_AS(sample_complexity(1.0, 0.1, 1.5), InvalidInput);
}

TEST_CASE("coverage_check") {
    RngStream rng(55);
    TabularMdp mdp = random_mdp(rng, 3, 2, 0.85);
    const DirichletPosterior post = random_posterior(rng, 3, 2, 30.0);
    const ModelEnsemble fresh = sample_models(post, 300, 17);
    const DeterministicPolicy pi = {0, 1, 0};

    SUBCASE("a very negative surrogate is always covered") {
        CHECK(coverage_check(mdp, pi, Vec(3, -1e9), fresh, true) == doctest::Approx(1.0));
        CHECK(coverage_check(mdp, pi, Vec(3, -1e9), fresh, false) == doctest::Approx(1.0));
    }
    SUBCASE("the mean-model value sits strictly inside (0, 1) coverage") {
        const PosteriorMoments mom = moments(post);
        TransitionModel mean_model(3, 2, Vec(mom.mean));
        const Vec value = policy_value(mdp, mean_model, pi, 1e-10);
        const Real statewise = coverage_check(mdp, pi, value, fresh, true);
        const Real by_return = coverage_check(mdp, pi, value, fresh, false);
        CHECK(statewise > 0.0);
        CHECK(statewise < 1.0);
        CHECK(by_return > 0.05);
        CHECK(by_return < 0.95);
    }
}

TEST_CASE("var_ellipsoid_membership") {
    SUBCASE("the center is a member and scaling leaves the set") {
        const Vec p_star = {0.5, 0.3, 0.2};
        const Vec cov_reduced = {0.04, -0.01, -0.01, 0.03}; // 2x2, PD
        CHECK(var_ellipsoid_membership(p_star, p_star, cov_reduced, 0.2, 50.0));

        // Take a direction, scale it just beyond the threshold.
        Vec probe = p_star;
        const Real step = 1e-3;
        probe[0] += step;
        probe[1] -= step;
        REQUIRE(var_ellipsoid_membership(probe, p_star, cov_reduced, 0.2, 50.0));
        Vec q = {probe[0] - p_star[0], probe[1] - p_star[1]};
        // current Minkowski norm of the probe
        const Real a = cov_reduced[0];
        const Real b = cov_reduced[1];
        const Real d = cov_reduced[3];
        const Real det = a * d - b * b;
        const Real quad =
            50.0 * (d * q[0] * q[0] - 2.0 * b * q[0] * q[1] + a * q[1] * q[1]) / det;
        const Real scale = 1.05 * std_normal_quantile(0.8) / std::sqrt(quad);
        Vec outside = p_star;
        outside[0] += step * scale;
        outside[1] -= step * scale;
        CHECK_FALSE(var_ellipsoid_membership(outside, p_star, cov_reduced, 0.2, 50.0));
    }
    SUBCASE("membership fraction matches the direct quadratic form on Dirichlet samples") {
        DirichletPosterior post(3, 1, 1.0);
        auto row = post.mutable_row(0, 0);
        row[0] = 30.0;
        row[1] = 20.0;
        row[2] = 10.0;
        const PosteriorMoments mom = moments(post);
        const Real n_obs = 60.0; // alpha0 of the row
        const auto cov = mom.cov_block(0, 0);
        // reduced 2x2 block, scaled by N (per-observation surrogate)
        const Vec cov_reduced = {n_obs * cov[0], n_obs * cov[1], n_obs * cov[3], n_obs * cov[4]};
        const Vec p_star(mom.mean_row(0, 0).begin(), mom.mean_row(0, 0).end());

        const ModelEnsemble samples = sample_models(post, 4000, 21);
        const Real alpha = 0.2;
        const Real threshold = std_normal_quantile(1.0 - alpha);
        int members = 0;
        int agreement = 0;
        const Real a = cov_reduced[0];
        const Real b = cov_reduced[1];
        const Real d = cov_reduced[3];
        const Real det = a * d - b * b;
        for (const auto& model : samples.models) {
            const auto p = model.row(0, 0);
            const Vec pv(p.begin(), p.end());
            const bool member =
                var_ellipsoid_membership(pv, p_star, cov_reduced, alpha, n_obs);
            const Real q0 = p[0] - p_star[0];
            const Real q1 = p[1] - p_star[1];
            const Real quad = n_obs * (d * q0 * q0 - 2.0 * b * q0 * q1 + a * q1 * q1) / det;
            const bool direct = std::sqrt(std::max(Real(0), quad)) <= threshold;
            agreement += (member == direct) ? 1 : 0;
            members += member ? 1 : 0;
        }
        CHECK(agreement == 4000);
        // chi^2_2 coverage at the squared threshold, within a loose MC band
        const Real expected = 1.0 - std::exp(-0.5 * threshold * threshold);
        CHECK(std::abs(static_cast<Real>(members) / 4000.0 - expected) < 0.05);
    }
    SUBCASE("singular covariance is rejected") {
        const Vec p_star = {0.5, 0.3, 0.2};
        const Vec singular = {0.0, 0.0, 0.0, 0.0};
        CHECK_THROWS(var_ellipsoid_membership(p_star, p_star, singular, 0.2, 10.0));
    }
}
