#include "varmdp/var_solver.hpp"

#include "test_helpers.hpp"
#include "varmdp/analysis.hpp"
#include "varmdp/mdp_core.hpp"

#include <doctest.h>

#include <cmath>

using namespace varmdp;
using namespace varmdp::testing;

TEST_CASE("empirical_var") {
    SUBCASE("stated examples") {
        CHECK(empirical_var({1, 2, 3, 4, 5}, 0.2) == 2.0);
        CHECK(empirical_var({9, -3, 7}, 1e-12) == -3.0); // alpha -> 0+ gives the minimum
        CHECK(empirical_var({7, 7, 7}, 0.3) == 7.0);
        // alpha M = 3 exactly: the 4th smallest, even though 0.3 * 10 rounds
        // below 3 in floating point
        CHECK(empirical_var({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.3) == 4.0);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(empirical_var({}, 0.2), InvalidInput);
        CHECK_THROWS_AS(empirical_var({1.0, std::nan("")}, 0.2), InvalidInput);
        CHECK_THROWS_AS(empirical_var({1.0}, 0.0), InvalidInput);
        CHECK_THROWS_AS(empirical_var({1.0}, 1.0), InvalidInput);
    }
    SUBCASE("matches the sup-definition enumeration oracle") {
        RngStream rng(61);
        for (int trial = 0; trial < 400; ++trial) {
            const int m = 1 + static_cast<int>(rng.uniform_index(120));
            Vec xs(m);
            for (Real& x : xs) {
                // coarse grid so duplicates are common
                x = std::floor(20.0 * rng.uniform()) / 4.0;
            }
            const Real alpha = 0.999 * rng.uniform() + 0.0005;
            CHECK(empirical_var(xs, alpha) == var_enumeration_oracle(xs, alpha));
        }
    }
}

TEST_CASE("var_bellman_update_empirical") {
    SUBCASE("a single model reduces to the classical Bellman optimality update") {
        RngStream rng(62);
        TabularMdp mdp = random_mdp(rng, 4, 3, 0.9);
        ModelEnsemble ensemble;
        ensemble.models = {random_model(rng, 4, 3)};
        Vec v(4);
        for (Real& x : v) { x = 4.0 * rng.uniform() - 2.0; }
        const auto [update, policy] = var_bellman_update_empirical(mdp, ensemble, v, 0.3);
        for (int s = 0; s < 4; ++s) {
            Real best = -1e18;
            int best_a = 0;
            for (int a = 0; a < 3; ++a) {
                const auto p = ensemble.models[0].row(s, a);
                const Vec w = one_step_returns(mdp, v, s, a);
                Real acc = 0.0;
                for (int i = 0; i < 4; ++i) { acc += p[i] * w[i]; }
                if (acc > best) {
                    best = acc;
                    best_a = a;
                }
            }
            CHECK(update[s] == doctest::Approx(best).epsilon(1e-12));
            CHECK(policy[s] == best_a);
        }
    }
    SUBCASE("constant value functions shift the immediate-reward quantile") {
        RngStream rng(63);
        TabularMdp mdp = random_mdp(rng, 3, 2, 0.8);
        const DirichletPosterior post = random_posterior(rng, 3, 2, 3.0);
        const ModelEnsemble ensemble = sample_models(post, 30, 5);
        const Real c = 1.7;
        const Real alpha = 0.15;
        const auto [update, policy] =
            var_bellman_update_empirical(mdp, ensemble, Vec(3, c), alpha);
        for (int s = 0; s < 3; ++s) {
            Real best = -1e18;
            for (int a = 0; a < 2; ++a) {
                Vec immediate(ensemble.size());
                for (int m = 0; m < ensemble.size(); ++m) {
                    const auto p = ensemble.models[m].row(s, a);
                    const auto r = mdp.reward_row(s, a);
                    Real acc = 0.0;
                    for (int i = 0; i < 3; ++i) { acc += p[i] * r[i]; }
                    immediate[m] = acc;
                }
                best = std::max(best, empirical_var(immediate, alpha) + 0.8 * c);
            }
            CHECK(update[s] == doctest::Approx(best).epsilon(1e-9));
        }
    }
    SUBCASE("the one-step example reproduces the paper-scale quantile") {
        const TabularMdp mdp = example_mdp(0.95);
        const ModelEnsemble ensemble = example_ensemble(100000, 7);
        const auto [update, policy] =
            var_bellman_update_empirical(mdp, ensemble, Vec(4, 0.0), 0.2);
        CHECK(std::abs(update[0] - 0.17) <= 0.02);
        // and against the closed-form Beta quantile
        CHECK(std::abs(update[0] - example_exact_var(0.2)) <= 2e-3);
        CHECK(update[1] == 0.0);
    }
}

TEST_CASE("var_bellman_update_gaussian and the sub-Gaussian bound") {
    SUBCASE("zero covariance reduces to the mean-model update") {
        RngStream rng(64);
        TabularMdp mdp = random_mdp(rng, 3, 2, 0.85);
        PosteriorMoments mom;
        mom.num_states = 3;
        mom.num_actions = 2;
        const TransitionModel mean_model = random_model(rng, 3, 2);
        mom.mean = mean_model.probs;
        mom.cov.assign(static_cast<size_t>(3) * 2 * 9, 0.0);
        Vec v = {0.4, -0.2, 0.9};
        const auto [update, policy] = var_bellman_update_gaussian(mdp, mom, v, 0.05);
        for (int s = 0; s < 3; ++s) {
            Real best = -1e18;
            for (int a = 0; a < 2; ++a) {
                const auto p = mean_model.row(s, a);
                const Vec w = one_step_returns(mdp, v, s, a);
                Real acc = 0.0;
                for (int i = 0; i < 3; ++i) { acc += p[i] * w[i]; }
                best = std::max(best, acc);
            }
            CHECK(update[s] == doctest::Approx(best).epsilon(1e-12));
        }
        // alpha = 1/2 zeroes the quantile penalty even with covariance
        RngStream rng2(65);
        const PosteriorMoments real_mom = moments(random_posterior(rng2, 3, 2, 4.0));
        const auto mean_update = var_bellman_update_gaussian(mdp, real_mom, v, 0.5).first;
        PosteriorMoments no_cov = real_mom;
        no_cov.cov.assign(no_cov.cov.size(), 0.0);
        const auto plain = var_bellman_update_gaussian(mdp, no_cov, v, 0.1).first;
        CHECK(sup_norm_diff(mean_update, plain) <= 1e-12);
    }
    SUBCASE("crafted quadratic form hits the closed-form quantile values") {
        // p_bar^T w = 1 and w^T Sigma w = 0.04 at v = 0.
        PosteriorMoments mom;
        mom.num_states = 2;
        mom.num_actions = 1;
        mom.mean = {0.5, 0.5};
        mom.cov = {0.01, -0.01, -0.01, 0.01}; // w = (2,0): w^T S w = 0.04
        TabularMdp mdp(2, 1, {2.0, 0.0, 2.0, 0.0}, 0.9, {1.0, 0.0});
        const Vec w = one_step_returns(mdp, Vec(2, 0.0), 0, 0);
        CHECK(w[0] == 2.0);
        CHECK(w[1] == 0.0);

        const auto [update, policy] = var_bellman_update_gaussian(mdp, mom, Vec(2, 0.0), 0.05);
        CHECK(update[0] == doctest::Approx(1.0 - 1.644854 * 0.2).epsilon(1e-5));

        const Real sub = subgaussian_lower_bound(mom, w, 0, 0, 0.05);
        CHECK(sub == doctest::Approx(1.0 - std::sqrt(2.0 * std::log(20.0)) * 0.2)
                         .epsilon(1e-9));
        CHECK(sub <= update[0]);

        // alpha = 1 kills the sub-Gaussian penalty entirely (test-only input)
        CHECK(subgaussian_lower_bound(mom, w, 0, 0, 1.0) == doctest::Approx(1.0));
        // zero covariance keeps only the location term
        mom.cov = {0.0, 0.0, 0.0, 0.0};
        CHECK(subgaussian_lower_bound(mom, w, 0, 0, 0.05) == doctest::Approx(1.0));
    }
    SUBCASE("sub-Gaussian penalty dominates the Gaussian one for alpha below one half") {
        RngStream rng(66);
        for (int trial = 0; trial < 20; ++trial) {
            TabularMdp mdp = random_mdp(rng, 4, 2, 0.9);
            const PosteriorMoments mom = moments(random_posterior(rng, 4, 2, 6.0));
            const Real alpha = 0.02 + 0.45 * rng.uniform();
            Vec v(4);
            for (Real& x : v) { x = 2.0 * rng.uniform(); }
            for (int s = 0; s < 4; ++s) {
                for (int a = 0; a < 2; ++a) {
                    const Vec w = one_step_returns(mdp, v, s, a);
                    const auto mean = mom.mean_row(s, a);
                    Real loc = 0.0;
                    for (int i = 0; i < 4; ++i) { loc += mean[i] * w[i]; }
                    const Real gauss =
                        loc - std_normal_quantile(1.0 - alpha) *
                                  std::sqrt(mom.quadratic_form(s, a, w));
                    CHECK(subgaussian_lower_bound(mom, w, s, a, alpha) <= gauss + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("alpha_for_optimality") {
    CHECK(alpha_for_optimality(0.05, 5) == doctest::Approx(0.01));
    CHECK(alpha_for_optimality(0.3, 1) == doctest::Approx(0.3));
    CHECK(alpha_for_optimality(0.2, 4) == doctest::Approx(0.05));
    CHECK_THROWS_AS(alpha_for_optimality(0.6, 4), InvalidInput);
    CHECK_THROWS_AS(alpha_for_optimality(0.1, 0), InvalidInput);
}

TEST_CASE("operator properties on random instances") {
    RngStream rng(67);
    for (int trial = 0; trial < 15; ++trial) {
        const int S = 3 + static_cast<int>(rng.uniform_index(4));
        const int A = 2 + static_cast<int>(rng.uniform_index(2));
        const Real gamma = 0.7 + 0.25 * rng.uniform();
        TabularMdp mdp = random_mdp(rng, S, A, gamma);
        // counts-like posterior keeps the Gaussian operator in its monotone
        // regime at alpha = 0.2
        const DirichletPosterior post = random_posterior(rng, S, A, 8.0);
        const ModelEnsemble ensemble = sample_models(post, 40, trial);
        const PosteriorMoments mom = moments(post);
        const Real alpha = 0.2;

        Vec v(S);
        Vec u(S);
        for (int i = 0; i < S; ++i) {
            v[i] = 6.0 * rng.uniform() - 3.0;
            u[i] = 6.0 * rng.uniform() - 3.0;
        }

        // contraction, both modes
        {
            const Real bound = gamma * sup_norm_diff(v, u) + 1e-12;
            const auto tv = var_bellman_update_empirical(mdp, ensemble, v, alpha).first;
            const auto tu = var_bellman_update_empirical(mdp, ensemble, u, alpha).first;
            CHECK(sup_norm_diff(tv, tu) <= bound);
            const auto gv = var_bellman_update_gaussian(mdp, mom, v, alpha).first;
            const auto gu = var_bellman_update_gaussian(mdp, mom, u, alpha).first;
            CHECK(sup_norm_diff(gv, gu) <= bound);
        }

        // exact monotonicity of the empirical operator
        {
            Vec hi(v);
            for (int i = 0; i < S; ++i) { hi[i] += 2.0 * rng.uniform(); }
            const auto tv = var_bellman_update_empirical(mdp, ensemble, v, alpha).first;
            const auto th = var_bellman_update_empirical(mdp, ensemble, hi, alpha).first;
            for (int s = 0; s < S; ++s) { CHECK(th[s] >= tv[s]); }
        }

        // translation subvariance up to roundoff, both modes
        {
            const Real c = 4.0 * rng.uniform() - 2.0;
            Vec shifted(v);
            for (Real& x : shifted) { x += c; }
            const auto tv = var_bellman_update_empirical(mdp, ensemble, v, alpha).first;
            const auto ts = var_bellman_update_empirical(mdp, ensemble, shifted, alpha).first;
            for (int s = 0; s < S; ++s) {
                CHECK(std::abs(ts[s] - tv[s] - gamma * c) <= 1e-12);
            }
            const auto gv = var_bellman_update_gaussian(mdp, mom, v, alpha).first;
            const auto gs = var_bellman_update_gaussian(mdp, mom, shifted, alpha).first;
            for (int s = 0; s < S; ++s) {
                CHECK(std::abs(gs[s] - gv[s] - gamma * c) <= 1e-12);
            }
        }
    }
}

TEST_CASE("var_value_iteration") {
    SUBCASE("zero rewards converge immediately") {
        RngStream rng(68);
        TabularMdp mdp(3, 2, Vec(18, 0.0), 0.9, {1.0, 0.0, 0.0});
        const ModelEnsemble ensemble = sample_models(random_posterior(rng, 3, 2, 2.0), 10, 3);
        VarConfig cfg;
        cfg.alpha = 0.1;
        const VarSolution sol = var_value_iteration(mdp, ensemble, cfg);
        CHECK(sol.converged);
        CHECK(sol.iterations == 1);
        for (Real x : sol.value) { CHECK(x == 0.0); }
    }
    SUBCASE("single-model ensembles match classical value iteration") {
        RngStream rng(69);
        TabularMdp mdp = random_mdp(rng, 5, 3, 0.9);
        ModelEnsemble ensemble;
        ensemble.models = {random_model(rng, 5, 3)};
        VarConfig cfg;
        cfg.alpha = 0.25;
        cfg.epsilon = 1e-9;
        const VarSolution robust = var_value_iteration(mdp, ensemble, cfg);
        const ClassicalSolution classical = value_iteration(mdp, ensemble.models[0], 1e-9);
        CHECK(robust.converged);
        CHECK(sup_norm_diff(robust.value, classical.value) <= 2e-9);
        CHECK(robust.policy == classical.policy);
    }
    SUBCASE("termination matches the theoretical iteration count") {
        RngStream rng(70);
        Vec rewards(static_cast<size_t>(4) * 2 * 4);
        for (Real& r : rewards) { r = 2.0 * rng.uniform() - 1.0; } // r_max <= 1
        TabularMdp mdp(4, 2, std::move(rewards), 0.9, {0.25, 0.25, 0.25, 0.25});
        const ModelEnsemble ensemble = sample_models(random_posterior(rng, 4, 2, 3.0), 25, 1);
        VarConfig cfg;
        cfg.alpha = 0.1;
        cfg.epsilon = 1e-3;
        const VarSolution sol = var_value_iteration(mdp, ensemble, cfg);
        CHECK(sol.converged);
        CHECK(sol.iterations <= 88); // ceil(log_{10/9} 1e4)
    }
    SUBCASE("gamma = 0 performs one exact update") {
        RngStream rng(71);
        TabularMdp mdp = random_mdp(rng, 3, 2, 0.0);
        const ModelEnsemble ensemble = sample_models(random_posterior(rng, 3, 2, 2.0), 15, 2);
        const auto direct = var_bellman_update_empirical(mdp, ensemble, Vec(3, 0.0), 0.1);
        VarConfig cfg;
        cfg.alpha = 0.1;
        const VarSolution sol = var_value_iteration(mdp, ensemble, cfg);
        CHECK(sol.converged);
        CHECK(sol.iterations == 1);
        CHECK(sup_norm_diff(sol.value, direct.first) == 0.0);
    }
    SUBCASE("iteration cap surfaces as a non-converged flag") {
        RngStream rng(72);
        TabularMdp mdp = random_mdp(rng, 4, 2, 0.95);
        const ModelEnsemble ensemble = sample_models(random_posterior(rng, 4, 2, 2.0), 10, 4);
        VarConfig cfg;
        cfg.alpha = 0.1;
        cfg.epsilon = 1e-10;
        cfg.max_iterations = 3;
        const VarSolution sol = var_value_iteration(mdp, ensemble, cfg);
        CHECK_FALSE(sol.converged);
        CHECK(sol.iterations == 3);
    }
    SUBCASE("fixed point is unique: both initializations land within 2 eps") {
        RngStream rng(73);
        TabularMdp mdp = random_mdp(rng, 4, 3, 0.9);
        const ModelEnsemble ensemble = sample_models(random_posterior(rng, 4, 3, 4.0), 30, 8);
        VarConfig cfg;
        cfg.alpha = 0.15;
        cfg.epsilon = 1e-6;
        const VarSolution from_zero = var_value_iteration(mdp, ensemble, cfg);
        const ValueFunction high(4, mdp.reward_scale() / (1.0 - 0.9));
        const VarSolution from_high = var_value_iteration(mdp, ensemble, cfg, &high);
        CHECK(from_zero.converged);
        CHECK(from_high.converged);
        CHECK(sup_norm_diff(from_zero.value, from_high.value) <= 2.0 * cfg.epsilon);
    }
    SUBCASE("mode and source must agree") {
        RngStream rng(74);
        TabularMdp mdp = random_mdp(rng, 3, 2, 0.9);
        const DirichletPosterior post = random_posterior(rng, 3, 2, 3.0);
        const ModelEnsemble ensemble = sample_models(post, 5, 1);
        VarConfig cfg;
        cfg.mode = VarMode::gaussian;
        CHECK_THROWS_AS(var_value_iteration(mdp, ensemble, cfg), InvalidInput);
        cfg.mode = VarMode::empirical;
        CHECK_THROWS_AS(var_value_iteration(mdp, moments(post), cfg), InvalidInput);
    }
    SUBCASE("gaussian and subgaussian-bound modes solve through moments") {
        RngStream rng(75);
        TabularMdp mdp = random_mdp(rng, 4, 2, 0.85);
        const PosteriorMoments mom = moments(random_posterior(rng, 4, 2, 10.0));
        VarConfig cfg;
        cfg.alpha = 0.2;
        cfg.epsilon = 1e-7;
        cfg.mode = VarMode::gaussian;
        const VarSolution gauss = var_value_iteration(mdp, mom, cfg);
        cfg.mode = VarMode::subgaussian_bound;
        const VarSolution sub = var_value_iteration(mdp, mom, cfg);
        CHECK(gauss.converged);
        CHECK(sub.converged);
        // the bound mode can only be more conservative at the fixed point
        for (int s = 0; s < 4; ++s) { CHECK(sub.value[s] <= gauss.value[s] + 1e-6); }
    }
}

TEST_CASE("var_policy_evaluation") {
    SUBCASE("single state reduces to the geometric series") {
        TabularMdp mdp(1, 1, {3.0}, 0.8, {1.0});
        ModelEnsemble ensemble;
        ensemble.models.assign(5, TransitionModel(1, 1));
        for (auto& model : ensemble.models) { model.mutable_row(0, 0)[0] = 1.0; }
        const Vec v = var_policy_evaluation(mdp, ensemble, {0}, 0.2, 1e-8);
        CHECK(v[0] == doctest::Approx(3.0 / 0.2).epsilon(1e-6));
    }
    SUBCASE("single model reduces to classical policy evaluation") {
        RngStream rng(76);
        TabularMdp mdp = random_mdp(rng, 4, 2, 0.9);
        ModelEnsemble ensemble;
        ensemble.models = {random_model(rng, 4, 2)};
        const DeterministicPolicy pi = {1, 0, 1, 0};
        const Vec approx = var_policy_evaluation(mdp, ensemble, pi, 0.3, 1e-8);
        const Vec exact = policy_value(mdp, ensemble.models[0], pi, 1e-12);
        CHECK(sup_norm_diff(approx, exact) <= 1e-7);
    }
    SUBCASE("greedy policy evaluation stays within the propagation bound") {
        RngStream rng(77);
        TabularMdp mdp = random_mdp(rng, 5, 3, 0.9);
        const ModelEnsemble ensemble = sample_models(random_posterior(rng, 5, 3, 5.0), 40, 6);
        VarConfig cfg;
        cfg.alpha = 0.1;
        cfg.epsilon = 1e-5;
        const VarSolution sol = var_value_iteration(mdp, ensemble, cfg);
        REQUIRE(sol.converged);
        const Vec pe = var_policy_evaluation(mdp, ensemble, sol.policy, cfg.alpha, cfg.epsilon);
        // ||u_k - u_{pi_k}|| <= eps + 2 eps gamma/(1-gamma), plus eps solver
        // slack on the evaluation side
        const Real bound = 2.0 * cfg.epsilon * 0.9 / 0.1 + 2.0 * cfg.epsilon;
        CHECK(sup_norm_diff(sol.value, pe) <= bound);
    }
}
