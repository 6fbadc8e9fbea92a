// Experiment protocol: sample a dataset, build the posterior, draw train and
// test model ensembles, solve with every configured method on random 80%
// train subsets, and score each policy by the delta-percentile of its exact
// expected returns across the test models.
#pragma once

#include "varmdp/domains.hpp"
#include "varmdp/posterior.hpp"
#include "varmdp/types.hpp"
#include "varmdp/var_solver.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace varmdp {

enum class Method {
    var,             // empirical VaR value iteration, alpha = delta/S
    varn,            // Gaussian VaR VI on empirical ensemble moments, alpha = delta/S
    bcr_l1,          // unweighted l1 credible ball, alpha = delta/(S A)
    bcr_linf,        // unweighted linf credible ball, alpha = delta/(S A)
    wbcr_l1,         // span-optimized weighted l1 ball, alpha = delta/(S A)
    wbcr_linf,       // span-optimized weighted linf ball, alpha = delta/(S A)
    soft_robust,     // mean-model value iteration
    naive_hoeffding, // l1 concentration ball from visit counts
    opt_hoeffding,   // same budget with value-spread weights scaled to max 1
};

Method parse_method(const std::string& name);
std::string method_name(Method method);

struct ExperimentConfig {
    DomainSpec domain;
    Real gamma = 0.95; // overrides the domain default when > 0
    std::vector<Real> deltas = {0.05, 0.15, 0.30};
    Real epsilon = 1e-4;
    int train_models = 80;     // M: posterior models per train dataset
    int test_models = 700;     // K: held-out models
    int train_datasets = 10;   // L: random subsets
    Real train_fraction = 0.8; // subset share of the M train models
    std::vector<std::string> methods = {"var"};
    uint64_t seed = 0;
    Real prior_pseudocount = 1.0;
    long n_tuples = 3000;
    int episode_len = 50;
    int threads = 0; // 0 = hardware concurrency

    void validate() const;
};

struct MethodResult {
    std::string method;
    Real delta = 0.0;
    Vec robust_returns; // one per train dataset (length L)
    Real mean = 0.0;
    Real ci_halfwidth = 0.0;
    std::vector<DeterministicPolicy> policies;
    Real walltime_s = 0.0;
};

/// delta-percentile (empirical VaR) of the exact expected returns of the
/// policy across the test models.
Real robust_performance(const TabularMdp& mdp, const DeterministicPolicy& policy,
                        const ModelEnsemble& test_models, Real delta);

/// Solves with one method under its confidence convention (delta/S for the
/// VaR methods, delta/(S A) for the ambiguity-set baselines). counts are the
/// per-(s,a) dataset visit counts, needed by the Hoeffding sets only.
VarSolution solve_with_method(const TabularMdp& mdp, Method method, const ModelEnsemble& train,
                              const std::vector<long>& counts, Real delta, Real eps);

/// mean and 1.96 * SE over the runs; a single value yields halfwidth 0.
std::pair<Real, Real> confidence_interval(const Vec& values);

/// Runs the full protocol. Fully deterministic given the config; result rows
/// come back ordered by (method, delta) exactly as configured.
std::vector<MethodResult> run_experiment(const ExperimentConfig& cfg);

/// Writers for the result schema: a per-run CSV
/// (method,delta,run,robust_return), a summary CSV
/// (method,delta,mean,ci_halfwidth,walltime_s), and a manifest carrying the
/// effective config, seeds, and build version.
void write_results_csv(const std::vector<MethodResult>& results,
                       const std::filesystem::path& path);
void write_summary_csv(const std::vector<MethodResult>& results,
                       const std::filesystem::path& path);
void write_manifest(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// JSON round-trip for config files; unknown keys are rejected.
ExperimentConfig experiment_config_from_json_file(const std::filesystem::path& path);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

} // namespace varmdp
