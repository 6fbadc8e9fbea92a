#include "varmdp/eval_harness.hpp"

#include "varmdp/io.hpp"
#include "varmdp/mdp_core.hpp"
#include "varmdp/robust_baselines.hpp"
#include "varmdp/var_solver.hpp"
#include "varmdp/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace varmdp {

using nlohmann::json;

Method parse_method(const std::string& name) {
    if (name == "var") { return Method::var; }
    if (name == "varn") { return Method::varn; }
    if (name == "bcr-l1") { return Method::bcr_l1; }
    if (name == "bcr-linf") { return Method::bcr_linf; }
    if (name == "wbcr-l1") { return Method::wbcr_l1; }
    if (name == "wbcr-linf") { return Method::wbcr_linf; }
    if (name == "soft-robust") { return Method::soft_robust; }
    if (name == "naive-hoeffding") { return Method::naive_hoeffding; }
    if (name == "opt-hoeffding") { return Method::opt_hoeffding; }
    throw InvalidInput("unknown method '" + name + "'");
}

std::string method_name(Method method) {
    switch (method) {
    case Method::var: return "var";
    case Method::varn: return "varn";
    case Method::bcr_l1: return "bcr-l1";
    case Method::bcr_linf: return "bcr-linf";
    case Method::wbcr_l1: return "wbcr-l1";
    case Method::wbcr_linf: return "wbcr-linf";
    case Method::soft_robust: return "soft-robust";
    case Method::naive_hoeffding: return "naive-hoeffding";
    case Method::opt_hoeffding: return "opt-hoeffding";
    }
    throw InvalidInput("unknown method enum");
}

void ExperimentConfig::validate() const {
    if (domain.name.empty()) { throw InvalidInput("config: domain.name is required"); }
    if (gamma > 0.0 && !(gamma < 1.0)) { throw InvalidInput("config: gamma must lie in (0, 1)"); }
    if (deltas.empty()) { throw InvalidInput("config: deltas must be nonempty"); }
    for (Real d : deltas) {
        if (!(d > 0.0 && d < 0.5)) { throw InvalidInput("config: deltas must lie in (0, 1/2)"); }
    }
    if (!(epsilon > 0.0)) { throw InvalidInput("config: epsilon must be > 0"); }
    if (train_models < 1 || test_models < 1 || train_datasets < 1) {
        throw InvalidInput("config: train_models, test_models, train_datasets must be >= 1");
    }
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
        throw InvalidInput("config: train_fraction must lie in (0, 1]");
    }
    if (methods.empty()) { throw InvalidInput("config: methods must be nonempty"); }
    for (const auto& m : methods) { parse_method(m); }
    if (!(prior_pseudocount > 0.0)) { throw InvalidInput("config: prior_pseudocount must be > 0"); }
    if (n_tuples < 1) { throw InvalidInput("config: n_tuples must be >= 1"); }
    if (episode_len < 1) { throw InvalidInput("config: episode_len must be >= 1"); }
    if (threads < 0) { throw InvalidInput("config: threads must be >= 0"); }
}

Real robust_performance(const TabularMdp& mdp, const DeterministicPolicy& policy,
                        const ModelEnsemble& test_models, Real delta) {
    if (test_models.models.empty()) { throw InvalidInput("robust_performance: empty ensemble"); }
    Vec returns(test_models.size());
    for (int k = 0; k < test_models.size(); ++k) {
        returns[k] = expected_return(mdp, test_models.models[k], policy);
    }
    return empirical_var_inplace(returns, delta);
}

std::pair<Real, Real> confidence_interval(const Vec& values) {
    if (values.empty()) { throw InvalidInput("confidence_interval: empty sample"); }
    const Real n = static_cast<Real>(values.size());
    const Real mean = std::accumulate(values.begin(), values.end(), Real(0)) / n;
    if (values.size() == 1) { return {mean, 0.0}; }
    Real ss = 0.0;
    for (Real v : values) { ss += (v - mean) * (v - mean); }
    const Real se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return {mean, 1.96 * se};
}

namespace {

// Scales each weight row so its maximum is 1; with max <= 1 the weighted l1
// ball contains the unweighted one and inherits its coverage guarantee.
void scale_rows_to_unit_max(Vec& weights, int S, int A) {
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            Real* row = weights.data() + (static_cast<size_t>(s) * A + a) * S;
            Real top = 0.0;
            for (int i = 0; i < S; ++i) { top = std::max(top, row[i]); }
            for (int i = 0; i < S; ++i) { row[i] /= top; }
        }
    }
}

} // namespace

VarSolution solve_with_method(const TabularMdp& mdp, Method method, const ModelEnsemble& train,
                              const std::vector<long>& counts, Real delta, Real eps) {
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    const Real alpha_sa = delta / (static_cast<Real>(S) * A);
    switch (method) {
    case Method::var: {
        VarConfig cfg;
        cfg.alpha = alpha_for_optimality(delta, S);
        cfg.epsilon = eps;
        cfg.mode = VarMode::empirical;
        return var_value_iteration(mdp, train, cfg);
    }
    case Method::varn: {
        VarConfig cfg;
        cfg.alpha = alpha_for_optimality(delta, S);
        cfg.epsilon = eps;
        cfg.mode = VarMode::gaussian;
        return var_value_iteration(mdp, moments(train), cfg);
    }
    case Method::soft_robust: return soft_robust_solve(mdp, moments(train), eps);
    case Method::bcr_l1:
    case Method::bcr_linf: {
        const Norm q = (method == Method::bcr_l1) ? Norm::l1 : Norm::linf;
        AmbiguitySetSpec spec = AmbiguitySetSpec::around(moments(train), q);
        spec.radii = fit_bcr_radius(train, spec.centers, spec.weights, q, alpha_sa);
        return robust_value_iteration(mdp, spec, eps);
    }
    case Method::wbcr_l1:
        return wbcr_solve(mdp, train, Norm::l1, alpha_sa, eps);
    case Method::wbcr_linf:
        return wbcr_solve(mdp, train, Norm::linf, alpha_sa, eps);
    case Method::naive_hoeffding: {
        AmbiguitySetSpec spec = AmbiguitySetSpec::around(moments(train), Norm::l1);
        spec.radii = hoeffding_radius(counts, S, A, delta, HoeffdingWeights::naive);
        return robust_value_iteration(mdp, spec, eps);
    }
    case Method::opt_hoeffding: {
        AmbiguitySetSpec spec = AmbiguitySetSpec::around(moments(train), Norm::l1);
        spec.radii = hoeffding_radius(counts, S, A, delta, HoeffdingWeights::optimized);
        RobustSolution sol = robust_value_iteration(mdp, spec, eps);
        for (int round = 1; round < 10; ++round) {
            spec.weights = optimize_weights(mdp, train, sol.value, Norm::l1);
            scale_rows_to_unit_max(spec.weights, S, A);
            RobustSolution next = robust_value_iteration(mdp, spec, eps);
            const Real change = sup_norm_diff(next.value, sol.value);
            sol = std::move(next);
            if (change <= eps) { break; }
        }
        return sol;
    }
    }
    throw InvalidInput("unknown method enum");
}

namespace {

void parallel_for(size_t task_count, int threads, const std::function<void(size_t)>& fn) {
    int n = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    n = std::max(1, std::min<int>(n, static_cast<int>(task_count)));
    if (n == 1) {
        for (size_t i = 0; i < task_count; ++i) { fn(i); }
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= task_count) { return; }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> guard(error_mu);
                    if (!error) { error = std::current_exception(); }
                    return;
                }
            }
        });
    }
    for (auto& th : pool) { th.join(); }
    if (error) { std::rethrow_exception(error); }
}

} // namespace

std::vector<MethodResult> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    GeneratedDomain domain = make_domain(cfg.domain);
    TabularMdp mdp = cfg.gamma > 0.0
                         ? TabularMdp(domain.mdp.num_states, domain.mdp.num_actions,
                                      domain.mdp.rewards, cfg.gamma, domain.mdp.initial_dist)
                         : domain.mdp;
    const int S = mdp.num_states;
    const int A = mdp.num_actions;

    const uint64_t data_seed = mix_seed(cfg.seed, 1);
    const uint64_t train_seed = mix_seed(cfg.seed, 2);
    const uint64_t test_seed = mix_seed(cfg.seed, 3);

    const BatchDataset dataset =
        sample_dataset(mdp, domain.true_model, cfg.n_tuples, data_seed, cfg.episode_len);
    const std::vector<long> counts = visit_counts(dataset, S, A);
    const DirichletPosterior posterior =
        counts_from_dataset(dataset, S, A, cfg.prior_pseudocount);

    const ModelEnsemble train_pool = sample_models(posterior, cfg.train_models, train_seed);
    const ModelEnsemble test_pool = sample_models(posterior, cfg.test_models, test_seed);

    // L fixed train subsets (shared across deltas and methods).
    const int subset_size = std::max<int>(
        1, static_cast<int>(std::llround(cfg.train_fraction * cfg.train_models)));
    std::vector<ModelEnsemble> subsets(cfg.train_datasets);
    for (int run = 0; run < cfg.train_datasets; ++run) {
        RngStream rng = RngStream(cfg.seed).child({4, static_cast<uint64_t>(run)});
        std::vector<int> order(cfg.train_models);
        std::iota(order.begin(), order.end(), 0);
        for (int i = 0; i < subset_size; ++i) { // partial Fisher-Yates
            const int j = i + static_cast<int>(rng.uniform_index(cfg.train_models - i));
            std::swap(order[i], order[j]);
        }
        subsets[run].seed = train_pool.seed;
        subsets[run].models.reserve(subset_size);
        for (int i = 0; i < subset_size; ++i) {
            subsets[run].models.push_back(train_pool.models[order[i]]);
        }
    }

    const size_t n_methods = cfg.methods.size();
    const size_t n_deltas = cfg.deltas.size();
    const size_t n_runs = static_cast<size_t>(cfg.train_datasets);

    struct Cell {
        Real robust_return = 0.0;
        DeterministicPolicy policy;
        Real seconds = 0.0;
    };
    std::vector<Cell> cells(n_methods * n_deltas * n_runs);

    parallel_for(n_deltas * n_runs, cfg.threads, [&](size_t task) {
        const size_t d = task / n_runs;
        const size_t run = task % n_runs;
        const Real delta = cfg.deltas[d];
        for (size_t m = 0; m < n_methods; ++m) {
            const auto started = std::chrono::steady_clock::now();
            Cell& cell = cells[(m * n_deltas + d) * n_runs + run];
            cell.policy = solve_with_method(mdp, parse_method(cfg.methods[m]), subsets[run],
                                            counts, delta, cfg.epsilon).policy;
            cell.robust_return = robust_performance(mdp, cell.policy, test_pool, delta);
            cell.seconds = std::chrono::duration<Real>(std::chrono::steady_clock::now() -
                                                       started).count();
        }
    });

    std::vector<MethodResult> results;
    results.reserve(n_methods * n_deltas);
    for (size_t m = 0; m < n_methods; ++m) {
        for (size_t d = 0; d < n_deltas; ++d) {
            MethodResult r;
            r.method = cfg.methods[m];
            r.delta = cfg.deltas[d];
            r.robust_returns.resize(n_runs);
            for (size_t run = 0; run < n_runs; ++run) {
                const Cell& cell = cells[(m * n_deltas + d) * n_runs + run];
                r.robust_returns[run] = cell.robust_return;
                r.policies.push_back(cell.policy);
                r.walltime_s += cell.seconds;
            }
            std::tie(r.mean, r.ci_halfwidth) = confidence_interval(r.robust_returns);
            results.push_back(std::move(r));
        }
    }
    return results;
}

void write_results_csv(const std::vector<MethodResult>& results,
                       const std::filesystem::path& path) {
    std::ostringstream out;
    out << "method,delta,run,robust_return\n";
    for (const auto& r : results) {
        for (size_t run = 0; run < r.robust_returns.size(); ++run) {
            out << r.method << ',' << format_double(r.delta) << ',' << run << ','
                << format_double(r.robust_returns[run]) << '\n';
        }
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) { throw std::runtime_error("cannot write " + path.string()); }
    file << out.str();
}

void write_summary_csv(const std::vector<MethodResult>& results,
                       const std::filesystem::path& path) {
    std::ostringstream out;
    out << "method,delta,mean,ci_halfwidth,walltime_s\n";
    for (const auto& r : results) {
        out << r.method << ',' << format_double(r.delta) << ',' << format_double(r.mean) << ','
            << format_double(r.ci_halfwidth) << ',' << format_double(r.walltime_s) << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) { throw std::runtime_error("cannot write " + path.string()); }
    file << out.str();
}

namespace {

json config_to_json_value(const ExperimentConfig& cfg) {
    json doc;
    doc["domain"]["name"] = cfg.domain.name;
    doc["domain"]["parameters"] = cfg.domain.parameters;
    doc["domain"]["seed"] = cfg.domain.seed;
    doc["gamma"] = cfg.gamma;
    doc["deltas"] = cfg.deltas;
    doc["epsilon"] = cfg.epsilon;
    doc["train_models"] = cfg.train_models;
    doc["test_models"] = cfg.test_models;
    doc["train_datasets"] = cfg.train_datasets;
    doc["train_fraction"] = cfg.train_fraction;
    doc["methods"] = cfg.methods;
    doc["seed"] = cfg.seed;
    doc["prior_pseudocount"] = cfg.prior_pseudocount;
    doc["n_tuples"] = cfg.n_tuples;
    doc["episode_len"] = cfg.episode_len;
    doc["threads"] = cfg.threads;
    return doc;
}

} // namespace

void write_manifest(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    json doc;
    doc["git_describe"] = kGitDescribe;
    doc["config"] = config_to_json_value(cfg);
    doc["derived_seeds"]["data"] = mix_seed(cfg.seed, 1);
    doc["derived_seeds"]["train_ensemble"] = mix_seed(cfg.seed, 2);
    doc["derived_seeds"]["test_ensemble"] = mix_seed(cfg.seed, 3);
    json conventions;
    for (const auto& name : cfg.methods) {
        const Method m = parse_method(name);
        conventions[name] = (m == Method::var || m == Method::varn) ? "alpha = delta/S"
                                                                    : "alpha = delta/(S*A)";
    }
    doc["alpha_convention"] = conventions;
    std::ofstream file(path, std::ios::binary);
    if (!file) { throw std::runtime_error("cannot write " + path.string()); }
    file << doc.dump(1) << '\n';
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
    return config_to_json_value(cfg).dump(1);
}

ExperimentConfig experiment_config_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) { throw InvalidInput("cannot open config " + path.string()); }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw InvalidInput("config " + path.string() + ": " + e.what());
    }

    static const std::vector<std::string> known = {
        "domain", "gamma", "deltas", "epsilon", "train_models", "test_models",
        "train_datasets", "train_fraction", "methods", "seed", "prior_pseudocount",
        "n_tuples", "episode_len", "threads"};
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InvalidInput("config: unknown key '" + key + "'");
        }
    }

    ExperimentConfig cfg;
    try {
        const json& dom = doc.at("domain");
        for (const auto& [key, value] : dom.items()) {
            (void)value;
            if (key != "name" && key != "parameters" && key != "seed") {
                throw InvalidInput("config: unknown domain key '" + key + "'");
            }
        }
        cfg.domain.name = dom.at("name").get<std::string>();
        if (dom.contains("parameters")) {
            cfg.domain.parameters = dom["parameters"].get<std::map<std::string, Real>>();
        }
        if (dom.contains("seed")) { cfg.domain.seed = dom["seed"].get<uint64_t>(); }
        if (doc.contains("gamma")) { cfg.gamma = doc["gamma"].get<Real>(); }
        if (doc.contains("deltas")) { cfg.deltas = doc["deltas"].get<std::vector<Real>>(); }
        if (doc.contains("epsilon")) { cfg.epsilon = doc["epsilon"].get<Real>(); }
        if (doc.contains("train_models")) { cfg.train_models = doc["train_models"].get<int>(); }
        if (doc.contains("test_models")) { cfg.test_models = doc["test_models"].get<int>(); }
        if (doc.contains("train_datasets")) {
            cfg.train_datasets = doc["train_datasets"].get<int>();
        }
        if (doc.contains("train_fraction")) {
            cfg.train_fraction = doc["train_fraction"].get<Real>();
        }
        if (doc.contains("methods")) {
            cfg.methods = doc["methods"].get<std::vector<std::string>>();
        }
        if (doc.contains("seed")) { cfg.seed = doc["seed"].get<uint64_t>(); }
        if (doc.contains("prior_pseudocount")) {
            cfg.prior_pseudocount = doc["prior_pseudocount"].get<Real>();
        }
        if (doc.contains("n_tuples")) { cfg.n_tuples = doc["n_tuples"].get<long>(); }
        if (doc.contains("episode_len")) { cfg.episode_len = doc["episode_len"].get<int>(); }
        if (doc.contains("threads")) { cfg.threads = doc["threads"].get<int>(); }
    } catch (const json::exception& e) {
        throw InvalidInput("config " + path.string() + ": " + e.what());
    }
    cfg.validate();
    return cfg;
}

} // namespace varmdp
