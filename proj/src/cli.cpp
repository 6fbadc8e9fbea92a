#include "varmdp/cli.hpp"

#include "varmdp/analysis.hpp"
#include "varmdp/domains.hpp"
#include "varmdp/eval_harness.hpp"
#include "varmdp/io.hpp"
#include "varmdp/mdp_core.hpp"
#include "varmdp/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace varmdp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --out-dir flag wins, then VARMDP_OUT_DIR, then the current directory.
fs::path resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) { return flag_value; }
    if (const char* env = std::getenv("VARMDP_OUT_DIR"); env && *env) { return env; }
    return ".";
}

void ensure_dir(const fs::path& dir) {
    if (!dir.empty()) { fs::create_directories(dir); }
}

struct GenerateArgs {
    std::string name;
    std::string out_dir;
    std::vector<std::string> params;
    uint64_t seed = 0;
};

int cmd_generate_domain(const GenerateArgs& args) {
    DomainSpec spec;
    spec.name = args.name;
    spec.seed = args.seed;
    for (const auto& kv : args.params) {
        const auto pos = kv.find('=');
        if (pos == std::string::npos) {
            throw InvalidInput("--param expects key=value, got '" + kv + "'");
        }
        spec.parameters[kv.substr(0, pos)] = std::stod(kv.substr(pos + 1));
    }
    const GeneratedDomain domain = make_domain(spec);
    const fs::path dir = resolve_out_dir(args.out_dir);
    ensure_dir(dir);
    save_mdp(domain.mdp, dir / (args.name + "_mdp.json"));
    save_kernel(domain.true_model, dir / (args.name + "_kernel.json"));
    std::cout << "wrote " << (dir / (args.name + "_mdp.json")).string() << " and "
              << (dir / (args.name + "_kernel.json")).string() << "\n";
    return 0;
}

struct SampleDataArgs {
    std::string mdp_path;
    std::string kernel_path;
    std::string out_path;
    long n = 3000;
    uint64_t seed = 0;
    int episode_len = 50;
};

int cmd_sample_data(const SampleDataArgs& args) {
    const TabularMdp mdp = load_mdp(args.mdp_path);
    const TransitionModel kernel = load_kernel(args.kernel_path);
    const BatchDataset dataset =
        sample_dataset(mdp, kernel, args.n, args.seed, args.episode_len);
    save_dataset(dataset, args.out_path);
    std::cout << "wrote " << args.out_path << " (" << dataset.tuples.size() << " tuples)\n";
    return 0;
}

struct FitPosteriorArgs {
    std::string mdp_path;
    std::string dataset_path;
    std::string out_path;
    std::string ensemble_out;
    Real prior = 1.0;
    int sample_count = 0;
    uint64_t ensemble_seed = 0;
};

int cmd_fit_posterior(const FitPosteriorArgs& args) {
    const TabularMdp mdp = load_mdp(args.mdp_path);
    const BatchDataset dataset = load_dataset(args.dataset_path);
    const DirichletPosterior posterior =
        counts_from_dataset(dataset, mdp.num_states, mdp.num_actions, args.prior);
    save_posterior(posterior, args.out_path);
    std::cout << "wrote " << args.out_path << "\n";
    if (args.sample_count > 0) {
        if (args.ensemble_out.empty()) {
            throw InvalidInput("--sample-models requires --ensemble-out");
        }
        const ModelEnsemble ensemble =
            sample_models(posterior, args.sample_count, args.ensemble_seed);
        save_ensemble(ensemble, args.ensemble_out);
        std::cout << "wrote " << args.ensemble_out << " (" << ensemble.size() << " models)\n";
    }
    return 0;
}

struct SolveArgs {
    std::string config_path;
    std::string out_dir;
};

int cmd_solve(const SolveArgs& args) {
    std::ifstream in(args.config_path);
    if (!in) { throw InvalidInput("cannot open config " + args.config_path); }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("solve config: ") + e.what());
    }
    static const std::vector<std::string> known = {"mdp",     "method",  "delta",
                                                   "epsilon", "ensemble", "posterior",
                                                   "models",  "sample_seed", "dataset",
                                                   "out_dir"};
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InvalidInput("solve config: unknown key '" + key + "'");
        }
    }
    const Method method = parse_method(doc.at("method").get<std::string>());
    const Real delta = doc.at("delta").get<Real>();
    const Real eps = doc.value("epsilon", 1e-4);
    if (!(delta > 0.0 && delta < 0.5)) { throw InvalidInput("solve config: delta in (0, 1/2)"); }

    const TabularMdp mdp = load_mdp(doc.at("mdp").get<std::string>());

    ModelEnsemble ensemble;
    if (doc.contains("ensemble")) {
        ensemble = load_ensemble(doc["ensemble"].get<std::string>());
    } else if (doc.contains("posterior")) {
        const DirichletPosterior posterior =
            load_posterior(doc["posterior"].get<std::string>());
        ensemble = sample_models(posterior, doc.value("models", 80),
                                 doc.value("sample_seed", uint64_t{0}));
    } else {
        throw InvalidInput("solve config: needs 'ensemble' or 'posterior'");
    }
    if (ensemble.num_states() != mdp.num_states || ensemble.num_actions() != mdp.num_actions) {
        throw InvalidInput("solve config: ensemble shape does not match the MDP");
    }

    std::vector<long> counts(static_cast<size_t>(mdp.num_states) * mdp.num_actions, 0);
    const bool needs_counts =
        method == Method::naive_hoeffding || method == Method::opt_hoeffding;
    if (doc.contains("dataset")) {
        counts = visit_counts(load_dataset(doc["dataset"].get<std::string>()),
                              mdp.num_states, mdp.num_actions);
    } else if (needs_counts) {
        throw InvalidInput("solve config: Hoeffding methods need 'dataset'");
    }

    const VarSolution sol = solve_with_method(mdp, method, ensemble, counts, delta, eps);

    fs::path dir = resolve_out_dir(args.out_dir);
    if (args.out_dir.empty() && doc.contains("out_dir")) {
        dir = doc["out_dir"].get<std::string>();
    }
    ensure_dir(dir);
    json policy_doc;
    policy_doc["actions"] = sol.policy;
    std::ofstream(dir / "policy.json") << policy_doc.dump(1) << '\n';
    json value_doc;
    value_doc["v"] = sol.value;
    std::ofstream(dir / "value.json") << value_doc.dump(1) << '\n';
    json meta;
    meta["method"] = method_name(method);
    meta["delta"] = delta;
    meta["epsilon"] = eps;
    meta["iterations"] = sol.iterations;
    meta["converged"] = sol.converged;
    meta["git_describe"] = kGitDescribe;
    std::ofstream(dir / "solve_metadata.json") << meta.dump(1) << '\n';
    std::cout << "wrote policy.json, value.json, solve_metadata.json under " << dir.string()
              << " (iterations=" << sol.iterations << ", converged=" << sol.converged << ")\n";
    return 0;
}

struct EvaluateArgs {
    std::string mdp_path;
    std::string policy_path;
    std::string ensemble_path;
    std::string out_path;
    Real delta = 0.05;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const TabularMdp mdp = load_mdp(args.mdp_path);
    std::ifstream in(args.policy_path);
    if (!in) { throw InvalidInput("cannot open policy " + args.policy_path); }
    json doc;
    in >> doc;
    const DeterministicPolicy policy = doc.at("actions").get<DeterministicPolicy>();
    const ModelEnsemble ensemble = load_ensemble(args.ensemble_path);
    const Real value = robust_performance(mdp, policy, ensemble, args.delta);
    std::cout << "robust_return," << format_double(value) << "\n";
    if (!args.out_path.empty()) {
        std::ofstream out(args.out_path);
        out << "delta,robust_return\n"
            << format_double(args.delta) << ',' << format_double(value) << '\n';
    }
    return 0;
}

struct ExperimentArgs {
    std::string config_path;
    std::string out_dir;
    int threads = -1;
    long seed = -1;
};

int cmd_run_experiment(const ExperimentArgs& args) {
    ExperimentConfig cfg = experiment_config_from_json_file(args.config_path);
    if (args.threads >= 0) { cfg.threads = args.threads; }
    if (args.seed >= 0) { cfg.seed = static_cast<uint64_t>(args.seed); }
    const fs::path dir = resolve_out_dir(args.out_dir);
    ensure_dir(dir);
    const std::vector<MethodResult> results = run_experiment(cfg);
    write_results_csv(results, dir / "results.csv");
    write_summary_csv(results, dir / "summary.csv");
    write_manifest(cfg, dir / "manifest.json");
    std::cout << "wrote results.csv, summary.csv, manifest.json under " << dir.string() << "\n";
    for (const auto& r : results) {
        std::cout << r.method << " delta=" << r.delta << " mean=" << r.mean << " +-"
                  << r.ci_halfwidth << "\n";
    }
    return 0;
}

struct RadiusArgs {
    int s_min = 3;
    int s_max = 100;
    Real alpha = 0.05;
    std::string out_path;
};

int cmd_radius_analysis(const RadiusArgs& args) {
    if (args.s_min < 2 || args.s_max < args.s_min) {
        throw InvalidInput("radius-analysis: need 2 <= s-min <= s-max");
    }
    std::ostringstream out;
    out << "S,alpha,ratio\n";
    for (int S = args.s_min; S <= args.s_max; ++S) {
        out << S << ',' << format_double(args.alpha) << ','
            << format_double(radius_ratio(S, args.alpha)) << '\n';
    }
    if (args.out_path.empty()) {
        std::cout << out.str();
    } else {
        std::ofstream file(args.out_path);
        if (!file) { throw std::runtime_error("cannot write " + args.out_path); }
        file << out.str();
        std::cout << "wrote " << args.out_path << "\n";
    }
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Percentile-criterion robust MDP solvers and experiment harness"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kGitDescribe));

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate-domain", "Write an MDP and its true kernel");
    generate->add_option("--name", gen.name, "riverswim | inventory | population")->required();
    generate->add_option("--out-dir", gen.out_dir, "output directory");
    generate->add_option("--param", gen.params, "domain parameter key=value (repeatable)");
    generate->add_option("--seed", gen.seed, "domain seed");

    SampleDataArgs data;
    auto* sample = app.add_subcommand("sample-data", "Sample a batch dataset CSV");
    sample->add_option("--mdp", data.mdp_path, "MDP json")->required();
    sample->add_option("--kernel", data.kernel_path, "true kernel json")->required();
    sample->add_option("--out", data.out_path, "output csv")->required();
    sample->add_option("--n", data.n, "number of tuples");
    sample->add_option("--seed", data.seed, "sampling seed");
    sample->add_option("--episode-len", data.episode_len, "steps before restart");

    FitPosteriorArgs fit;
    auto* posterior = app.add_subcommand("fit-posterior", "Dirichlet posterior from a dataset");
    posterior->add_option("--mdp", fit.mdp_path, "MDP json")->required();
    posterior->add_option("--dataset", fit.dataset_path, "dataset csv")->required();
    posterior->add_option("--out", fit.out_path, "posterior json")->required();
    posterior->add_option("--prior", fit.prior, "prior pseudo-count per successor");
    posterior->add_option("--sample-models", fit.sample_count, "also draw an ensemble");
    posterior->add_option("--ensemble-seed", fit.ensemble_seed, "ensemble seed");
    posterior->add_option("--ensemble-out", fit.ensemble_out, "ensemble output file");

    SolveArgs solve;
    auto* solve_cmd = app.add_subcommand("solve", "Solve one method from a config file");
    solve_cmd->add_option("--config", solve.config_path, "solve config json")->required();
    solve_cmd->add_option("--out-dir", solve.out_dir, "output directory (overrides config)");

    EvaluateArgs eval;
    auto* evaluate = app.add_subcommand("evaluate", "Robust performance of a saved policy");
    evaluate->add_option("--mdp", eval.mdp_path, "MDP json")->required();
    evaluate->add_option("--policy", eval.policy_path, "policy json")->required();
    evaluate->add_option("--ensemble", eval.ensemble_path, "test ensemble")->required();
    evaluate->add_option("--delta", eval.delta, "percentile level");
    evaluate->add_option("--out", eval.out_path, "optional csv output");

    ExperimentArgs experiment;
    auto* run = app.add_subcommand("run-experiment", "Full train/test protocol");
    run->add_option("--config", experiment.config_path, "experiment config json")->required();
    run->add_option("--out-dir", experiment.out_dir, "output directory");
    run->add_option("--threads", experiment.threads, "worker cap (overrides config)");
    run->add_option("--seed", experiment.seed, "root seed (overrides config)");

    RadiusArgs radius;
    auto* radius_cmd = app.add_subcommand("radius-analysis", "BCR/VaR radius ratio CSV");
    radius_cmd->add_option("--s-min", radius.s_min, "smallest state count");
    radius_cmd->add_option("--s-max", radius.s_max, "largest state count");
    radius_cmd->add_option("--alpha", radius.alpha, "confidence level");
    radius_cmd->add_option("--out", radius.out_path, "output csv (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (generate->parsed()) { return cmd_generate_domain(gen); }
        if (sample->parsed()) { return cmd_sample_data(data); }
        if (posterior->parsed()) { return cmd_fit_posterior(fit); }
        if (solve_cmd->parsed()) { return cmd_solve(solve); }
        if (evaluate->parsed()) { return cmd_evaluate(eval); }
        if (run->parsed()) { return cmd_run_experiment(experiment); }
        if (radius_cmd->parsed()) { return cmd_radius_analysis(radius); }
    } catch (const InvalidInput& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

} // namespace varmdp
