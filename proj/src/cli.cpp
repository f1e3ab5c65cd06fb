#include "zibbmr/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <utility>

#include "zibbmr/inference.hpp"
#include "zibbmr/io.hpp"
#include "zibbmr/likelihood.hpp"
#include "zibbmr/saem.hpp"
#include "zibbmr/simstudy.hpp"

namespace zibbmr::cli {

namespace {

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty())
    std::cout << content;
  else
    write_text_file(out_path, content);
}

std::string json_text(const OrderedJson& j) { return j.dump(2) + "\n"; }

// Shared --config/--seed/--mode/--threads handling.  Flag overrides win
// over the config file; `chains_explicit` reports whether the file pinned
// the chain count (bench falls back to the setting default otherwise).
struct ConfigArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<int> threads;
  std::optional<int> chains;

  void attach(CLI::App& cmd, bool with_seed = true) {
    cmd.add_option("--config", config_path,
                   "JSON run configuration (all keys optional)");
    if (with_seed)
      cmd.add_option("--seed", seed, "RNG seed (overrides config)");
    cmd.add_option("--mode", mode, "sampler mode: original | augmented")
        ->check(CLI::IsMember({"original", "augmented"}));
    cmd.add_option("--threads", threads,
                   "worker threads (never affects results)");
    cmd.add_option("--chains", chains, "MCMC chains (overrides config)");
  }

  RunConfig resolve(bool* chains_explicit = nullptr) const {
    RunConfig rc;
    bool file_has_chains = false;
    if (!config_path.empty()) {
      OrderedJson j;
      try {
        j = OrderedJson::parse(read_text_file(config_path));
      } catch (const OrderedJson::parse_error& e) {
        throw UsageError(config_path + ": " + e.what());
      }
      try {
        rc = run_config_from_json(j);
      } catch (const std::exception& e) {
        throw UsageError(config_path + ": " + e.what());
      }
      file_has_chains = j.contains("chains") && !j["chains"].is_null();
    }
    if (seed) rc.fit.seed = *seed;
    if (!mode.empty())
      rc.fit.mode = mode == "augmented" ? Mode::kAugmented : Mode::kOriginal;
    if (threads) rc.fit.threads = *threads;
    if (chains) rc.fit.chains = *chains;
    if (chains_explicit) *chains_explicit = file_has_chains || chains.has_value();
    return rc;
  }
};

Dataset load_data_or_usage(const std::string& path, const RunConfig& rc) {
  try {
    return load_dataset_csv(path, rc.x_cols, rc.z_cols);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// ---- simulate ---------------------------------------------------------

struct SimulateArgs {
  int setting = 1;
  Index subjects = 0;  // 0 = setting default
  int times = 0;
  std::uint64_t seed = 1;
  std::string out_path;
  std::string truth_path;
};

int cmd_simulate(const SimulateArgs& args) {
  SettingSpec spec;
  try {
    spec = builtin_setting(args.setting);
    if (args.subjects > 0) spec.n_subjects = args.subjects;
    if (args.times > 0) spec.t_per_subject = args.times;
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  RngStream rng(args.seed, 0);
  const GeneratedData gen = generate_dataset(spec, rng);
  emit(dataset_to_csv(gen.data), args.out_path);
  if (!args.truth_path.empty()) {
    OrderedJson j;
    j["schema"] = kResultSchema;
    j["version"] = kVersion;
    j["kind"] = "simulate-truth";
    j["setting"] = args.setting;
    j["seed"] = args.seed;
    j["truth"] = theta_to_json(gen.truth);
    write_text_file(args.truth_path, json_text(j));
  }
  return kExitOk;
}

// ---- fit ----------------------------------------------------------------

struct FitArgs {
  std::string data_path;
  ConfigArgs config;
  std::string out_path;
};

int cmd_fit(const FitArgs& args) {
  const RunConfig rc = args.config.resolve();
  const Dataset data = load_data_or_usage(args.data_path, rc);
  try {
    rc.fit.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const FitResult result = fit(data, rc.fit);
  emit(json_text(fit_result_to_json(result, rc)), args.out_path);
  if (!result.ok) {
    std::cerr << "fit failed: " << result.error << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// ---- loglik -------------------------------------------------------------

struct LoglikArgs {
  std::string data_path;
  std::string result_path;
  std::string out_path;
  int gh_nodes = 0;  // 0 = skip the quadrature cross-check
  int threads = 1;
};

int cmd_loglik(const LoglikArgs& args) {
  OrderedJson stored;
  try {
    stored = OrderedJson::parse(read_text_file(args.result_path));
  } catch (const std::exception& e) {
    throw UsageError(args.result_path + ": " + e.what());
  }
  RunConfig rc;
  Theta theta;
  ConditionalMoments moments;
  try {
    if (stored.at("schema").get<std::string>() != kResultSchema)
      throw std::invalid_argument("unrecognized result schema");
    rc = run_config_from_json(stored.at("config"));
    theta = theta_from_json(stored.at("estimate"));
    moments = moments_from_json(stored.at("moments"));
  } catch (const std::exception& e) {
    throw UsageError(args.result_path + ": " + e.what());
  }
  const Dataset data = load_data_or_usage(args.data_path, rc);
  if (moments.mean.size() != data.subjects.size())
    throw UsageError("result file moments do not match the dataset (" +
                     std::to_string(moments.mean.size()) + " vs " +
                     std::to_string(data.subjects.size()) + " subjects)");

  // Same stream family the fit used, so the estimate is reproduced exactly.
  RngStream master(rc.fit.seed,
                   1 + static_cast<std::uint64_t>(rc.fit.chains) *
                           static_cast<std::uint64_t>(data.n_subjects()));
  const LoglikEstimate ll =
      loglik_importance(data, theta, moments, rc.fit.is, master, args.threads);

  OrderedJson j;
  j["schema"] = kResultSchema;
  j["version"] = kVersion;
  j["kind"] = "loglik";
  j["loglik"] = ll.value;
  j["loglik_mc_se"] = ll.mc_se;
  if (args.gh_nodes > 0) {
    j["loglik_gh"] = loglik_quadrature_adaptive(data, theta, moments,
                                                gauss_hermite(args.gh_nodes));
    j["gh_nodes"] = args.gh_nodes;
  }
  emit(json_text(j), args.out_path);
  return kExitOk;
}

// ---- test -----------------------------------------------------------

struct TestArgs {
  std::string data_path;
  ConfigArgs config;
  std::string null_list;
  std::string out_path;
};

int cmd_test(const TestArgs& args) {
  RunConfig rc = args.config.resolve();
  const Dataset data = load_data_or_usage(args.data_path, rc);

  // --null names use the packed parameter naming: alpha_1, beta_2, ...
  FixedCoords fixed_alpha;
  FixedCoords fixed_beta;
  std::vector<std::pair<std::string, bool>> named;  // (name, is_alpha)
  {
    std::string rest = args.null_list;
    while (!rest.empty()) {
      const std::size_t pos = rest.find(',');
      const std::string name = rest.substr(0, pos);
      rest = pos == std::string::npos ? "" : rest.substr(pos + 1);
      if (name.empty()) continue;
      bool is_alpha;
      Index dim;
      if (name.rfind("alpha_", 0) == 0) {
        is_alpha = true;
        dim = data.dim_x;
      } else if (name.rfind("beta_", 0) == 0) {
        is_alpha = false;
        dim = data.dim_z;
      } else {
        throw UsageError("--null accepts alpha_j / beta_j names, got '" +
                         name + "'");
      }
      Index idx = 0;
      try {
        idx = static_cast<Index>(
                  std::stol(name.substr(name.find('_') + 1))) - 1;
      } catch (const std::exception&) {
        throw UsageError("--null: cannot parse index in '" + name + "'");
      }
      if (idx < 0 || idx >= dim)
        throw UsageError("--null: '" + name + "' is out of range");
      auto& fixed = is_alpha ? fixed_alpha : fixed_beta;
      for (const auto& [j, v] : fixed)
        if (j == idx) throw UsageError("--null: duplicate '" + name + "'");
      fixed.emplace_back(idx, 0.0);
      named.emplace_back(name, is_alpha);
    }
  }
  if (named.empty()) throw UsageError("--null: no parameters given");

  FitConfig full_cfg = rc.fit;
  full_cfg.se_method = SeMethod::kLouis;
  try {
    full_cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const FitResult full = fit(data, full_cfg);
  if (!full.ok) {
    std::cerr << "full fit failed: " << full.error << "\n";
    return kExitNumerical;
  }
  if (!full.se) {
    std::cerr << "standard errors unavailable for the Wald tests\n";
    return kExitNumerical;
  }
  FitConfig red_cfg = full_cfg;
  red_cfg.se_method = SeMethod::kNone;
  red_cfg.fixed_alpha = fixed_alpha;
  red_cfg.fixed_beta = fixed_beta;
  const FitResult reduced = fit(data, red_cfg);
  if (!reduced.ok) {
    std::cerr << "reduced fit failed: " << reduced.error << "\n";
    return kExitNumerical;
  }

  const ThetaLayout lay{data.dim_x, data.dim_z};
  OrderedJson tests = OrderedJson::array();
  for (const auto& [name, is_alpha] : named) {
    const Index idx =
        static_cast<Index>(std::stol(name.substr(name.find('_') + 1))) - 1;
    const double est =
        is_alpha ? full.theta.alpha(idx) : full.theta.beta(idx);
    const double se =
        (*full.se)(is_alpha ? lay.alpha(idx) : lay.beta(idx));
    const TestResult w = wald_test(est, se);
    OrderedJson jt;
    jt["kind"] = w.kind;
    jt["parameter"] = name;
    jt["estimate"] = est;
    jt["se"] = se;
    jt["statistic"] = w.statistic;
    jt["df"] = w.df;
    jt["p_value"] = w.p_value;
    tests.push_back(jt);
  }
  const double mc = std::hypot(full.loglik_mc_se, reduced.loglik_mc_se);
  const TestResult lr = lrt_test(full.loglik, reduced.loglik,
                                 static_cast<int>(named.size()), mc);
  {
    OrderedJson jt;
    jt["kind"] = lr.kind;
    jt["null"] = args.null_list;
    jt["statistic"] = lr.statistic;
    jt["df"] = lr.df;
    jt["p_value"] = lr.p_value;
    jt["noise_warning"] = lr.noise_warning;
    jt["loglik_full"] = full.loglik;
    jt["loglik_reduced"] = reduced.loglik;
    tests.push_back(jt);
  }

  OrderedJson j;
  j["schema"] = kResultSchema;
  j["version"] = kVersion;
  j["kind"] = "test";
  j["config"] = run_config_to_json(rc);
  j["tests"] = tests;
  emit(json_text(j), args.out_path);
  return kExitOk;
}

// ---- bench ------------------------------------------------------------

struct BenchArgs {
  int setting = 1;
  int reps = 100;
  std::uint64_t seed = 1;
  Index subjects = 0;
  int times = 0;
  bool type1 = false;
  ConfigArgs config;
  std::string out_path;
};

int cmd_bench(const BenchArgs& args) {
  SettingSpec spec;
  bool chains_explicit = false;
  RunConfig rc = args.config.resolve(&chains_explicit);
  try {
    spec = builtin_setting(args.setting);
    if (args.subjects > 0) spec.n_subjects = args.subjects;
    if (args.times > 0) spec.t_per_subject = args.times;
    spec.validate();
    if (!chains_explicit) rc.fit.chains = spec.default_chains;
    rc.fit.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (args.reps < 1) throw UsageError("--reps must be >= 1");
  const int parallelism = rc.fit.threads;
  if (args.type1) {
    const Type1Result res =
        type1_study(spec, rc.fit, args.reps, args.seed, parallelism);
    emit(type1_to_csv(args.setting, res), args.out_path);
  } else {
    const ReplicationResult res =
        run_replications(spec, rc.fit, args.reps, args.seed, parallelism);
    emit(metrics_to_csv(args.setting, res.metrics, res.n_fail),
         args.out_path);
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"zero-inflated beta-binomial mixed regression via SAEM"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* c_sim =
      app.add_subcommand("simulate", "generate a benchmark dataset");
  c_sim->add_option("--setting", sim.setting, "design 1..4")->required();
  c_sim->add_option("--subjects", sim.subjects, "override subject count");
  c_sim->add_option("--times", sim.times, "override occasions per subject");
  c_sim->add_option("--seed", sim.seed, "RNG seed");
  c_sim->add_option("--out", sim.out_path, "output CSV (default stdout)");
  c_sim->add_option("--truth-out", sim.truth_path,
                    "also write the realized parameters as JSON");

  FitArgs fit_args;
  CLI::App* c_fit = app.add_subcommand("fit", "fit the model to a CSV file");
  c_fit->add_option("--data", fit_args.data_path, "input CSV")->required();
  fit_args.config.attach(*c_fit);
  c_fit->add_option("--out", fit_args.out_path,
                    "result JSON (default stdout)");

  LoglikArgs ll;
  CLI::App* c_ll = app.add_subcommand(
      "loglik", "recompute the log likelihood of a stored fit");
  c_ll->add_option("--data", ll.data_path, "input CSV")->required();
  c_ll->add_option("--result", ll.result_path, "fit result JSON")->required();
  c_ll->add_option("--out", ll.out_path, "output JSON (default stdout)");
  c_ll->add_option("--gh", ll.gh_nodes,
                   "also report adaptive quadrature with this many nodes");
  c_ll->add_option("--threads", ll.threads, "worker threads");

  TestArgs test_args;
  CLI::App* c_test =
      app.add_subcommand("test", "Wald and likelihood ratio tests");
  c_test->add_option("--data", test_args.data_path, "input CSV")->required();
  c_test->add_option("--null", test_args.null_list,
                     "comma list of coefficients pinned to 0, "
                     "e.g. alpha_1,beta_1")
      ->required();
  test_args.config.attach(*c_test);
  c_test->add_option("--out", test_args.out_path,
                     "output JSON (default stdout)");

  BenchArgs bench;
  CLI::App* c_bench =
      app.add_subcommand("bench", "Monte Carlo replication study");
  c_bench->add_option("--setting", bench.setting, "design 1..4")->required();
  c_bench->add_option("--reps", bench.reps, "number of replicates")
      ->required();
  c_bench->add_option("--seed", bench.seed, "study seed");
  c_bench->add_option("--subjects", bench.subjects, "override subject count");
  c_bench->add_option("--times", bench.times,
                      "override occasions per subject");
  c_bench->add_flag("--type1", bench.type1,
                    "run the type-I error study instead of recovery metrics");
  bench.config.attach(*c_bench, /*with_seed=*/false);
  c_bench->add_option("--out", bench.out_path, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_fit->parsed()) return cmd_fit(fit_args);
    if (c_ll->parsed()) return cmd_loglik(ll);
    if (c_test->parsed()) return cmd_test(test_args);
    if (c_bench->parsed()) return cmd_bench(bench);
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> with_prog;
  with_prog.reserve(args.size() + 1);
  with_prog.push_back("zibbmr");
  with_prog.insert(with_prog.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(with_prog.size());
  for (const auto& a : with_prog) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace zibbmr::cli
