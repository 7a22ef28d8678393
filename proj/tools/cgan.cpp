#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "cgan/baselines.hpp"
#include "cgan/checkpoint.hpp"
#include "cgan/cohort.hpp"
#include "cgan/estimators.hpp"
#include "cgan/oracle.hpp"
#include "cgan/simgen.hpp"
#include "cgan/trainer.hpp"
#include "cgan/weights.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cgan;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct UsageError : Error {
  using Error::Error;
};

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

json train_config_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"max_iterations", c.max_iterations},
          {"disc_steps", c.disc_steps},
          {"lr_generator", c.lr_generator},
          {"lr_discriminator", c.lr_discriminator},
          {"lr_decay", c.lr_decay},
          {"decay_period", c.decay_period},
          {"recenter_period", c.recenter_period},
          {"convergence_window", c.convergence_window},
          {"convergence_tol", c.convergence_tol},
          {"noise_dim", c.noise_dim},
          {"hidden", c.hidden},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"seed", c.seed}};
}

json gaussian_json(const GaussianParams& g) {
  std::vector<std::vector<double>> cov;
  for (std::size_t r = 0; r < g.cov.rows(); ++r) {
    const auto row = g.cov.row_span(r);
    cov.emplace_back(row.begin(), row.end());
  }
  return {{"mean", g.mean}, {"cov", cov}};
}

std::string arm_id_from_path(const fs::path& p) { return p.stem().string(); }

std::vector<StudyArm> read_cohorts(const std::vector<std::string>& paths) {
  std::vector<StudyArm> arms;
  for (const std::string& p : paths) arms.push_back(read_cohort_csv(p, arm_id_from_path(p)));
  return arms;
}

void require_same_schema(const std::vector<StudyArm>& arms) {
  for (std::size_t a = 1; a < arms.size(); ++a) {
    if (arms[a].feature_names == arms[0].feature_names) continue;
    const std::set<std::string> first(arms[0].feature_names.begin(), arms[0].feature_names.end());
    const std::set<std::string> other(arms[a].feature_names.begin(), arms[a].feature_names.end());
    std::string diff;
    for (const std::string& n : first) {
      if (!other.count(n)) diff += " " + n + " (only in " + arms[0].id + ")";
    }
    for (const std::string& n : other) {
      if (!first.count(n)) diff += " " + n + " (only in " + arms[a].id + ")";
    }
    if (diff.empty()) diff = " same names in a different order";
    throw DataError("cohort feature columns differ between " + arms[0].id + " and " + arms[a].id + ":" + diff);
  }
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::size_t d = 10;
  std::size_t n_sub = 2000;
  double kappa0 = 0.1;
  double nu0 = 0.0;
};

void run_simulate(const SimulateArgs& args) {
  SimSpec spec;
  spec.seed = args.seed;
  spec.dim = args.d;
  spec.n_sub = args.n_sub;
  spec.kappa0 = args.kappa0;
  spec.nu0 = args.nu0;
  spec = spec.resolved();
  const SimPopulations pops = simulate(spec);

  const fs::path out(args.out);
  prepare_dir(out);
  write_cohort_csv(out / "arm1.csv", pops.arm1);
  write_cohort_csv(out / "arm2.csv", pops.arm2);

  const double mixture = 0.5 * (spec.outcome_means.at("1A") + spec.outcome_means.at("1B")) -
                         0.5 * (spec.outcome_means.at("2A") + spec.outcome_means.at("2C"));
  const double overlap = spec.outcome_means.at("1A") - spec.outcome_means.at("2A");
  json meta = {{"target_ate_mixture", mixture},
               {"target_ate_overlap", overlap},
               {"subpopulations", {{"A", gaussian_json(pops.a)}, {"B", gaussian_json(pops.b)}, {"C", gaussian_json(pops.c)}}},
               {"outcome_means", spec.outcome_means},
               {"outcome_std", spec.outcome_std}};
  write_json(out / "meta.json", meta);
  write_json(out / "config.json", {{"command", "simulate"},
                                   {"seed", spec.seed},
                                   {"d", spec.dim},
                                   {"n_sub", spec.n_sub},
                                   {"mu0", spec.mu0},
                                   {"kappa0", spec.kappa0},
                                   {"nu0", spec.nu0},
                                   {"psi", "identity"},
                                   {"out", args.out}});
  std::cout << "wrote " << pops.arm1.size() << " + " << pops.arm2.size() << " units to " << out.string() << '\n';
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> cohorts;
  std::string out;
  TrainConfig config;
};

void run_train(const TrainArgs& args) {
  const std::vector<StudyArm> arms = read_cohorts(args.cohorts);
  require_same_schema(arms);
  Trainer trainer(arms, args.config);
  trainer.run();
  const TrainedModel& model = trainer.model();

  const fs::path out(args.out);
  prepare_dir(out);
  save_checkpoint(out / "checkpoint.cgan", model);
  write_trace_csv(out / "trace.csv", model.trace);
  for (std::size_t a = 0; a < arms.size(); ++a) {
    write_weights_csv(out / ("weights_arm" + std::to_string(a) + ".csv"), arms[a], extract_weights(model, a, arms[a]),
                      std::string("cgan"));
  }
  json cfg = {{"command", "train"}, {"cohorts", args.cohorts}, {"out", args.out}};
  cfg["train"] = train_config_json(args.config);
  write_json(out / "config.json", cfg);

  const TraceRow& last = model.trace.back();
  std::cout << "trained " << trainer.iteration() << " iterations, final F = " << format_double(last.total) << '\n';
}

// ---------------------------------------------------------------------------

struct WeighArgs {
  std::string checkpoint;
  std::vector<std::string> cohorts;
  std::vector<std::size_t> arms;
  std::string out;
};

void run_weigh(const WeighArgs& args) {
  const TrainedModel model = load_checkpoint(args.checkpoint);
  std::vector<std::size_t> arm_index = args.arms;
  if (arm_index.empty()) {
    for (std::size_t a = 0; a < args.cohorts.size(); ++a) arm_index.push_back(a);
  }
  if (arm_index.size() != args.cohorts.size()) throw UsageError("give one --arm per --cohort, or none");

  const fs::path out(args.out);
  prepare_dir(out);
  for (std::size_t i = 0; i < args.cohorts.size(); ++i) {
    const StudyArm arm = read_cohort_csv(args.cohorts[i], arm_id_from_path(args.cohorts[i]));
    const WeightVector w = extract_weights(model, arm_index[i], arm);
    write_weights_csv(out / ("weights_arm" + std::to_string(arm_index[i]) + ".csv"), arm, w, std::string("cgan"));
  }
  write_json(out / "config.json", {{"command", "weigh"},
                                   {"checkpoint", args.checkpoint},
                                   {"cohorts", args.cohorts},
                                   {"arms", arm_index},
                                   {"out", args.out}});
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> cohorts;
  std::vector<std::string> methods;
  std::vector<std::string> weights;
  std::string checkpoint;
  std::string out;
};

std::pair<WeightVector, WeightVector> weights_from_files(const std::string& f1, const std::string& f2,
                                                         const StudyArm& a1, const StudyArm& a2) {
  WeightsTable t1 = read_weights_csv(f1);
  WeightsTable t2 = read_weights_csv(f2);
  if (t1.unit_ids.size() != a1.size() || t2.unit_ids.size() != a2.size()) {
    throw DataError("weights files have " + std::to_string(t1.unit_ids.size()) + " and " +
                    std::to_string(t2.unit_ids.size()) + " rows, cohorts have " + std::to_string(a1.size()) +
                    " and " + std::to_string(a2.size()));
  }
  return {std::move(t1.weights), std::move(t2.weights)};
}

void run_evaluate(const EvaluateArgs& args) {
  if (args.cohorts.size() != 2) throw UsageError("evaluate compares exactly two cohorts (--cohort twice)");
  if (!args.weights.empty() && args.weights.size() != 2) throw UsageError("--weights takes one file per cohort");
  if (args.methods.empty() && args.weights.empty()) throw UsageError("give at least one --method or --weights pair");

  const std::vector<StudyArm> arms = read_cohorts(args.cohorts);
  require_same_schema(arms);
  const StudyArm& a1 = arms[0];
  const StudyArm& a2 = arms[1];
  const bool have_outcomes = a1.outcomes && a2.outcomes;

  std::vector<std::pair<std::string, std::pair<WeightVector, WeightVector>>> runs;
  std::optional<std::vector<double>> scores;
  std::vector<int> treated(a1.size(), 1);
  treated.resize(a1.size() + a2.size(), 0);
  const auto propensity_scores = [&]() -> const std::vector<double>& {
    if (!scores) {
      const PropensityModel m = fit_logistic_propensity(a1, a2);
      if (m.separation_warning) std::cerr << "warning: propensity model separates the cohorts\n";
      std::vector<double> s = m.scores(a1.features);
      const std::vector<double> s2 = m.scores(a2.features);
      s.insert(s.end(), s2.begin(), s2.end());
      scores = std::move(s);
    }
    return *scores;
  };

  for (const std::string& method : args.methods) {
    if (method == "unweighted") {
      runs.push_back({method, {normalize(std::vector<double>(a1.size(), 1.0), 0),
                               normalize(std::vector<double>(a2.size(), 1.0), 1)}});
    } else if (method == "ipw") {
      runs.push_back({method, ipw_weights(propensity_scores(), treated)});
    } else if (method == "clipped-ipw") {
      runs.push_back({method, ipw_weights(clip_percentile(propensity_scores()), treated)});
    } else if (method == "cgan") {
      if (args.checkpoint.empty()) throw UsageError("--method cgan needs --checkpoint");
      const TrainedModel model = load_checkpoint(args.checkpoint);
      if (model.arm_count() != 2) throw DataError("checkpoint has " + std::to_string(model.arm_count()) + " arms, expected 2");
      runs.push_back({method, {extract_weights(model, 0, a1), extract_weights(model, 1, a2)}});
    }
  }
  if (!args.weights.empty()) {
    const WeightsTable t = read_weights_csv(args.weights[0]);
    runs.push_back({t.method.value_or("weights"), weights_from_files(args.weights[0], args.weights[1], a1, a2)});
  }

  std::vector<EffectReport> effects;
  std::vector<BalanceReport> balances;
  for (auto& [name, w] : runs) {
    if (have_outcomes) effects.push_back(effect_report(name, *a1.outcomes, w.first, *a2.outcomes, w.second));
    BalanceReport b = asdm(a1.features, w.first.weights, a2.features, w.second.weights);
    b.method = name;
    balances.push_back(std::move(b));
  }

  const fs::path out(args.out);
  prepare_dir(out);
  if (have_outcomes) write_effect_csv(out / "effect.csv", effects);
  write_balance_csv(out / "balance.csv", balances, a1.feature_names);
  const std::string table = format_report_table(effects, balances);
  {
    std::ofstream report(out / "report.txt", std::ios::binary);
    report << table;
    if (!have_outcomes) report << "no outcome column: effects not computed\n";
  }
  write_json(out / "config.json", {{"command", "evaluate"},
                                   {"cohorts", args.cohorts},
                                   {"methods", args.methods},
                                   {"weights", args.weights},
                                   {"checkpoint", args.checkpoint},
                                   {"out", args.out}});
  std::cout << table;
}

// ---------------------------------------------------------------------------

struct OracleArgs {
  std::string suite;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::string out;
};

void run_oracle(const OracleArgs& args) {
  OracleReport report;
  json cfg = {{"command", "oracle"}, {"suite", args.suite}, {"seed", args.seed}};
  if (args.suite == "gaussian-chi2") {
    GaussianChi2Options o;
    o.seed = args.seed;
    if (args.iterations) o.iterations = args.iterations;
    cfg["iterations"] = o.iterations;
    report = gaussian_chi2_oracle(o);
  } else if (args.suite == "identity") {
    IdentityOptions o;
    o.train.seed = args.seed;
    if (args.iterations) o.train.max_iterations = args.iterations;
    cfg["train"] = train_config_json(o.train);
    report = identity_oracle(o);
  } else {
    VarianceRelationOptions o;
    o.seed = args.seed;
    report = variance_relation_oracle(o);
  }
  const std::string text = report.format();
  std::cout << text;
  if (!args.out.empty()) {
    const fs::path out(args.out);
    prepare_dir(out);
    std::ofstream(out / "oracle.txt", std::ios::binary) << text;
    write_json(out / "config.json", cfg);
  }
}

void add_train_options(CLI::App& cmd, TrainConfig& c) {
  cmd.add_option("--seed", c.seed, "master seed")->capture_default_str();
  cmd.add_option("--iterations", c.max_iterations, "maximum outer iterations")->capture_default_str();
  cmd.add_option("--batch-size", c.batch_size, "minibatch size")->capture_default_str();
  cmd.add_option("--disc-steps", c.disc_steps, "critic steps per iteration")->capture_default_str();
  cmd.add_option("--lr-generator", c.lr_generator)->capture_default_str();
  cmd.add_option("--lr-discriminator", c.lr_discriminator)->capture_default_str();
  cmd.add_option("--lr-decay", c.lr_decay)->capture_default_str();
  cmd.add_option("--decay-period", c.decay_period)->capture_default_str();
  cmd.add_option("--recenter-period", c.recenter_period)->capture_default_str();
  cmd.add_option("--window", c.convergence_window, "convergence window")->capture_default_str();
  cmd.add_option("--tol", c.convergence_tol, "convergence tolerance")->capture_default_str();
  cmd.add_option("--noise-dim", c.noise_dim)->capture_default_str();
  cmd.add_option("--hidden", c.hidden, "hidden layer widths")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual chi-GAN: feature-balancing weights for multi-arm observational studies"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "write a synthetic two-arm study");
  simulate_cmd->add_option("--out", sim.out, "output directory")->required();
  simulate_cmd->add_option("--seed", sim.seed)->capture_default_str();
  simulate_cmd->add_option("--d", sim.d, "feature dimension")->capture_default_str();
  simulate_cmd->add_option("--n-sub", sim.n_sub, "units per subpopulation")->capture_default_str();
  simulate_cmd->add_option("--kappa0", sim.kappa0)->capture_default_str();
  simulate_cmd->add_option("--nu0", sim.nu0, "0 means d + 2")->capture_default_str();

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "fit the generator and per-arm critics");
  train_cmd->add_option("--cohort", tr.cohorts, "cohort CSV, one per arm")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "output directory")->required();
  add_train_options(*train_cmd, tr.config);

  WeighArgs wa;
  CLI::App* weigh_cmd = app.add_subcommand("weigh", "extract normalized weights from a checkpoint");
  weigh_cmd->add_option("--checkpoint", wa.checkpoint)->required()->check(CLI::ExistingFile);
  weigh_cmd->add_option("--cohort", wa.cohorts)->required()->check(CLI::ExistingFile);
  weigh_cmd->add_option("--arm", wa.arms, "critic index for each cohort");
  weigh_cmd->add_option("--out", wa.out)->required();

  EvaluateArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "effect, ESS and balance under several weightings");
  eval_cmd->add_option("--cohort", ev.cohorts, "treated cohort first")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--method", ev.methods)
      ->check(CLI::IsMember({"unweighted", "ipw", "clipped-ipw", "cgan"}));
  eval_cmd->add_option("--weights", ev.weights, "weights CSV per cohort")->check(CLI::ExistingFile);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "needed by --method cgan")->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev.out)->required();

  OracleArgs orc;
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "run a built-in oracle suite");
  oracle_cmd->add_option("--suite", orc.suite)
      ->required()
      ->check(CLI::IsMember({"gaussian-chi2", "identity", "variance-relation"}));
  oracle_cmd->add_option("--seed", orc.seed)->capture_default_str();
  oracle_cmd->add_option("--iterations", orc.iterations, "override the suite's training length");
  oracle_cmd->add_option("--out", orc.out, "optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    (void)app.exit(e);
    return kExitUsage;
  }

  try {
    if (*simulate_cmd) run_simulate(sim);
    if (*train_cmd) run_train(tr);
    if (*weigh_cmd) run_weigh(wa);
    if (*eval_cmd) run_evaluate(ev);
    if (*oracle_cmd) run_oracle(orc);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
