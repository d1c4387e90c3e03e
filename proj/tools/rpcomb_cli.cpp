// rpcomb: command-line front end for data generation, machine grids, projected
// kernel aggregation, the projection-dimension bound and full experiments.
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rpcomb/aggregator.hpp"
#include "rpcomb/datamodel.hpp"
#include "rpcomb/harness.hpp"
#include "rpcomb/learners.hpp"
#include "rpcomb/projection.hpp"
#include "rpcomb/simgen.hpp"

namespace {

using namespace rpcomb;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kData: return kExitData;
    case ErrorKind::kNumerical: return kExitNumerical;
  }
  return kExitNumerical;
}

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + item + "'");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

GridSpec grid_by_name(const std::string& name) {
  if (name == "desk") return GridSpec::desk();
  if (name == "reference") return GridSpec::reference();
  throw ConfigError("unknown grid '" + name + "' (expected desk or reference)");
}

Vector read_responses(const std::string& path, const std::string& target) {
  return load_csv(path, target).response();
}

// --- subcommands ------------------------------------------------------------

struct SimulateArgs {
  int model = 1;
  std::size_t n = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_simulate(const SimulateArgs& a) {
  auto spec = SimModelSpec::defaults(a.model, a.seed);
  if (a.n) spec.n = a.n;
  if (a.d) spec.d = a.d;
  save_csv(generate(spec), a.out);
}

struct MachinesArgs {
  std::string build;
  std::string target;
  std::vector<std::string> predict;
  std::vector<std::string> out;
  std::string grid = "desk";
  std::uint64_t seed = 0;
};

void run_machines(const MachinesArgs& a) {
  if (a.predict.size() != a.out.size()) {
    throw ConfigError("--predict and --out must be given the same number of times");
  }
  const Dataset build = load_csv(a.build, a.target);
  const auto machines = fit_grid(build, grid_by_name(a.grid), a.seed);
  const double bound = build.response().cwiseAbs().maxCoeff();
  for (std::size_t i = 0; i < a.predict.size(); ++i) {
    const Dataset ds = load_csv(a.predict[i], a.target);
    save_prediction_csv(build_prediction_matrix(machines, ds, bound), a.out[i]);
  }
  std::cerr << "fitted " << machines.size() << " machines\n";
}

struct ProjectArgs {
  std::string in;
  std::string out;
  std::size_t m = 0;
  std::uint64_t seed = 0;
};

void run_project(const ProjectArgs& a) {
  const auto pm = load_prediction_csv(a.in);
  if (a.m < 1) throw ConfigError("--m must be >= 1");
  save_prediction_csv(project(pm, sample_projection(pm.machines(), a.m, a.seed)), a.out);
}

struct AggregateArgs {
  std::string features;
  std::string responses;
  std::string target;
  std::string queries;
  std::string truth;
  std::string out;
  std::string model_out;
  double alpha = 2.0;
  double sigma = 1.0;
  std::optional<double> h;
  std::string tune = "gd";
  std::optional<std::size_t> m;
  bool full = false;
  std::uint64_t seed = 0;
};

void run_aggregate(const AggregateArgs& a) {
  const auto train = load_prediction_csv(a.features);
  const Vector y = read_responses(a.responses, a.target);
  if (static_cast<std::size_t>(y.size()) != train.rows()) {
    throw DataError("responses have " + std::to_string(y.size()) + " rows, features " +
                    std::to_string(train.rows()));
  }
  if (a.full == a.m.has_value()) throw ConfigError("give exactly one of --m and --full");

  std::optional<ProjectionMatrix> g;
  Matrix features = train.values();
  if (a.m) {
    if (*a.m < 1) throw ConfigError("--m must be >= 1");
    g = sample_projection(train.machines(), *a.m, a.seed);
    features = project(features, *g);
  }

  KernelSpec kernel{a.alpha, a.sigma, a.h.value_or(1.0)};
  nlohmann::json report;
  if (!a.h) {
    TuneMethod method;
    if (a.tune == "gd") method = TuneMethod::kGradientDescent;
    else if (a.tune == "grid") method = TuneMethod::kGrid;
    else throw ConfigError("--tune must be gd or grid");
    const auto tuned = tune_bandwidth(features, y, {a.alpha, a.sigma}, method);
    kernel = tuned.kernel;
    report["tune_iterations"] = tuned.trace.iterations;
    report["tune_converged"] = tuned.trace.converged;
    report["loo_objective"] = tuned.trace.objective_path.back();
  }
  kernel.validate();
  const AggregatorModel model(std::move(features), y, kernel, std::move(g));
  report["h"] = kernel.h;
  report["alpha"] = kernel.alpha;
  report["sigma"] = kernel.sigma;
  report["m"] = a.m ? nlohmann::json(*a.m) : nlohmann::json("full");

  if (!a.model_out.empty()) save_model(model, a.model_out);
  if (!a.queries.empty()) {
    const auto queries = load_prediction_csv(a.queries);
    if (queries.machines() != train.machines()) {
      throw DataError("query predictions have " + std::to_string(queries.machines()) +
                      " machines, training " + std::to_string(train.machines()));
    }
    const Vector predicted = model.predict_batch(queries.values());
    if (!a.out.empty()) save_vector_csv(predicted, "prediction", a.out);
    if (!a.truth.empty()) report["rmse"] = rmse(predicted, read_responses(a.truth, a.target));
  }
  std::cout << report.dump(2) << '\n';
}

void run_bound(const ProjectionDimQuery& q) {
  const auto b = min_projection_dim(q);
  const nlohmann::json out{{"C1", b.c1},
                           {"exact", b.exact},
                           {"min_m", b.min_dim},
                           {"large_n_approx", b.large_n_approx}};
  std::cout << out.dump(2) << '\n';
}

struct ExperimentArgs {
  std::string config;
  std::string preset;
  std::optional<int> model;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replications;
  std::string out;
  std::vector<std::string> overrides;
};

void print_summary(std::span<const RunResult> results) {
  std::printf("%-22s %5s %12s %12s %12s\n", "method", "runs", "mean_rmse", "std_rmse", "mean_sec");
  for (const auto& s : summarize(results)) {
    std::printf("%-22s %5zu %12.5f %12.5f", s.method.c_str(), s.count, s.mean_rmse, s.std_rmse);
    if (s.mean_seconds) std::printf(" %12.4f", *s.mean_seconds);
    std::printf("\n");
  }
}

int run_experiment_cmd(const ExperimentArgs& a) {
  std::map<std::string, std::string> settings;
  if (!a.config.empty()) settings = read_settings_file(a.config);
  // Flags override the file.
  for (const auto& [k, v] : parse_overrides(a.overrides)) settings[k] = v;
  if (!a.preset.empty()) settings["preset"] = a.preset;
  if (a.model) settings["model"] = std::to_string(*a.model);
  if (a.seed) settings["seed"] = std::to_string(*a.seed);
  if (a.replications) settings["replications"] = std::to_string(*a.replications);
  if (!a.out.empty()) settings["out"] = a.out;

  ExperimentConfig config;
  apply_settings(config, settings);
  if (config.output_dir.empty()) throw ConfigError("no output directory (use --out or out=)");
  config.validate();

  const auto outcome = run_experiment(config);
  write_results(outcome, config.output_dir);
  if (!outcome.runs.empty()) print_summary(outcome.runs);
  for (const auto& f : outcome.failures) {
    std::cerr << "replication " << f.replication << " (seed " << f.seed << ") failed: "
              << f.message << '\n';
  }
  if (outcome.runs.empty()) return exit_code(outcome.failures.front().kind);
  return 0;
}

void run_summarize(const std::string& in, const std::string& out) {
  const auto results = load_results(in);
  if (results.empty()) throw DataError("no results in '" + in + "'");
  write_summary(results, out.empty() ? in : out);
  print_summary(results);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-projection kernel aggregation of regression machines"};
  app.require_subcommand(1);
  // --h is a bandwidth here, so help is long-form only.
  app.set_help_flag("--help", "Print this help message and exit");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Draw a dataset from one of the five simulated models");
  c_sim->add_option("--model", sim.model, "Model id (1-5)")->required();
  c_sim->add_option("--n", sim.n, "Sample size (default: model default)");
  c_sim->add_option("--d", sim.d, "Input dimension (default: model default)");
  c_sim->add_option("--seed", sim.seed);
  c_sim->add_option("--out", sim.out, "Output CSV")->required();

  MachinesArgs mach;
  auto* c_mach = app.add_subcommand("machines", "Fit a machine grid and write prediction matrices");
  c_mach->add_option("--build", mach.build, "CSV the machines are fitted on")->required();
  c_mach->add_option("--target", mach.target, "Response column")->required();
  c_mach->add_option("--predict", mach.predict, "CSV to predict (repeatable)")->required();
  c_mach->add_option("--out", mach.out, "Prediction CSV per --predict")->required();
  c_mach->add_option("--grid", mach.grid, "desk or reference");
  c_mach->add_option("--seed", mach.seed);

  ProjectArgs proj;
  auto* c_proj = app.add_subcommand("project", "Apply a seeded Gaussian projection to predictions");
  c_proj->add_option("--in", proj.in)->required();
  c_proj->add_option("--out", proj.out)->required();
  c_proj->add_option("--m", proj.m, "Output dimension")->required();
  c_proj->add_option("--seed", proj.seed);

  AggregateArgs agg;
  auto* c_agg = app.add_subcommand("aggregate", "Fit the kernel aggregator and predict");
  c_agg->add_option("--features", agg.features, "Machine predictions on the aggregation rows")->required();
  c_agg->add_option("--responses", agg.responses, "CSV holding the aggregation responses")->required();
  c_agg->add_option("--target", agg.target, "Response column")->required();
  c_agg->add_option("--queries", agg.queries, "Machine predictions to aggregate");
  c_agg->add_option("--truth", agg.truth, "CSV with true responses of the queries");
  c_agg->add_option("--out", agg.out, "Aggregated predictions CSV");
  c_agg->add_option("--save-model", agg.model_out, "Write the fitted model as JSON");
  c_agg->add_option("--alpha", agg.alpha);
  c_agg->add_option("--sigma", agg.sigma);
  auto* h_opt = c_agg->add_option("--h", agg.h, "Fixed bandwidth (skips tuning)");
  c_agg->add_option("--tune", agg.tune, "gd or grid")->excludes(h_opt);
  c_agg->add_option("--m", agg.m, "Projection dimension");
  c_agg->add_flag("--full", agg.full, "Aggregate the unprojected predictions");
  c_agg->add_option("--seed", agg.seed, "Projection seed");

  ProjectionDimQuery bq;
  auto* c_bound = app.add_subcommand("bound", "Smallest projection dimension for an (eps, delta) guarantee");
  c_bound->add_option("--epsilon", bq.epsilon);
  c_bound->add_option("--delta", bq.delta);
  c_bound->add_option("--n", bq.n, "Aggregation sample size");
  c_bound->add_option("--h", bq.h);
  c_bound->add_option("--alpha", bq.alpha);
  c_bound->add_option("--sigma", bq.sigma);
  c_bound->add_option("--R0", bq.R0, "Bound on |Y| and on every machine");

  ExperimentArgs exp;
  auto* c_exp = app.add_subcommand("experiment", "Run the replicated experiment protocol");
  c_exp->add_option("--config", exp.config, "key=value settings file");
  c_exp->add_option("--preset", exp.preset, "desk or reference");
  c_exp->add_option("--model", exp.model);
  c_exp->add_option("--seed", exp.seed);
  c_exp->add_option("--replications", exp.replications);
  c_exp->add_option("--out", exp.out, "Output directory");
  c_exp->add_option("--set", exp.overrides, "Extra key=value setting (repeatable)");

  std::string sum_in, sum_out;
  auto* c_sum = app.add_subcommand("summarize", "Recompute summary tables from result files");
  c_sum->add_option("--in", sum_in, "Result directory")->required();
  c_sum->add_option("--out", sum_out, "Where to write summary files (default: --in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*c_sim) run_simulate(sim);
    else if (*c_mach) run_machines(mach);
    else if (*c_proj) run_project(proj);
    else if (*c_agg) run_aggregate(agg);
    else if (*c_bound) run_bound(bq);
    else if (*c_exp) return run_experiment_cmd(exp);
    else if (*c_sum) run_summarize(sum_in, sum_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
