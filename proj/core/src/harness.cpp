#include "rpcomb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "rpcomb/projection.hpp"
#include "rpcomb/random.hpp"

namespace rpcomb {

namespace {

std::vector<std::size_t> reference_m_sweep() {
  std::vector<std::size_t> m;
  for (std::size_t k = 2; k <= 9; ++k) m.push_back(k);
  for (std::size_t k = 100; k <= 900; k += 100) m.push_back(k);
  return m;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_real(const std::string& key, const std::string& text) {
  const auto v = csv::parse_double(trim(text));
  if (!v || !std::isfinite(*v)) throw ConfigError("setting '" + key + "': not a number: '" + text + "'");
  return *v;
}

std::uint64_t to_uint(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("setting '" + key + "': not a non-negative integer: '" + text + "'");
  }
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    throw ConfigError("setting '" + key + "': integer out of range: '" + text + "'");
  }
}

bool to_bool(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("setting '" + key + "': expected true/false, got '" + text + "'");
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> split_colons(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) out.push_back(trim(item));
  return out;
}

}  // namespace

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : split_commas(text)) {
    const auto parts = split_colons(item);
    if (parts.size() == 1) {
      out.push_back(to_uint("list", parts[0]));
    } else if (parts.size() == 2 || parts.size() == 3) {
      const auto lo = to_uint("list", parts[0]);
      const auto hi = to_uint("list", parts[1]);
      const auto step = parts.size() == 3 ? to_uint("list", parts[2]) : 1;
      if (step == 0 || hi < lo) throw ConfigError("bad range '" + item + "'");
      for (auto v = lo; v <= hi; v += step) out.push_back(v);
    } else {
      throw ConfigError("bad list item '" + item + "'");
    }
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_commas(text)) {
    const auto parts = split_colons(item);
    if (parts.size() == 1) {
      out.push_back(to_real("list", parts[0]));
    } else if (parts.size() == 4 && parts[0] == "log") {
      const auto values = log_spaced(to_real("list", parts[1]), to_real("list", parts[2]),
                                     to_uint("list", parts[3]));
      out.insert(out.end(), values.begin(), values.end());
    } else {
      throw ConfigError("bad list item '" + item + "'");
    }
  }
  return out;
}

ExperimentConfig ExperimentConfig::reference(int model_id) {
  ExperimentConfig c;
  c.source.kind = DataSource::Kind::kSimulated;
  c.source.sim = SimModelSpec::defaults(model_id);
  c.grid = GridSpec::reference();
  c.m_sweep = reference_m_sweep();
  c.replications = 30;
  return c;
}

ExperimentConfig ExperimentConfig::desk(int model_id) {
  ExperimentConfig c;
  c.source.kind = DataSource::Kind::kSimulated;
  c.source.sim = SimModelSpec::defaults(model_id);
  c.source.sim.n = 200;
  c.grid = GridSpec::desk();
  c.m_sweep = {2, 5, 20};
  c.replications = 5;
  return c;
}

void ExperimentConfig::validate() const {
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
  KernelSpec{kernel.alpha, kernel.sigma, 1.0}.validate();
  const auto machines = grid.machine_count();
  if (machines == 0) throw ConfigError("machine grid is empty");
  for (const auto m : m_sweep) {
    if (m < 1 || m > machines) {
      throw ConfigError("projection dimension m=" + std::to_string(m) + " outside [1, M=" +
                        std::to_string(machines) + "]");
    }
  }
  if (m_sweep.empty() && !include_full) throw ConfigError("no aggregator requested");
  if (source.kind == DataSource::Kind::kCsv) {
    if (source.csv_path.empty()) throw ConfigError("csv source needs a path");
    if (source.target.empty()) throw ConfigError("csv source needs a target column");
  } else {
    (void)SimModelSpec::defaults(source.sim.model_id);
  }
}

void apply_settings(ExperimentConfig& config, const std::map<std::string, std::string>& settings) {
  if (const auto it = settings.find("preset"); it != settings.end()) {
    int model = config.source.sim.model_id;
    if (const auto m = settings.find("model"); m != settings.end()) {
      model = static_cast<int>(to_uint("model", m->second));
    }
    const auto preset = trim(it->second);
    ExperimentConfig fresh;
    if (preset == "reference") fresh = ExperimentConfig::reference(model);
    else if (preset == "desk") fresh = ExperimentConfig::desk(model);
    else throw ConfigError("unknown preset '" + preset + "' (expected reference or desk)");
    fresh.source.kind = config.source.kind;
    fresh.source.csv_path = config.source.csv_path;
    fresh.source.target = config.source.target;
    fresh.seed = config.seed;
    fresh.output_dir = config.output_dir;
    fresh.threads = config.threads;
    config = std::move(fresh);
  }

  // The model goes first so that n and d overrides land on top of it.
  if (const auto it = settings.find("model"); it != settings.end()) {
    const auto id = static_cast<int>(to_uint("model", it->second));
    const auto previous = SimModelSpec::defaults(config.source.sim.model_id);
    const auto defaults = SimModelSpec::defaults(id);
    // A sample size left at the old model's default follows the new model.
    if (config.source.sim.n == previous.n) config.source.sim.n = defaults.n;
    config.source.sim.model_id = id;
    config.source.sim.d = defaults.d;
  }

  for (const auto& [key, value] : settings) {
    if (key == "preset" || key == "model") continue;
    if (key == "source") {
      const auto v = trim(value);
      if (v == "sim") config.source.kind = DataSource::Kind::kSimulated;
      else if (v == "csv") config.source.kind = DataSource::Kind::kCsv;
      else throw ConfigError("source must be sim or csv");
    } else if (key == "n") {
      config.source.sim.n = to_uint(key, value);
    } else if (key == "d") {
      config.source.sim.d = to_uint(key, value);
    } else if (key == "csv") {
      config.source.csv_path = trim(value);
      config.source.kind = DataSource::Kind::kCsv;
    } else if (key == "target") {
      config.source.target = trim(value);
    } else if (key == "knn_ks") {
      config.grid.knn_ks = parse_size_list(value);
    } else if (key == "enet_alphas" || key == "enet_lambdas") {
      std::vector<double> alphas, lambdas;
      for (const auto& [a, l] : config.grid.enet_grid) {
        if (std::find(alphas.begin(), alphas.end(), a) == alphas.end()) alphas.push_back(a);
        if (std::find(lambdas.begin(), lambdas.end(), l) == lambdas.end()) lambdas.push_back(l);
      }
      if (key == "enet_alphas") alphas = parse_real_list(value);
      else lambdas = parse_real_list(value);
      config.grid.enet_grid.clear();
      for (const double a : alphas) {
        for (const double l : lambdas) config.grid.enet_grid.emplace_back(a, l);
      }
    } else if (key == "tree_ntrees") {
      config.grid.set_tree_ntrees(parse_size_list(value));
    } else if (key == "bag_ntrees") {
      config.grid.bagging_ntrees = parse_size_list(value);
    } else if (key == "rf_ntrees") {
      config.grid.forest_ntrees = parse_size_list(value);
    } else if (key == "boost_ntrees") {
      config.grid.boosting_ntrees = parse_size_list(value);
    } else if (key == "families") {
      config.grid.families_enabled.clear();
      for (const auto& name : split_commas(value)) {
        const auto f = parse_family(name);
        if (!f) throw ConfigError("unknown family '" + name + "'");
        config.grid.families_enabled.insert(*f);
      }
    } else if (key == "m_sweep") {
      config.m_sweep = parse_size_list(value);
    } else if (key == "full") {
      config.include_full = to_bool(key, value);
    } else if (key == "replications") {
      config.replications = to_uint(key, value);
    } else if (key == "alpha") {
      config.kernel.alpha = to_real(key, value);
    } else if (key == "sigma") {
      config.kernel.sigma = to_real(key, value);
    } else if (key == "tune") {
      const auto v = trim(value);
      if (v == "gd") config.tune = TuneMethod::kGradientDescent;
      else if (v == "grid") config.tune = TuneMethod::kGrid;
      else throw ConfigError("tune must be gd or grid");
    } else if (key == "seed") {
      config.seed = to_uint(key, value);
    } else if (key == "out") {
      config.output_dir = trim(value);
    } else if (key == "test_fraction") {
      config.test_fraction = to_real(key, value);
    } else if (key == "threads") {
      config.threads = to_uint(key, value);
    } else {
      throw ConfigError("unknown setting '" + key + "'");
    }
  }
}

std::map<std::string, std::string> read_settings_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t replication_seed(std::uint64_t base_seed, std::size_t replication) {
  return derive_seed(base_seed, {0x5245504CULL, replication});  // "REPL"
}

std::uint64_t projection_seed(std::uint64_t base_seed, std::size_t replication, std::size_t m) {
  return derive_seed(base_seed, {0x50524F4AULL, replication, m});  // "PROJ"
}

StageError::StageError(std::string stage, const Error& cause)
    : Error(cause.kind(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}

namespace {

template <typename F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, NumericalError(e.what()));
  }
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

RunResult run_replication(const ExperimentConfig& config, std::size_t replication,
                          const Dataset* data) {
  const std::uint64_t seed = replication_seed(config.seed, replication);
  RunResult result;
  result.replication = replication;
  result.seed = seed;

  const Dataset full = run_stage("data", [&] {
    if (config.source.kind == DataSource::Kind::kSimulated) {
      SimModelSpec spec = config.source.sim;
      spec.seed = derive_seed(seed, {1});
      return generate(spec);
    }
    if (data == nullptr) throw ConfigError("csv replication called without data");
    return *data;
  });

  const auto split = run_stage("split", [&] {
    return split_indices(full.rows(), {config.test_fraction, derive_seed(seed, {2})});
  });
  const Dataset train = full.subset(split.train);
  const Dataset test = full.subset(split.test);
  const auto partition = run_stage("partition", [&] {
    return partition_train(train.rows(), derive_seed(seed, {3}));
  });
  const Dataset build = train.subset(partition.build_indices);
  const Dataset aggregation = train.subset(partition.aggregation_indices);

  // Machines only ever see the build half.
  const auto machines = run_stage("fit", [&] {
    return fit_grid(build, config.grid, derive_seed(seed, {4}), config.learner_options);
  });

  const double response_bound = build.response().cwiseAbs().maxCoeff();
  const auto agg_pm = run_stage("predict", [&] {
    return build_prediction_matrix(machines, aggregation, response_bound);
  });
  const auto test_pm = run_stage("predict", [&] {
    return build_prediction_matrix(machines, test, response_bound);
  });

  for (std::size_t j = 0; j < machines.size(); ++j) {
    const Vector col = test_pm.values().col(static_cast<Eigen::Index>(j));
    result.machines.push_back(
        {machines[j].spec().label, machines[j].spec().family, rmse(col, test.response())});
  }

  const Vector constant = Vector::Constant(test.response().size(), build.response().mean());
  result.baseline_rmse = rmse(constant, test.response());

  auto evaluate = [&](std::size_t m) {
    const std::string method = m == 0 ? "Comb_Full" : "Comb_" + std::to_string(m);
    return run_stage("aggregate " + method, [&] {
      AggregatorScore score;
      score.method = method;
      score.m = m;
      const auto start = Clock::now();
      Matrix features = agg_pm.values();
      Matrix queries = test_pm.values();
      std::optional<ProjectionMatrix> g;
      if (m > 0) {
        score.projection_seed = projection_seed(config.seed, replication, m);
        g = sample_projection(agg_pm.machines(), m, score.projection_seed);
        features = project(features, *g);
        queries = project(queries, *g);
      }
      const auto tuned = tune_bandwidth(features, aggregation.response(), config.kernel,
                                        config.tune, config.tune_options);
      const AggregatorModel model(std::move(features), aggregation.response(), tuned.kernel,
                                  std::move(g));
      const Vector predicted = model.predict_batch(queries, QueryInput::kProjected);
      score.seconds = seconds_since(start);
      score.rmse = rmse(predicted, test.response());
      score.h = tuned.kernel.h;
      score.tune_iterations = tuned.trace.iterations;
      score.tune_converged = tuned.trace.converged;
      if (model.zero_weight_fallbacks() != 0) {
        throw NumericalError("aggregator hit the zero-weight fallback");
      }
      return score;
    });
  };

  for (const auto m : config.m_sweep) result.aggregators.push_back(evaluate(m));
  if (config.include_full) result.aggregators.push_back(evaluate(0));
  return result;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::optional<Dataset> data;
  if (config.source.kind == DataSource::Kind::kCsv) {
    data = load_csv(config.source.csv_path, config.source.target);
  }

  const std::size_t reps = config.replications;
  std::vector<std::optional<RunResult>> slots(reps);
  std::vector<std::optional<ReplicationFailure>> failures(reps);

  auto work = [&](std::size_t r) {
    try {
      slots[r] = run_replication(config, r, data ? &*data : nullptr);
    } catch (const StageError& e) {
      failures[r] = ReplicationFailure{r, replication_seed(config.seed, r), e.stage(), e.what(), e.kind()};
    } catch (const Error& e) {
      failures[r] = ReplicationFailure{r, replication_seed(config.seed, r), "unknown", e.what(), e.kind()};
    }
  };

  std::size_t threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, reps);
  if (threads == 1) {
    for (std::size_t r = 0; r < reps; ++r) work(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < reps; r = next++) work(r);
      });
    }
  }

  ExperimentOutcome outcome;
  for (std::size_t r = 0; r < reps; ++r) {
    if (slots[r]) outcome.runs.push_back(std::move(*slots[r]));
    if (failures[r]) outcome.failures.push_back(std::move(*failures[r]));
  }
  return outcome;
}

}  // namespace rpcomb
