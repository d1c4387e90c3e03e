#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpcomb/aggregator.hpp"
#include "rpcomb/datamodel.hpp"
#include "rpcomb/error.hpp"
#include "rpcomb/learners.hpp"
#include "rpcomb/simgen.hpp"

namespace rpcomb {

struct DataSource {
  enum class Kind { kSimulated, kCsv };
  Kind kind = Kind::kSimulated;
  SimModelSpec sim = SimModelSpec::defaults(1);
  std::filesystem::path csv_path;
  std::string target;
};

struct ExperimentConfig {
  DataSource source;
  GridSpec grid = GridSpec::desk();
  std::vector<std::size_t> m_sweep{2, 5, 20};
  bool include_full = true;
  std::size_t replications = 5;
  KernelShape kernel;
  TuneMethod tune = TuneMethod::kGradientDescent;
  TuneOptions tune_options;
  LearnerOptions learner_options;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  /// Replications run on this many worker threads (0: hardware concurrency).
  std::size_t threads = 1;

  /// Model defaults, 1000-machine grid, m in {2..9} U {100, ..., 900},
  /// 30 replications.
  static ExperimentConfig reference(int model_id);
  /// n = 200, 60-machine grid, m in {2, 5, 20}, 5 replications.
  static ExperimentConfig desk(int model_id);

  /// Throws ConfigError for inconsistent settings.
  void validate() const;
};

/// Applies `key=value` settings (see README for the key list). A `preset`
/// key is applied before every other key.
void apply_settings(ExperimentConfig& config, const std::map<std::string, std::string>& settings);

/// Reads a flat key=value file; '#' starts a comment.
std::map<std::string, std::string> read_settings_file(const std::filesystem::path& path);

/// Parses "2,3,10:15,100:900:100" style lists.
std::vector<std::size_t> parse_size_list(const std::string& text);
/// Like parse_size_list for reals; also accepts "log:lo:hi:count".
std::vector<double> parse_real_list(const std::string& text);

struct MachineScore {
  std::string label;
  Family family = Family::kKnn;
  double rmse = 0.0;
};

struct AggregatorScore {
  std::string method;    // "Comb_<m>" or "Comb_Full"
  std::size_t m = 0;     // 0 for the full aggregator
  double rmse = 0.0;
  double seconds = 0.0;  // projection + tuning + prediction
  double h = 0.0;
  std::size_t tune_iterations = 0;
  bool tune_converged = false;
  std::uint64_t projection_seed = 0;
};

struct RunResult {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  std::vector<MachineScore> machines;
  std::vector<AggregatorScore> aggregators;
  /// Test RMSE of predicting the build-partition mean everywhere.
  double baseline_rmse = 0.0;
};

struct ReplicationFailure {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  std::string stage;
  std::string message;
  ErrorKind kind = ErrorKind::kNumerical;
};

struct ExperimentOutcome {
  std::vector<RunResult> runs;  // ordered by replication
  std::vector<ReplicationFailure> failures;
};

/// Seed of replication r: everything in that replication derives from it.
std::uint64_t replication_seed(std::uint64_t base_seed, std::size_t replication);
/// Seed of the projection used for dimension m in replication r.
std::uint64_t projection_seed(std::uint64_t base_seed, std::size_t replication, std::size_t m);

/// Error raised inside a replication, tagged with the failing stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// One replication: split 80/20, halve the training part, fit the grid on the
/// build half, tune and evaluate the full aggregator and one projected
/// aggregator per m. `data` is required for CSV sources and ignored for
/// simulated ones (they draw fresh data per replication).
RunResult run_replication(const ExperimentConfig& config, std::size_t replication,
                          const Dataset* data = nullptr);

/// All replications; failures are collected rather than aborting the rest.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

struct MethodSummary {
  std::string method;
  std::size_t count = 0;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;  // sample standard deviation; 0 when count == 1
  bool degenerate = false;  // fewer than two replications
  std::optional<double> mean_seconds;
  std::optional<double> median_seconds;
};

/// Per method: best_<family>, worst_<family>, baseline_mean, Comb_<m>, Comb_Full.
std::vector<MethodSummary> summarize(std::span<const RunResult> results);

/// Lowest test RMSE per family.
std::map<Family, double> best_machine_rmse(const RunResult& result);
std::map<Family, double> worst_machine_rmse(const RunResult& result);

struct TimingStats {
  std::string method;
  std::size_t m = 0;
  double mean_seconds = 0.0;
  double median_seconds = 0.0;
  /// mean(Comb_Full seconds) / mean(this method's seconds); nullopt without a
  /// full aggregator.
  std::optional<double> full_ratio;
};

std::vector<TimingStats> timing_report(std::span<const RunResult> results);

/// Writes runs.csv, machines.csv, timings.csv, summary.csv, summary.json and,
/// when replications failed, failures.csv into `dir`.
void write_results(const ExperimentOutcome& outcome, const std::filesystem::path& dir);
/// Reads runs.csv, machines.csv and timings.csv back.
std::vector<RunResult> load_results(const std::filesystem::path& dir);
void write_summary(std::span<const RunResult> results, const std::filesystem::path& dir);

}  // namespace rpcomb
