#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "rpcomb/datamodel.hpp"
#include "rpcomb/projection.hpp"

namespace rpcomb {

/// Exponential kernel K(t) = exp(-t^alpha / sigma) with bandwidth form
/// K_h(t) = K(t / h).
struct KernelSpec {
  double alpha = 2.0;
  double sigma = 1.0;
  double h = 1.0;

  /// Exponent t^alpha / (sigma h^alpha) of K_h(t), so K_h(t) = exp(-exponent).
  double exponent(double t) const noexcept;
  double operator()(double t) const noexcept;

  void validate() const;
};

/// Kernel shape without a bandwidth; the input to bandwidth tuning.
struct KernelShape {
  double alpha = 2.0;
  double sigma = 1.0;
};

enum class QueryInput {
  kRaw,        // M-wide machine predictions; projected models apply G first
  kProjected,  // already in the model's feature space
};

/// Kernel-weighted average of the aggregation responses, weighting row i by
/// K_h(||query - features_i||). With a projection the features are the
/// projected rows and the norm is taken in R^m.
class AggregatorModel {
 public:
  AggregatorModel(Matrix features, Vector responses, KernelSpec kernel,
                  std::optional<ProjectionMatrix> projection = std::nullopt);
  AggregatorModel(const AggregatorModel& other);
  AggregatorModel& operator=(const AggregatorModel& other);
  AggregatorModel(AggregatorModel&&) noexcept;
  AggregatorModel& operator=(AggregatorModel&&) noexcept;

  /// `query` must be width() wide (already projected for projected models).
  double predict_one(std::span<const double> query) const;
  Vector predict_batch(const Matrix& queries, QueryInput input = QueryInput::kRaw) const;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(features_.rows()); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  /// Width of raw queries accepted by predict_batch(kRaw).
  std::size_t raw_width() const noexcept;

  const Matrix& features() const noexcept { return features_; }
  const Vector& responses() const noexcept { return responses_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  const std::optional<ProjectionMatrix>& projection() const noexcept { return projection_; }

  /// Number of queries where every weight vanished and 0 was returned. The
  /// exponent shift makes this unreachable for finite inputs.
  std::uint64_t zero_weight_fallbacks() const noexcept { return fallbacks_.load(); }

  /// Same data with another bandwidth/kernel.
  AggregatorModel with_kernel(const KernelSpec& kernel) const;

 private:
  Matrix features_;
  Vector responses_;
  KernelSpec kernel_;
  std::optional<ProjectionMatrix> projection_;
  mutable std::atomic<std::uint64_t> fallbacks_{0};
};

AggregatorModel build_full(const PredictionMatrix& features, const Vector& responses,
                           const KernelSpec& kernel);
AggregatorModel build_projected(const PredictionMatrix& features, const Vector& responses,
                                const KernelSpec& kernel, const ProjectionMatrix& g);

/// Leave-one-out squared error of the aggregator on its own rows,
///   J(h) = (1/n) sum_i (Y_i - g^{(-i)}(row_i))^2,
/// with its exact derivative in h. Pairwise distances are computed once.
class LooObjective {
 public:
  LooObjective(const Matrix& features, const Vector& responses, KernelShape shape);

  double value(double h) const;
  /// Returns {J(h), dJ/dh}.
  std::pair<double, double> value_and_gradient(double h) const;

  double median_distance() const noexcept { return median_distance_; }
  double max_distance() const noexcept { return max_distance_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(responses_.size()); }

 private:
  Vector responses_;
  KernelShape shape_;
  Matrix dist_pow_;  // ||x_i - x_j||^alpha / sigma
  double median_distance_ = 0.0;
  double max_distance_ = 0.0;
};

enum class TuneMethod { kGradientDescent, kGrid };

struct TuneOptions {
  // Gradient descent with Armijo backtracking.
  double initial_step_fraction = 0.1;  // first trial moves h by this fraction
  double contraction = 0.5;
  std::size_t max_backtracks = 30;
  double armijo_c = 1e-4;
  double relative_tolerance = 1e-6;
  std::size_t max_iterations = 200;
  /// h is kept above floor_fraction * max pairwise distance.
  double floor_fraction = 1e-12;
  /// Starting bandwidth; 0 selects the median pairwise distance.
  double initial_h = 0.0;

  // Grid search: grid_points log-spaced values spanning
  // [grid_low, grid_high] * median pairwise distance, unless `grid` is set.
  std::size_t grid_points = 200;
  double grid_low = 1e-3;
  double grid_high = 1e2;
  std::vector<double> grid;
};

struct TuneTrace {
  std::vector<double> h_path;
  std::vector<double> objective_path;
  bool converged = false;
  bool hit_floor = false;
  std::size_t iterations = 0;
};

struct TuneResult {
  KernelSpec kernel;
  TuneTrace trace;
};

/// Chooses h minimizing the leave-one-out objective on the aggregation rows.
TuneResult tune_bandwidth(const Matrix& features, const Vector& responses,
                          const KernelShape& shape, TuneMethod method,
                          const TuneOptions& options = {});

/// The log-spaced candidate list used by TuneMethod::kGrid.
std::vector<double> bandwidth_grid(const LooObjective& objective, const TuneOptions& options);

struct GapReport {
  std::size_t queries = 0;
  double max_gap = 0.0;
  double mean_gap = 0.0;
  std::vector<double> gaps;
  /// epsilon -> fraction of queries with |g_full - g_projected| > epsilon.
  std::map<double, double> fraction_exceeding;
};

/// Compares the full and projected aggregators on raw M-wide queries.
GapReport full_vs_projected_gap(const AggregatorModel& full, const AggregatorModel& projected,
                                const Matrix& raw_queries,
                                std::span<const double> epsilons = {});

/// JSON container with hex-float arrays; reloading reproduces predictions
/// bit-for-bit.
void save_model(const AggregatorModel& model, const std::filesystem::path& path);
AggregatorModel load_model(const std::filesystem::path& path);

}  // namespace rpcomb
