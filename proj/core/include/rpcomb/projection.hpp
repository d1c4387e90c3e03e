#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "rpcomb/datamodel.hpp"

namespace rpcomb {

/// M x m Johnson-Lindenstrauss matrix with iid N(0, 1/m) entries.
class ProjectionMatrix {
 public:
  /// Wraps explicit values (identity or zero matrices in tests). `seed` is
  /// informational only.
  explicit ProjectionMatrix(Matrix values, std::uint64_t seed = 0);

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  std::uint64_t seed() const noexcept { return seed_; }
  const Matrix& values() const noexcept { return values_; }

 private:
  Matrix values_;
  std::uint64_t seed_;
};

/// Entry (i, j) is the (i * m + j)-th Gaussian of the counter stream `seed`,
/// scaled by 1/sqrt(m).
ProjectionMatrix sample_projection(std::size_t input_dim, std::size_t output_dim,
                                   std::uint64_t seed);

/// r(X) * G. bound_R0 is recomputed on the projected values.
PredictionMatrix project(const PredictionMatrix& features, const ProjectionMatrix& g);
Matrix project(const Matrix& features, const ProjectionMatrix& g);

struct DistortionReport {
  std::size_t pair_count = 0;
  /// Squared projected distance over squared original distance, per pair.
  std::vector<double> ratios;
  double max_abs_deviation = 0.0;
  /// delta -> fraction of pairs with |ratio - 1| > delta.
  std::map<double, double> fraction_exceeding;
  /// Requested pairs skipped because the original distance was zero.
  std::size_t skipped_zero_distance = 0;
};

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Compares squared pairwise distances before and after projection. Pairs with
/// zero original distance are counted in skipped_zero_distance and excluded.
DistortionReport distortion_report(const Matrix& original, const Matrix& projected,
                                   std::span<const IndexPair> pairs,
                                   std::span<const double> deltas = {});
DistortionReport distortion_report(const PredictionMatrix& original,
                                   const PredictionMatrix& projected,
                                   std::span<const IndexPair> pairs,
                                   std::span<const double> deltas = {});

/// Upper-tail Chernoff bound for chi2(m)/m: exp(m [-delta + ln(1 + delta)] / 2).
double chernoff_upper(double delta, std::size_t m);
/// Lower-tail Chernoff bound for chi2(m)/m: exp(m [delta + ln(1 - delta)] / 2).
double chernoff_lower(double delta, std::size_t m);

struct UnionBound {
  double raw = 0.0;      // 2 n exp(-m (delta^2/2 - delta^3/3) / 2)
  double clamped = 0.0;  // raw clamped to [0, 1]
};

/// Failure probability that some of n squared distances to a fixed point is
/// distorted by more than delta.
UnionBound jl_union_bound(double delta, std::size_t m, std::size_t n);

struct ProjectionDimBound {
  std::int64_t min_dim = 0;   // smallest integer m satisfying the bound
  double c1 = 0.0;            // 3 (2 + alpha)^2 (2 R0)^(2 (1 + alpha)) / sigma^2
  double exact = 0.0;         // real-valued right-hand side of m >= ...
  double large_n_approx = 0.0;  // C1 log(-2n / log(1 - delta)) / (h^(2 alpha) eps^2)
};

struct ProjectionDimQuery {
  double epsilon = 0.1;
  double delta = 0.05;
  std::size_t n = 1;
  double h = 1.0;
  double alpha = 2.0;
  double sigma = 1.0;
  double R0 = 1.0;
};

/// Smallest projection dimension m with
///   m >= C1 log(2 / (1 - (1 - delta)^(1/n))) / (h^(2 alpha) eps^2)
/// which keeps P(|g_full - g_projected| > eps) <= delta for responses and
/// machines bounded by R0. Evaluated in log space; throws NumericalError when
/// the bound does not fit in an int64.
ProjectionDimBound min_projection_dim(const ProjectionDimQuery& q);

}  // namespace rpcomb
