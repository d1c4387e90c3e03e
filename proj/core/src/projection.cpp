#include "rpcomb/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rpcomb/error.hpp"
#include "rpcomb/random.hpp"

namespace rpcomb {

ProjectionMatrix::ProjectionMatrix(Matrix values, std::uint64_t seed)
    : values_(std::move(values)), seed_(seed) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw ConfigError("projection matrix dimensions must be positive");
  }
  if (!values_.allFinite()) throw NumericalError("projection matrix has non-finite entries");
}

ProjectionMatrix sample_projection(std::size_t input_dim, std::size_t output_dim,
                                   std::uint64_t seed) {
  if (input_dim < 1 || output_dim < 1) {
    throw ConfigError("sample_projection: dimensions must be >= 1 (got M=" +
                      std::to_string(input_dim) + ", m=" + std::to_string(output_dim) + ")");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(output_dim));
  Matrix g(static_cast<Eigen::Index>(input_dim), static_cast<Eigen::Index>(output_dim));
  std::uint64_t k = 0;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = scale * CounterRng::normal_at(seed, k++);
  }
  return ProjectionMatrix(std::move(g), seed);
}

Matrix project(const Matrix& features, const ProjectionMatrix& g) {
  if (static_cast<std::size_t>(features.cols()) != g.input_dim()) {
    throw DataError("project: features have " + std::to_string(features.cols()) +
                    " columns but the projection expects " + std::to_string(g.input_dim()));
  }
  return features * g.values();
}

PredictionMatrix project(const PredictionMatrix& features, const ProjectionMatrix& g) {
  Matrix out = project(features.values(), g);
  std::vector<std::string> labels;
  labels.reserve(g.output_dim());
  for (std::size_t j = 0; j < g.output_dim(); ++j) labels.push_back("proj" + std::to_string(j + 1));
  return PredictionMatrix(std::move(out), std::move(labels));
}

DistortionReport distortion_report(const Matrix& original, const Matrix& projected,
                                   std::span<const IndexPair> pairs,
                                   std::span<const double> deltas) {
  if (original.rows() != projected.rows()) {
    throw DataError("distortion_report: row counts differ");
  }
  const auto n = static_cast<std::size_t>(original.rows());
  DistortionReport report;
  for (const auto& [a, b] : pairs) {
    if (a >= n || b >= n) throw DataError("distortion_report: pair index out of range");
    if (a == b) throw DataError("distortion_report: pair indices must differ");
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    const double before = (original.row(ia) - original.row(ib)).squaredNorm();
    if (!(before > 0.0)) {
      ++report.skipped_zero_distance;
      continue;
    }
    const double after = (projected.row(ia) - projected.row(ib)).squaredNorm();
    const double ratio = after / before;
    report.ratios.push_back(ratio);
    report.max_abs_deviation = std::max(report.max_abs_deviation, std::abs(ratio - 1.0));
  }
  report.pair_count = report.ratios.size();
  for (const double delta : deltas) {
    std::size_t over = 0;
    for (const double r : report.ratios) over += std::abs(r - 1.0) > delta;
    report.fraction_exceeding[delta] =
        report.pair_count ? static_cast<double>(over) / static_cast<double>(report.pair_count) : 0.0;
  }
  return report;
}

DistortionReport distortion_report(const PredictionMatrix& original,
                                   const PredictionMatrix& projected,
                                   std::span<const IndexPair> pairs,
                                   std::span<const double> deltas) {
  return distortion_report(original.values(), projected.values(), pairs, deltas);
}

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
}

void check_dim(std::size_t m, const char* what) {
  if (m < 1) throw ConfigError(std::string(what) + " must be >= 1");
}

}  // namespace

double chernoff_upper(double delta, std::size_t m) {
  check_delta(delta);
  check_dim(m, "m");
  // -delta + log1p(delta) avoids cancellation for small delta.
  return std::exp(static_cast<double>(m) * (std::log1p(delta) - delta) / 2.0);
}

double chernoff_lower(double delta, std::size_t m) {
  check_delta(delta);
  check_dim(m, "m");
  return std::exp(static_cast<double>(m) * (delta + std::log1p(-delta)) / 2.0);
}

UnionBound jl_union_bound(double delta, std::size_t m, std::size_t n) {
  check_delta(delta);
  check_dim(m, "m");
  check_dim(n, "n");
  const double exponent =
      -static_cast<double>(m) * (delta * delta / 2.0 - delta * delta * delta / 3.0) / 2.0;
  UnionBound out;
  out.raw = 2.0 * static_cast<double>(n) * std::exp(exponent);
  out.clamped = std::clamp(out.raw, 0.0, 1.0);
  return out;
}

ProjectionDimBound min_projection_dim(const ProjectionDimQuery& q) {
  if (!(q.epsilon > 0.0) || !std::isfinite(q.epsilon)) throw ConfigError("epsilon must be > 0");
  check_delta(q.delta);
  check_dim(q.n, "n");
  if (!(q.h > 0.0) || !std::isfinite(q.h)) throw ConfigError("h must be > 0");
  if (!(q.alpha >= 0.0) || !std::isfinite(q.alpha)) throw ConfigError("alpha must be >= 0");
  if (!(q.sigma > 0.0) || !std::isfinite(q.sigma)) throw ConfigError("sigma must be > 0");
  if (!(q.R0 > 0.0) || !std::isfinite(q.R0)) throw ConfigError("R0 must be > 0");

  const double n = static_cast<double>(q.n);
  const double log_c1 = std::log(3.0) + 2.0 * std::log(2.0 + q.alpha) +
                        2.0 * (1.0 + q.alpha) * std::log(2.0 * q.R0) - 2.0 * std::log(q.sigma);
  // 1 - (1 - delta)^(1/n), stable for large n.
  const double tail = -std::expm1(std::log1p(-q.delta) / n);
  const double log_ratio = std::log(2.0) - std::log(tail);  // log(2 / tail) > 0
  const double log_denominator = 2.0 * q.alpha * std::log(q.h) + 2.0 * std::log(q.epsilon);
  const double log_exact = log_c1 + std::log(log_ratio) - log_denominator;

  constexpr double kLimit = 9.0e18;
  if (!(log_exact < std::log(kLimit))) {
    throw NumericalError("min_projection_dim: bound exceeds the int64 range");
  }

  ProjectionDimBound out;
  out.c1 = std::exp(log_c1);
  out.exact = std::exp(log_exact);
  out.min_dim = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(out.exact)));
  const double approx_log = std::log(2.0 * n) - std::log(-std::log1p(-q.delta));
  out.large_n_approx = std::exp(log_c1 - log_denominator) * approx_log;
  return out;
}

}  // namespace rpcomb
