#include "rpcomb/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "csv.hpp"
#include "rpcomb/error.hpp"
#include "rpcomb/learners.hpp"

namespace rpcomb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// (sq)^(alpha/2): the kernel exponent numerator from a squared distance.
double distance_power(double squared, double alpha) noexcept {
  if (alpha == 2.0) return squared;
  if (alpha == 0.0) return 1.0;
  return std::pow(squared, 0.5 * alpha);
}

double squared_distance(const double* a, const double* b, std::size_t d) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

/// Shifted weights exp(-(e_i - min e)) from exponents e_i. When even the
/// smallest exponent overflows, the h -> 0 limit applies: only rows at the
/// minimal squared distance keep weight 1.
void shifted_weights(std::span<const double> exponents, std::span<const double> squared,
                     std::span<double> weights) noexcept {
  double e_min = kInf;
  for (const double e : exponents) e_min = std::min(e_min, e);
  if (std::isfinite(e_min)) {
    for (std::size_t i = 0; i < exponents.size(); ++i) weights[i] = std::exp(-(exponents[i] - e_min));
    return;
  }
  double sq_min = kInf;
  for (const double s : squared) sq_min = std::min(sq_min, s);
  for (std::size_t i = 0; i < squared.size(); ++i) weights[i] = squared[i] == sq_min ? 1.0 : 0.0;
}

}  // namespace

double KernelSpec::exponent(double t) const noexcept {
  if (alpha == 0.0) return 1.0 / sigma;
  return std::pow(std::abs(t) / h, alpha) / sigma;
}

double KernelSpec::operator()(double t) const noexcept { return std::exp(-exponent(t)); }

void KernelSpec::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("kernel alpha must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("kernel sigma must be > 0");
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("kernel bandwidth h must be > 0");
}

// ---------------------------------------------------------------------------

AggregatorModel::AggregatorModel(Matrix features, Vector responses, KernelSpec kernel,
                                 std::optional<ProjectionMatrix> projection)
    : features_(std::move(features)),
      responses_(std::move(responses)),
      kernel_(kernel),
      projection_(std::move(projection)) {
  kernel_.validate();
  if (features_.rows() < 1 || features_.cols() < 1) {
    throw DataError("aggregator needs at least one row and one feature");
  }
  if (features_.rows() != responses_.size()) {
    throw DataError("aggregator: " + std::to_string(features_.rows()) + " feature rows but " +
                    std::to_string(responses_.size()) + " responses");
  }
  if (projection_ && projection_->output_dim() != width()) {
    throw DataError("aggregator: projection output dimension " +
                    std::to_string(projection_->output_dim()) + " != feature width " +
                    std::to_string(width()));
  }
  if (!features_.allFinite() || !responses_.allFinite()) {
    throw DataError("aggregator: non-finite features or responses");
  }
}

AggregatorModel::AggregatorModel(const AggregatorModel& other)
    : features_(other.features_),
      responses_(other.responses_),
      kernel_(other.kernel_),
      projection_(other.projection_),
      fallbacks_(other.fallbacks_.load()) {}

AggregatorModel& AggregatorModel::operator=(const AggregatorModel& other) {
  if (this != &other) {
    features_ = other.features_;
    responses_ = other.responses_;
    kernel_ = other.kernel_;
    projection_ = other.projection_;
    fallbacks_.store(other.fallbacks_.load());
  }
  return *this;
}

AggregatorModel::AggregatorModel(AggregatorModel&& other) noexcept
    : features_(std::move(other.features_)),
      responses_(std::move(other.responses_)),
      kernel_(other.kernel_),
      projection_(std::move(other.projection_)),
      fallbacks_(other.fallbacks_.load()) {}

AggregatorModel& AggregatorModel::operator=(AggregatorModel&& other) noexcept {
  features_ = std::move(other.features_);
  responses_ = std::move(other.responses_);
  kernel_ = other.kernel_;
  projection_ = std::move(other.projection_);
  fallbacks_.store(other.fallbacks_.load());
  return *this;
}

std::size_t AggregatorModel::raw_width() const noexcept {
  return projection_ ? projection_->input_dim() : width();
}

double AggregatorModel::predict_one(std::span<const double> query) const {
  const std::size_t n = rows();
  const std::size_t d = width();
  if (query.size() != d) {
    throw DataError("aggregator: query width " + std::to_string(query.size()) +
                    " != model width " + std::to_string(d));
  }
  for (const double v : query) {
    if (!std::isfinite(v)) throw DataError("aggregator: non-finite query");
  }

  std::vector<double> squared(n);
  std::vector<double> exponents(n);
  std::vector<double> weights(n);
  const double scale = 1.0 / (kernel_.sigma * std::pow(kernel_.h, kernel_.alpha));
  for (std::size_t i = 0; i < n; ++i) {
    squared[i] = squared_distance(query.data(), features_.data() + i * d, d);
    const double p = distance_power(squared[i], kernel_.alpha);
    exponents[i] = std::isfinite(scale) ? p * scale
                                        : kernel_.exponent(std::sqrt(squared[i]));
  }
  shifted_weights(exponents, squared, weights);

  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += weights[i] * responses_[static_cast<Eigen::Index>(i)];
    den += weights[i];
  }
  if (!(den > 0.0) || !std::isfinite(den)) {
    fallbacks_.fetch_add(1, std::memory_order_relaxed);
    return 0.0;
  }
  return num / den;
}

Vector AggregatorModel::predict_batch(const Matrix& queries, QueryInput input) const {
  const Matrix* q = &queries;
  Matrix projected;
  if (input == QueryInput::kRaw && projection_) {
    projected = project(queries, *projection_);
    q = &projected;
  }
  if (static_cast<std::size_t>(q->cols()) != width()) {
    throw DataError("aggregator: batch width " + std::to_string(q->cols()) +
                    " != model width " + std::to_string(width()));
  }
  Vector out(q->rows());
  const auto d = width();
  for (Eigen::Index i = 0; i < q->rows(); ++i) {
    out[i] = predict_one(std::span<const double>(q->data() + static_cast<std::size_t>(i) * d, d));
  }
  return out;
}

AggregatorModel AggregatorModel::with_kernel(const KernelSpec& kernel) const {
  return AggregatorModel(features_, responses_, kernel, projection_);
}

AggregatorModel build_full(const PredictionMatrix& features, const Vector& responses,
                           const KernelSpec& kernel) {
  return AggregatorModel(features.values(), responses, kernel);
}

AggregatorModel build_projected(const PredictionMatrix& features, const Vector& responses,
                                const KernelSpec& kernel, const ProjectionMatrix& g) {
  if (features.machines() != g.input_dim()) {
    throw DataError("build_projected: " + std::to_string(features.machines()) +
                    " machines but projection input dimension " + std::to_string(g.input_dim()));
  }
  return AggregatorModel(project(features.values(), g), responses, kernel, g);
}

// ---------------------------------------------------------------------------

LooObjective::LooObjective(const Matrix& features, const Vector& responses, KernelShape shape)
    : responses_(responses), shape_(shape) {
  KernelSpec{shape.alpha, shape.sigma, 1.0}.validate();
  const auto n = static_cast<std::size_t>(features.rows());
  if (n < 4) throw DataError("bandwidth tuning needs at least 4 rows");
  if (static_cast<std::size_t>(responses.size()) != n) {
    throw DataError("bandwidth tuning: responses do not match feature rows");
  }
  const auto d = static_cast<std::size_t>(features.cols());
  dist_pow_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> distances;
  distances.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    dist_pow_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sq = squared_distance(features.data() + i * d, features.data() + j * d, d);
      const double e = distance_power(sq, shape.alpha) / shape.sigma;
      dist_pow_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e;
      dist_pow_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = e;
      distances.push_back(std::sqrt(sq));
    }
  }
  auto mid = distances.begin() + static_cast<std::ptrdiff_t>(distances.size() / 2);
  std::nth_element(distances.begin(), mid, distances.end());
  median_distance_ = *mid;
  max_distance_ = *std::max_element(distances.begin(), distances.end());
}

double LooObjective::value(double h) const { return value_and_gradient(h).first; }

std::pair<double, double> LooObjective::value_and_gradient(double h) const {
  if (!(h > 0.0) || !std::isfinite(h)) throw NumericalError("LOO objective needs h > 0");
  const auto n = static_cast<Eigen::Index>(rows());
  const double alpha = shape_.alpha;
  const double scale = std::pow(h, -alpha);

  std::vector<double> e(static_cast<std::size_t>(n));
  double loss = 0.0;
  double grad = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double e_min = kInf;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double p = dist_pow_(i, j);
      e[static_cast<std::size_t>(j)] = p == 0.0 ? 0.0 : p * scale;
      e_min = std::min(e_min, e[static_cast<std::size_t>(j)]);
    }
    double den = 0.0;
    double num = 0.0;
    double dnum = 0.0;  // sum_j Y_j w_j (e_j - e_min)
    double dden = 0.0;  // sum_j w_j (e_j - e_min)
    if (std::isfinite(e_min)) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double shifted = e[static_cast<std::size_t>(j)] - e_min;
        const double w = std::exp(-shifted);
        if (w == 0.0) continue;
        den += w;
        num += w * responses_[j];
        dnum += w * shifted * responses_[j];
        dden += w * shifted;
      }
    } else {
      // h -> 0 limit: nearest rows only; the objective is locally flat.
      double p_min = kInf;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) p_min = std::min(p_min, dist_pow_(i, j));
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i || dist_pow_(i, j) != p_min) continue;
        den += 1.0;
        num += responses_[j];
      }
    }
    const double g = num / den;
    // dw_j/dh = w_j * alpha * e_j / h; the shift by e_min cancels in the ratio.
    const double dg = alpha / h * (dnum - g * dden) / den;
    const double r = g - responses_[i];
    loss += r * r;
    grad += 2.0 * r * dg;
  }
  loss /= static_cast<double>(n);
  grad /= static_cast<double>(n);
  if (!std::isfinite(loss) || !std::isfinite(grad)) {
    throw NumericalError("LOO objective is not finite at h=" + csv::format_double(h));
  }
  return {loss, grad};
}

std::vector<double> bandwidth_grid(const LooObjective& objective, const TuneOptions& options) {
  if (!options.grid.empty()) return options.grid;
  double base = objective.median_distance();
  if (!(base > 0.0)) base = objective.max_distance() > 0.0 ? objective.max_distance() : 1.0;
  return log_spaced(options.grid_low * base, options.grid_high * base, options.grid_points);
}

TuneResult tune_bandwidth(const Matrix& features, const Vector& responses,
                          const KernelShape& shape, TuneMethod method,
                          const TuneOptions& options) {
  const LooObjective objective(features, responses, shape);
  TuneResult result;
  result.kernel.alpha = shape.alpha;
  result.kernel.sigma = shape.sigma;
  auto& trace = result.trace;

  if (method == TuneMethod::kGrid) {
    const auto grid = bandwidth_grid(objective, options);
    if (grid.empty()) throw ConfigError("bandwidth grid is empty");
    double best_h = grid.front();
    double best_j = kInf;
    for (const double h : grid) {
      if (!(h > 0.0)) throw ConfigError("bandwidth grid values must be > 0");
      const double j = objective.value(h);
      trace.h_path.push_back(h);
      trace.objective_path.push_back(j);
      if (j < best_j) {
        best_j = j;
        best_h = h;
      }
    }
    result.kernel.h = best_h;
    trace.converged = true;
    trace.iterations = grid.size();
    return result;
  }

  const double max_dist = objective.max_distance();
  const double floor = max_dist > 0.0 ? options.floor_fraction * max_dist
                                      : std::numeric_limits<double>::min();
  double h = options.initial_h;
  if (!(h > 0.0)) {
    h = objective.median_distance();
    if (!(h > 0.0)) h = max_dist > 0.0 ? max_dist : 1.0;
  }
  h = std::max(h, floor);

  auto [j, g] = objective.value_and_gradient(h);
  trace.h_path.push_back(h);
  trace.objective_path.push_back(j);
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    trace.iterations = it + 1;
    if (g == 0.0) {
      trace.converged = true;
      break;
    }
    double t = options.initial_step_fraction * h / std::abs(g);
    bool accepted = false;
    double h_next = h;
    double j_next = j;
    for (std::size_t b = 0; b <= options.max_backtracks; ++b) {
      h_next = h - t * g;
      if (h_next < floor) h_next = floor;
      const double moved = std::abs(h_next - h);
      if (moved == 0.0) break;
      j_next = objective.value(h_next);
      if (j_next <= j - options.armijo_c * moved * std::abs(g)) {
        accepted = true;
        break;
      }
      t *= options.contraction;
    }
    if (!accepted) {
      // No descent step at the finest trial scale: stationary to that resolution.
      trace.converged = true;
      break;
    }
    const double step = std::abs(h_next - h);
    const double previous = h;
    h = h_next;
    if (h <= floor) trace.hit_floor = true;
    std::tie(j, g) = objective.value_and_gradient(h);
    trace.h_path.push_back(h);
    trace.objective_path.push_back(j);
    if (step < options.relative_tolerance * previous) {
      trace.converged = true;
      break;
    }
  }
  result.kernel.h = h;
  return result;
}

// ---------------------------------------------------------------------------

GapReport full_vs_projected_gap(const AggregatorModel& full, const AggregatorModel& projected,
                                const Matrix& raw_queries, std::span<const double> epsilons) {
  if (full.projection()) throw DataError("gap: the full model carries a projection");
  if (!projected.projection()) throw DataError("gap: the projected model has no projection");
  if (full.responses().size() != projected.responses().size() ||
      full.responses() != projected.responses()) {
    throw DataError("gap: models were built on different responses");
  }
  const auto& kf = full.kernel();
  const auto& kp = projected.kernel();
  if (kf.alpha != kp.alpha || kf.sigma != kp.sigma || kf.h != kp.h) {
    throw DataError("gap: models use different kernels");
  }
  if (projected.raw_width() != full.width()) {
    throw DataError("gap: projection input dimension does not match the full model width");
  }

  const Vector a = full.predict_batch(raw_queries, QueryInput::kRaw);
  const Vector b = projected.predict_batch(raw_queries, QueryInput::kRaw);
  GapReport report;
  report.queries = static_cast<std::size_t>(a.size());
  report.gaps.resize(report.queries);
  double sum = 0.0;
  for (std::size_t i = 0; i < report.queries; ++i) {
    const double gap = std::abs(a[static_cast<Eigen::Index>(i)] - b[static_cast<Eigen::Index>(i)]);
    report.gaps[i] = gap;
    report.max_gap = std::max(report.max_gap, gap);
    sum += gap;
  }
  report.mean_gap = report.queries ? sum / static_cast<double>(report.queries) : 0.0;
  for (const double eps : epsilons) {
    std::size_t over = 0;
    for (const double gap : report.gaps) over += gap > eps;
    report.fraction_exceeding[eps] =
        report.queries ? static_cast<double>(over) / static_cast<double>(report.queries) : 0.0;
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json hex_array(const double* data, std::size_t count) {
  json arr = json::array();
  for (std::size_t i = 0; i < count; ++i) arr.push_back(csv::format_hex(data[i]));
  return arr;
}

double parse_hex(const json& v) {
  const auto parsed = csv::parse_double(v.get<std::string>());
  if (!parsed) throw DataError("model file: bad number '" + v.get<std::string>() + "'");
  return *parsed;
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataError("model file: matrix data size mismatch");
  }
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < rows * cols; ++k) m.data()[k] = parse_hex(data[static_cast<std::size_t>(k)]);
  return m;
}

json matrix_to(const Matrix& m) {
  return json{{"rows", m.rows()},
              {"cols", m.cols()},
              {"data", hex_array(m.data(), static_cast<std::size_t>(m.size()))}};
}

}  // namespace

void save_model(const AggregatorModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = "rpcomb-aggregator";
  j["version"] = 1;
  j["kernel"] = {{"alpha", csv::format_hex(model.kernel().alpha)},
                 {"sigma", csv::format_hex(model.kernel().sigma)},
                 {"h", csv::format_hex(model.kernel().h)}};
  j["features"] = matrix_to(model.features());
  j["responses"] = hex_array(model.responses().data(), static_cast<std::size_t>(model.responses().size()));
  if (model.projection()) {
    const auto& g = *model.projection();
    j["projection"] = {{"seed", g.seed()},
                       {"input_dim", g.input_dim()},
                       {"output_dim", g.output_dim()},
                       {"values", matrix_to(g.values())}};
  } else {
    j["projection"] = nullptr;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

AggregatorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
    if (j.at("format") != "rpcomb-aggregator") throw DataError(path.string() + ": not an aggregator model");
    KernelSpec kernel{parse_hex(j.at("kernel").at("alpha")), parse_hex(j.at("kernel").at("sigma")),
                      parse_hex(j.at("kernel").at("h"))};
    Matrix features = matrix_from(j.at("features"));
    const auto& r = j.at("responses");
    Vector responses(static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) responses[static_cast<Eigen::Index>(i)] = parse_hex(r[i]);
    std::optional<ProjectionMatrix> projection;
    if (!j.at("projection").is_null()) {
      const auto& p = j.at("projection");
      projection.emplace(matrix_from(p.at("values")), p.at("seed").get<std::uint64_t>());
    }
    return AggregatorModel(std::move(features), std::move(responses), kernel, std::move(projection));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed model file: " + e.what());
  }
}

}  // namespace rpcomb
