#include "rpcomb/learners.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "rpcomb/error.hpp"
#include "rpcomb/random.hpp"

namespace rpcomb {

std::string_view family_name(Family family) noexcept {
  switch (family) {
    case Family::kKnn: return "knn";
    case Family::kElasticNet: return "elastic_net";
    case Family::kBagging: return "bagging";
    case Family::kRandomForest: return "random_forest";
    case Family::kBoosting: return "boosting";
  }
  return "unknown";
}

std::optional<Family> parse_family(std::string_view name) noexcept {
  for (const auto f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

namespace {

std::string format_param(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string_view tree_prefix(Family family) {
  switch (family) {
    case Family::kBagging: return "bag";
    case Family::kRandomForest: return "rf";
    case Family::kBoosting: return "boost";
    default: return "tree";
  }
}

}  // namespace

MachineSpec MachineSpec::knn(std::size_t k) {
  MachineSpec s;
  s.family = Family::kKnn;
  s.k = k;
  s.label = "knn_k" + std::to_string(k);
  return s;
}

MachineSpec MachineSpec::elastic_net(double alpha_mix, double lambda) {
  MachineSpec s;
  s.family = Family::kElasticNet;
  s.alpha_mix = alpha_mix;
  s.lambda = lambda;
  s.label = "enet_a" + format_param(alpha_mix) + "_l" + format_param(lambda);
  return s;
}

MachineSpec MachineSpec::tree_ensemble(Family family, std::size_t ntree) {
  MachineSpec s;
  s.family = family;
  s.ntree = ntree;
  s.label = std::string(tree_prefix(family)) + "_ntree" + std::to_string(ntree);
  return s;
}

void MachineSpec::validate(std::size_t n_build) const {
  switch (family) {
    case Family::kKnn:
      if (k < 1 || k > n_build) {
        throw ConfigError(label + ": k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(n_build) + "]");
      }
      break;
    case Family::kElasticNet:
      if (!(alpha_mix >= 0.0 && alpha_mix <= 1.0)) {
        throw ConfigError(label + ": alpha_mix must lie in [0, 1]");
      }
      if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ConfigError(label + ": lambda must be finite and >= 0");
      }
      break;
    case Family::kBagging:
    case Family::kRandomForest:
    case Family::kBoosting:
      if (ntree < 1) throw ConfigError(label + ": ntree must be >= 1");
      break;
  }
}

// ---------------------------------------------------------------------------
// kNN

KnnModel::KnnModel(Matrix x, Vector y, std::size_t k)
    : x_(std::move(x)), y_(std::move(y)), k_(k) {}

double KnnModel::predict(std::span<const double> query) const {
  const auto n = static_cast<std::size_t>(x_.rows());
  const auto d = static_cast<std::size_t>(x_.cols());
  if (query.size() != d) throw DataError("knn: query width mismatch");
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x_.data() + i * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = row[j] - query[j];
      s += diff * diff;
    }
    dist[i] = {s, i};
  }
  // Pair ordering breaks distance ties by the lower row index.
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k_; ++i) sum += y_[static_cast<Eigen::Index>(dist[i].second)];
  return sum / static_cast<double>(k_);
}

FittedMachine fit_knn(const Dataset& build, std::size_t k) {
  auto spec = MachineSpec::knn(k);
  spec.validate(build.rows());
  return FittedMachine(spec, KnnModel(build.features(), build.response(), k));
}

// ---------------------------------------------------------------------------
// Elastic net

LinearModel::LinearModel(double intercept, Vector coefficients, std::size_t sweeps,
                         std::vector<double> objective_trace)
    : intercept_(intercept),
      coef_(std::move(coefficients)),
      sweeps_(sweeps),
      trace_(std::move(objective_trace)) {}

double LinearModel::predict(std::span<const double> x) const noexcept {
  double out = intercept_;
  for (Eigen::Index j = 0; j < coef_.size(); ++j) out += coef_[j] * x[static_cast<std::size_t>(j)];
  return out;
}

namespace {

double soft_threshold(double z, double gamma) noexcept {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

}  // namespace

FittedMachine fit_elastic_net(const Dataset& build, double alpha_mix, double lambda,
                              const LearnerOptions& options) {
  auto spec = MachineSpec::elastic_net(alpha_mix, lambda);
  spec.validate(build.rows());

  const auto n = build.features().rows();
  const auto d = build.features().cols();
  const Vector mean = build.features().colwise().mean().transpose();
  Vector scale = Vector::Ones(d);
  Matrix z = build.features().rowwise() - mean.transpose();
  if (options.enet_standardize) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n));
      scale[j] = sd;
      if (sd > 0.0) z.col(j) /= sd;
    }
  }
  const double y_mean = build.response().mean();
  const Vector yc = build.response().array() - y_mean;

  // Covariance updates: the sweep only touches the d x d Gram matrix.
  const Matrix gram = z.transpose() * z;
  const Vector zy = z.transpose() * yc;
  const double yy = yc.squaredNorm();

  const double l1 = lambda * alpha_mix;
  const double l2 = lambda * (1.0 - alpha_mix);
  auto objective = [&](const Vector& b) {
    const double rss = yy - 2.0 * b.dot(zy) + b.dot(gram * b);
    return rss + l1 * b.lpNorm<1>() + l2 * b.squaredNorm();
  };

  Vector beta = Vector::Zero(d);
  Vector gb = Vector::Zero(d);  // gram * beta
  std::vector<double> trace;
  if (options.enet_record_objective) trace.push_back(objective(beta));

  const double y_norm = std::sqrt(yy);
  std::size_t sweeps = 0;
  bool converged = !(y_norm > 0.0);
  while (!converged) {
    if (sweeps >= options.enet_max_sweeps) {
      throw NumericalError(spec.label + ": coordinate descent did not converge in " +
                           std::to_string(options.enet_max_sweeps) + " sweeps");
    }
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double gjj = gram(j, j);
      if (!(gjj > 0.0)) continue;  // constant column
      const double old = beta[j];
      const double rho = zy[j] - gb[j] + gjj * old;
      const double updated = soft_threshold(rho, 0.5 * l1) / (gjj + l2);
      const double delta = updated - old;
      if (delta != 0.0) {
        beta[j] = updated;
        gb += gram.col(j) * delta;
        max_change = std::max(max_change, std::abs(delta) * std::sqrt(gjj));
      }
    }
    ++sweeps;
    if (options.enet_record_objective) trace.push_back(objective(beta));
    if (!beta.allFinite()) throw NumericalError(spec.label + ": non-finite coefficients");
    converged = max_change <= options.enet_tolerance * y_norm;
  }

  Vector coef(d);
  for (Eigen::Index j = 0; j < d; ++j) coef[j] = scale[j] > 0.0 ? beta[j] / scale[j] : 0.0;
  const double intercept = y_mean - coef.dot(mean);
  return FittedMachine(spec, LinearModel(intercept, std::move(coef), sweeps, std::move(trace)));
}

// ---------------------------------------------------------------------------
// Tree ensembles

TreeEnsembleModel::TreeEnsembleModel(std::vector<RegressionTree> trees, Combine combine,
                                     double offset, double shrinkage)
    : trees_(std::move(trees)), combine_(combine), offset_(offset), shrinkage_(shrinkage) {}

double TreeEnsembleModel::predict(std::span<const double> x) const noexcept {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  if (combine_ == Combine::kAverage) {
    return trees_.empty() ? offset_ : sum / static_cast<double>(trees_.size());
  }
  return offset_ + shrinkage_ * sum;
}

TreeEnsembleModel TreeEnsembleModel::truncated(std::size_t stages) const {
  stages = std::min(stages, trees_.size());
  return TreeEnsembleModel(
      std::vector<RegressionTree>(trees_.begin(), trees_.begin() + static_cast<std::ptrdiff_t>(stages)),
      combine_, offset_, shrinkage_);
}

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

TreeEnsembleModel fit_boosted(const Dataset& build, std::size_t stages,
                              const LearnerOptions& options) {
  const std::size_t n = build.rows();
  const double offset = build.response().mean();
  std::vector<double> fitted(n, offset);
  std::vector<double> residual(n);

  TreeParams params = options.tree;
  params.max_depth = options.boosting_depth;
  params.max_features = 0;

  const TreeBuilder builder(build.features(), all_rows(n));
  std::vector<RegressionTree> trees;
  trees.reserve(stages);
  for (std::size_t s = 0; s < stages; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = build.response()[static_cast<Eigen::Index>(i)] - fitted[i];
    }
    auto tree = builder.fit(residual, params);
    for (std::size_t i = 0; i < n; ++i) fitted[i] += options.shrinkage * tree.predict(build.row(i));
    trees.push_back(std::move(tree));
  }
  return TreeEnsembleModel(std::move(trees), TreeEnsembleModel::Combine::kBoostedSum, offset,
                           options.shrinkage);
}

}  // namespace

FittedMachine fit_tree_ensemble(const Dataset& build, Family family, std::size_t ntree,
                                std::uint64_t seed, const LearnerOptions& options) {
  if (family != Family::kBagging && family != Family::kRandomForest &&
      family != Family::kBoosting) {
    throw ConfigError("fit_tree_ensemble: not a tree family: " + std::string(family_name(family)));
  }
  auto spec = MachineSpec::tree_ensemble(family, ntree);
  spec.validate(build.rows());

  if (family == Family::kBoosting) {
    return FittedMachine(spec, fit_boosted(build, ntree, options));
  }

  const std::size_t n = build.rows();
  const std::size_t d = build.cols();
  TreeParams params = options.tree;
  params.max_features = family == Family::kRandomForest ? (d + 2) / 3 : 0;

  std::vector<RegressionTree> trees;
  trees.reserve(ntree);
  std::vector<double> targets(n);
  for (std::size_t t = 0; t < ntree; ++t) {
    CounterRng rng(derive_seed(seed, {t}));
    std::vector<std::size_t> rows(n);
    if (options.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    for (std::size_t s = 0; s < n; ++s) targets[s] = build.response()[static_cast<Eigen::Index>(rows[s])];
    const TreeBuilder builder(build.features(), std::move(rows));
    trees.push_back(builder.fit(targets, params, &rng));
  }
  return FittedMachine(spec, TreeEnsembleModel(std::move(trees),
                                               TreeEnsembleModel::Combine::kAverage,
                                               build.response().mean(), 1.0));
}

std::vector<FittedMachine> fit_boosting_path(const Dataset& build,
                                             std::span<const std::size_t> ntrees,
                                             const LearnerOptions& options) {
  std::vector<FittedMachine> out;
  if (ntrees.empty()) return out;
  for (const auto nt : ntrees) MachineSpec::tree_ensemble(Family::kBoosting, nt).validate(build.rows());
  const auto longest = *std::max_element(ntrees.begin(), ntrees.end());
  const auto full = fit_boosted(build, longest, options);
  out.reserve(ntrees.size());
  for (const auto nt : ntrees) {
    out.emplace_back(MachineSpec::tree_ensemble(Family::kBoosting, nt), full.truncated(nt));
  }
  return out;
}

// ---------------------------------------------------------------------------

double FittedMachine::predict(std::span<const double> x) const {
  return std::visit([&](const auto& m) { return m.predict(x); }, model_);
}

Vector FittedMachine::predict(const Matrix& x) const {
  Vector out(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out[i] = predict(std::span<const double>(x.data() + static_cast<std::size_t>(i) * d, d));
  }
  return out;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi > 0.0)) throw ConfigError("log_spaced: bounds must be positive");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

GridSpec GridSpec::reference() {
  GridSpec g;
  for (std::size_t k = 2; k <= 201; ++k) g.knn_ks.push_back(k);
  const auto lambdas = log_spaced(5e-5, 1.0, 100);
  for (const double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (const double l : lambdas) g.enet_grid.emplace_back(a, l);
  }
  std::vector<std::size_t> ntrees;
  for (std::size_t t = 18; t <= 315; t += 3) ntrees.push_back(t);
  g.set_tree_ntrees(ntrees);
  return g;
}

GridSpec GridSpec::desk() {
  GridSpec g;
  for (std::size_t k = 2; k <= 21; ++k) g.knn_ks.push_back(k);
  const auto lambdas = log_spaced(5e-5, 1.0, 4);
  for (const double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (const double l : lambdas) g.enet_grid.emplace_back(a, l);
  }
  g.bagging_ntrees = {18, 21, 24, 27, 30, 33, 36};
  g.forest_ntrees = {18, 21, 24, 27, 30, 33, 36};
  g.boosting_ntrees = {50, 100, 150, 200, 250, 300};
  return g;
}

void GridSpec::set_tree_ntrees(const std::vector<std::size_t>& ntrees) {
  bagging_ntrees = ntrees;
  forest_ntrees = ntrees;
  boosting_ntrees = ntrees;
}

std::vector<MachineSpec> GridSpec::machines() const {
  std::vector<MachineSpec> out;
  auto enabled = [&](Family f) { return families_enabled.count(f) > 0; };
  if (enabled(Family::kKnn)) {
    for (const auto k : knn_ks) out.push_back(MachineSpec::knn(k));
  }
  if (enabled(Family::kElasticNet)) {
    for (const auto& [a, l] : enet_grid) out.push_back(MachineSpec::elastic_net(a, l));
  }
  const std::pair<Family, const std::vector<std::size_t>*> trees[] = {
      {Family::kBagging, &bagging_ntrees},
      {Family::kRandomForest, &forest_ntrees},
      {Family::kBoosting, &boosting_ntrees}};
  for (const auto& [family, list] : trees) {
    if (!enabled(family)) continue;
    for (const auto nt : *list) out.push_back(MachineSpec::tree_ensemble(family, nt));
  }
  return out;
}

std::vector<FittedMachine> fit_grid(const Dataset& build, const GridSpec& grid,
                                    std::uint64_t seed, const LearnerOptions& options) {
  const auto specs = grid.machines();
  if (specs.empty()) throw ConfigError("machine grid is empty");
  for (const auto& s : specs) s.validate(build.rows());

  std::vector<std::size_t> boost_ntrees;
  for (const auto& s : specs) {
    if (s.family == Family::kBoosting) boost_ntrees.push_back(s.ntree);
  }
  auto boosted = fit_boosting_path(build, boost_ntrees, options);
  std::size_t next_boosted = 0;

  std::vector<FittedMachine> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    switch (s.family) {
      case Family::kKnn:
        out.push_back(fit_knn(build, s.k));
        break;
      case Family::kElasticNet:
        out.push_back(fit_elastic_net(build, s.alpha_mix, s.lambda, options));
        break;
      case Family::kBagging:
      case Family::kRandomForest:
        out.push_back(fit_tree_ensemble(build, s.family, s.ntree,
                                        derive_seed(seed, {static_cast<std::uint64_t>(s.family), i}),
                                        options));
        break;
      case Family::kBoosting:
        out.push_back(std::move(boosted[next_boosted++]));
        break;
    }
  }
  return out;
}

PredictionMatrix build_prediction_matrix(std::span<const FittedMachine> machines,
                                         const Dataset& ds, double response_bound) {
  if (machines.empty()) throw ConfigError("build_prediction_matrix: no machines");
  Matrix values(static_cast<Eigen::Index>(ds.rows()), static_cast<Eigen::Index>(machines.size()));
  std::vector<std::string> labels;
  labels.reserve(machines.size());
  for (std::size_t j = 0; j < machines.size(); ++j) {
    labels.push_back(machines[j].spec().label);
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      const double v = machines[j].predict(ds.row(i));
      if (!std::isfinite(v)) {
        throw NumericalError("machine '" + machines[j].spec().label +
                             "' predicted a non-finite value at row " + std::to_string(i));
      }
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return PredictionMatrix(std::move(values), std::move(labels), response_bound);
}

}  // namespace rpcomb
