#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "rpcomb/datamodel.hpp"
#include "rpcomb/tree.hpp"

namespace rpcomb {

enum class Family { kKnn, kElasticNet, kBagging, kRandomForest, kBoosting };

inline constexpr Family kAllFamilies[] = {Family::kKnn, Family::kElasticNet,
                                          Family::kBagging, Family::kRandomForest,
                                          Family::kBoosting};

/// Short lowercase family name: knn, elastic_net, bagging, random_forest, boosting.
std::string_view family_name(Family family) noexcept;
std::optional<Family> parse_family(std::string_view name) noexcept;

/// One base machine: a family plus its hyper-parameters.
struct MachineSpec {
  Family family = Family::kKnn;
  std::size_t k = 0;        // knn
  double alpha_mix = 0.0;   // elastic_net: 0 ridge, 1 lasso
  double lambda = 0.0;      // elastic_net
  std::size_t ntree = 0;    // bagging, random_forest, boosting
  std::string label;

  static MachineSpec knn(std::size_t k);
  static MachineSpec elastic_net(double alpha_mix, double lambda);
  static MachineSpec tree_ensemble(Family family, std::size_t ntree);

  /// Throws ConfigError when the parameters are out of range for n_build rows.
  void validate(std::size_t n_build) const;
};

/// Learner internals shared by the whole grid. Defaults: CART min leaf 5 and
/// max depth 12, boosting depth 3 with shrinkage 0.05.
struct LearnerOptions {
  TreeParams tree{};
  std::size_t boosting_depth = 3;
  double shrinkage = 0.05;
  /// Bagging/forest trees see a bootstrap resample; false uses the build rows
  /// as-is (test hook).
  bool bootstrap = true;

  bool enet_standardize = true;
  double enet_tolerance = 1e-8;
  std::size_t enet_max_sweeps = 100000;
  /// Keep the objective after every coordinate-descent sweep.
  bool enet_record_objective = false;
};

class KnnModel {
 public:
  KnnModel(Matrix x, Vector y, std::size_t k);
  double predict(std::span<const double> query) const;
  std::size_t k() const noexcept { return k_; }

 private:
  Matrix x_;
  Vector y_;
  std::size_t k_;
};

/// Affine predictor produced by the elastic net.
class LinearModel {
 public:
  LinearModel(double intercept, Vector coefficients, std::size_t sweeps,
              std::vector<double> objective_trace = {});
  double predict(std::span<const double> x) const noexcept;

  double intercept() const noexcept { return intercept_; }
  const Vector& coefficients() const noexcept { return coef_; }
  std::size_t sweeps() const noexcept { return sweeps_; }
  /// Objective (on the standardized problem) after each sweep, if recorded.
  const std::vector<double>& objective_trace() const noexcept { return trace_; }

 private:
  double intercept_;
  Vector coef_;
  std::size_t sweeps_;
  std::vector<double> trace_;
};

/// Either an average of trees (bagging, random forest) or a boosted sum
/// `offset + shrinkage * sum(tree_s)`.
class TreeEnsembleModel {
 public:
  enum class Combine { kAverage, kBoostedSum };

  TreeEnsembleModel(std::vector<RegressionTree> trees, Combine combine, double offset,
                    double shrinkage);
  double predict(std::span<const double> x) const noexcept;

  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  double offset() const noexcept { return offset_; }
  double shrinkage() const noexcept { return shrinkage_; }
  Combine combine() const noexcept { return combine_; }

  /// Boosted ensemble keeping only the first `stages` trees.
  TreeEnsembleModel truncated(std::size_t stages) const;

 private:
  std::vector<RegressionTree> trees_;
  Combine combine_;
  double offset_;
  double shrinkage_;
};

class FittedMachine {
 public:
  using Model = std::variant<KnnModel, LinearModel, TreeEnsembleModel>;

  FittedMachine(MachineSpec spec, Model model)
      : spec_(std::move(spec)), model_(std::move(model)) {}

  double predict(std::span<const double> x) const;
  Vector predict(const Matrix& x) const;

  const MachineSpec& spec() const noexcept { return spec_; }
  const Model& model() const noexcept { return model_; }

 private:
  MachineSpec spec_;
  Model model_;
};

/// Mean response of the k nearest build rows (Euclidean, ties to lower index).
FittedMachine fit_knn(const Dataset& build, std::size_t k);

/// argmin ||Y - b0 - X b||^2 + lambda * (alpha ||b||_1 + (1 - alpha) ||b||_2^2)
/// with an unpenalized intercept, by cyclic coordinate descent on the
/// (optionally standardized) design.
FittedMachine fit_elastic_net(const Dataset& build, double alpha_mix, double lambda,
                              const LearnerOptions& options = {});

FittedMachine fit_tree_ensemble(const Dataset& build, Family family, std::size_t ntree,
                                std::uint64_t seed, const LearnerOptions& options = {});

/// Fits one boosted sequence of max(ntrees) stages and returns a machine per
/// requested stage count. Boosting here has no randomness, so each result is
/// identical to a separate fit with that ntree.
std::vector<FittedMachine> fit_boosting_path(const Dataset& build,
                                             std::span<const std::size_t> ntrees,
                                             const LearnerOptions& options = {});

/// Machine grid. M = |knn_ks| + |enet_grid| + |bagging| + |random_forest| +
/// |boosting| over enabled families.
struct GridSpec {
  std::vector<std::size_t> knn_ks;
  std::vector<std::pair<double, double>> enet_grid;  // (alpha_mix, lambda)
  std::vector<std::size_t> bagging_ntrees;
  std::vector<std::size_t> forest_ntrees;
  std::vector<std::size_t> boosting_ntrees;
  std::set<Family> families_enabled{std::begin(kAllFamilies), std::end(kAllFamilies)};

  /// 200 kNN (k = 2..201), 5 x 100 elastic nets, 3 x 100 tree ensembles
  /// (ntree = 18, 21, ..., 315): M = 1000.
  static GridSpec reference();
  /// 20 kNN, 20 elastic nets, 7 bagging + 7 forest + 6 boosting: M = 60.
  static GridSpec desk();

  /// Sets the same ntree list for all three tree families.
  void set_tree_ntrees(const std::vector<std::size_t>& ntrees);

  std::vector<MachineSpec> machines() const;
  std::size_t machine_count() const { return machines().size(); }
};

/// `count` values from lo to hi evenly spaced on a log scale.
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

/// Fits every machine of the grid on the build partition. Machine seeds are
/// derived from `seed` and the machine's position, so the result does not
/// depend on fitting order.
std::vector<FittedMachine> fit_grid(const Dataset& build, const GridSpec& grid,
                                    std::uint64_t seed, const LearnerOptions& options = {});

/// Entry (i, j) is machine j's prediction at row i of `ds`. bound_R0 is the
/// larger of the maximum absolute prediction and `response_bound`.
PredictionMatrix build_prediction_matrix(std::span<const FittedMachine> machines,
                                         const Dataset& ds, double response_bound = 0.0);

}  // namespace rpcomb
