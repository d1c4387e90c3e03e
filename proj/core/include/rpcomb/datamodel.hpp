#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace rpcomb {

/// Row-major dense matrix; rows are observations.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<std::size_t>;

/// n rows of (feature vector in R^d, scalar response) with named columns.
///
/// Invariants checked on construction: n >= 1, d >= 1, all values finite,
/// exactly d unique column names.
class Dataset {
 public:
  Dataset(Matrix features, Vector response, std::vector<std::string> columns,
          std::string name = {}, std::string target_name = "y");

  std::size_t rows() const noexcept { return static_cast<std::size_t>(features_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(features_.cols()); }

  const Matrix& features() const noexcept { return features_; }
  const Vector& response() const noexcept { return response_; }
  const std::vector<std::string>& column_names() const noexcept { return columns_; }
  const std::string& name() const noexcept { return name_; }
  const std::string& target_name() const noexcept { return target_name_; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {features_.data() + i * cols(), cols()};
  }

  /// Rows in the given order (indices may repeat).
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  Matrix features_;
  Vector response_;
  std::vector<std::string> columns_;
  std::string name_;
  std::string target_name_;
};

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  IndexList train;
  IndexList test;
};

/// Halves of the training set: machines are fit on `build`, the aggregator on
/// `aggregation`. |build| = ceil(n_train / 2).
struct TrainPartition {
  IndexList build_indices;
  IndexList aggregation_indices;
};

/// n x M matrix of base-machine predictions with one label per machine.
///
/// bound_R0 is at least the largest absolute entry; callers may raise it to
/// also cover the responses (see build_prediction_matrix).
class PredictionMatrix {
 public:
  PredictionMatrix(Matrix values, std::vector<std::string> labels,
                   double bound_R0 = 0.0);

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t machines() const noexcept { return static_cast<std::size_t>(values_.cols()); }

  const Matrix& values() const noexcept { return values_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  double bound_R0() const noexcept { return bound_R0_; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {values_.data() + i * machines(), machines()};
  }

  PredictionMatrix subset_rows(std::span<const std::size_t> indices) const;

 private:
  Matrix values_;
  std::vector<std::string> labels_;
  double bound_R0_;
};

struct CsvLoadOptions {
  /// Columns whose cells are all non-numeric are expanded into one 0/1
  /// indicator column per distinct level (named `<column>_<level>`, levels
  /// sorted). When false such columns are a data error.
  bool one_hot_categorical = true;
};

/// Reads a comma-separated file with one header row. The target column becomes
/// the response; the remaining columns, in file order, the features.
Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                 const CsvLoadOptions& options = {});

/// Writes features then the response column, 17 significant digits.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// Seeded Fisher-Yates split; |test| = round(test_fraction * n).
SplitIndices split_indices(std::size_t n, const SplitSpec& spec);
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

/// Partitions 0..n_train-1 into build/aggregation halves.
TrainPartition partition_train(std::size_t n_train, std::uint64_t seed);
TrainPartition partition_train(const Dataset& train, std::uint64_t seed);

/// Root mean squared error.
double rmse(std::span<const double> predicted, std::span<const double> actual);
double rmse(const Vector& predicted, const Vector& actual);

/// Largest absolute value of a span (0 for empty input).
double max_abs(std::span<const double> values) noexcept;

void save_prediction_csv(const PredictionMatrix& pm, const std::filesystem::path& path);
PredictionMatrix load_prediction_csv(const std::filesystem::path& path);

void save_vector_csv(const Vector& v, const std::string& header,
                     const std::filesystem::path& path);

}  // namespace rpcomb
