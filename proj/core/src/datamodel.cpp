#include "rpcomb/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "csv.hpp"
#include "rpcomb/error.hpp"
#include "rpcomb/random.hpp"

namespace rpcomb {

Dataset::Dataset(Matrix features, Vector response, std::vector<std::string> columns,
                 std::string name, std::string target_name)
    : features_(std::move(features)),
      response_(std::move(response)),
      columns_(std::move(columns)),
      name_(std::move(name)),
      target_name_(std::move(target_name)) {
  if (features_.rows() < 1 || features_.cols() < 1) {
    throw DataError("dataset needs at least one row and one feature column");
  }
  if (response_.size() != features_.rows()) {
    throw DataError("dataset response length " + std::to_string(response_.size()) +
                    " does not match row count " + std::to_string(features_.rows()));
  }
  if (columns_.size() != cols()) {
    throw DataError("dataset has " + std::to_string(cols()) + " features but " +
                    std::to_string(columns_.size()) + " column names");
  }
  if (std::set<std::string>(columns_.begin(), columns_.end()).size() != columns_.size()) {
    throw DataError("dataset column names are not unique");
  }
  if (!features_.allFinite() || !response_.allFinite()) {
    throw DataError("dataset contains non-finite values");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Matrix x(static_cast<Eigen::Index>(indices.size()), features_.cols());
  Vector y(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows()) throw DataError("row index out of range in subset");
    x.row(static_cast<Eigen::Index>(r)) = features_.row(static_cast<Eigen::Index>(indices[r]));
    y[static_cast<Eigen::Index>(r)] = response_[static_cast<Eigen::Index>(indices[r])];
  }
  return Dataset(std::move(x), std::move(y), columns_, name_, target_name_);
}

PredictionMatrix::PredictionMatrix(Matrix values, std::vector<std::string> labels,
                                   double bound_R0)
    : values_(std::move(values)), labels_(std::move(labels)), bound_R0_(bound_R0) {
  if (values_.cols() < 1) throw DataError("prediction matrix needs at least one machine");
  if (labels_.size() != machines()) {
    throw DataError("prediction matrix has " + std::to_string(machines()) +
                    " columns but " + std::to_string(labels_.size()) + " labels");
  }
  if (std::set<std::string>(labels_.begin(), labels_.end()).size() != labels_.size()) {
    throw DataError("machine labels are not unique");
  }
  if (!values_.allFinite()) throw DataError("prediction matrix contains non-finite values");
  const double observed = values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0;
  bound_R0_ = std::max(bound_R0_, observed);
  if (!(bound_R0_ > 0.0)) {
    // All-zero predictions: keep R0 strictly positive.
    bound_R0_ = std::numeric_limits<double>::min();
  }
}

PredictionMatrix PredictionMatrix::subset_rows(std::span<const std::size_t> indices) const {
  Matrix v(static_cast<Eigen::Index>(indices.size()), values_.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows()) throw DataError("row index out of range in subset_rows");
    v.row(static_cast<Eigen::Index>(r)) = values_.row(static_cast<Eigen::Index>(indices[r]));
  }
  return PredictionMatrix(std::move(v), labels_, bound_R0_);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                 const CsvLoadOptions& options) {
  const auto table = csv::read(path);
  const auto& header = table.header;

  const auto target_count = std::count(header.begin(), header.end(), target_column);
  if (target_count == 0) {
    throw DataError(path.string() + ": target column '" + target_column + "' not found");
  }
  if (target_count > 1) {
    throw DataError(path.string() + ": target column '" + target_column + "' is duplicated");
  }
  if (table.rows.empty()) throw DataError(path.string() + ": no data rows");

  const std::size_t n = table.rows.size();
  const std::size_t ncol = header.size();

  // A column is categorical when none of its cells parse as a number.
  std::vector<bool> categorical(ncol, false);
  for (std::size_t c = 0; c < ncol; ++c) {
    bool any_numeric = false;
    for (const auto& row : table.rows) {
      if (csv::parse_double(row[c])) {
        any_numeric = true;
        break;
      }
    }
    categorical[c] = !any_numeric;
  }

  auto cell_error = [&](std::size_t r, std::size_t c, const std::string& why) {
    return DataError(path.string() + ": row " + std::to_string(r + 1) + ", column '" +
                     header[c] + "': " + why);
  };

  struct OutColumn {
    std::size_t source;
    std::string level;  // empty for numeric columns
  };
  std::vector<OutColumn> out_columns;
  std::vector<std::string> names;
  std::size_t target_index = 0;
  for (std::size_t c = 0; c < ncol; ++c) {
    if (header[c] == target_column) {
      target_index = c;
      if (categorical[c]) throw cell_error(0, c, "target column is not numeric");
      continue;
    }
    if (!categorical[c]) {
      out_columns.push_back({c, {}});
      names.push_back(header[c]);
      continue;
    }
    if (!options.one_hot_categorical) {
      throw cell_error(0, c, "non-numeric column '" + table.rows[0][c] + "'");
    }
    std::set<std::string> levels;
    for (const auto& row : table.rows) levels.insert(row[c]);
    for (const auto& level : levels) {
      out_columns.push_back({c, level});
      names.push_back(header[c] + "_" + level);
    }
  }
  if (out_columns.empty()) throw DataError(path.string() + ": no feature columns");

  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_columns.size()));
  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = table.rows[r];
    const auto target = csv::parse_double(row[target_index]);
    if (!target) throw cell_error(r, target_index, "cannot parse '" + row[target_index] + "'");
    if (!std::isfinite(*target)) throw cell_error(r, target_index, "non-finite value");
    y[static_cast<Eigen::Index>(r)] = *target;

    for (std::size_t k = 0; k < out_columns.size(); ++k) {
      const auto& oc = out_columns[k];
      double v = 0.0;
      if (oc.level.empty()) {
        const auto parsed = csv::parse_double(row[oc.source]);
        if (!parsed) throw cell_error(r, oc.source, "cannot parse '" + row[oc.source] + "'");
        if (!std::isfinite(*parsed)) throw cell_error(r, oc.source, "non-finite value");
        v = *parsed;
      } else {
        v = row[oc.source] == oc.level ? 1.0 : 0.0;
      }
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return Dataset(std::move(x), std::move(y), std::move(names), path.stem().string(),
                 target_column);
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  auto header = ds.column_names();
  header.push_back(ds.target_name());
  csv::write_row(out, header);
  std::vector<std::string> fields(ds.cols() + 1);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto row = ds.row(i);
    for (std::size_t j = 0; j < ds.cols(); ++j) fields[j] = csv::format_double(row[j]);
    fields.back() = csv::format_double(ds.response()[static_cast<Eigen::Index>(i)]);
    csv::write_row(out, fields);
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0, 1)");
  }
  if (n < 5) throw DataError("split needs at least 5 rows, got " + std::to_string(n));
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) {
    throw DataError("split of " + std::to_string(n) + " rows at fraction " +
                    csv::format_double(spec.test_fraction) + " leaves an empty side");
  }
  const auto perm = permutation(n, spec.seed);
  SplitIndices out;
  out.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  const auto idx = split_indices(ds.rows(), spec);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

TrainPartition partition_train(std::size_t n_train, std::uint64_t seed) {
  if (n_train < 4) {
    throw DataError("training partition needs at least 4 rows, got " + std::to_string(n_train));
  }
  const std::size_t n1 = (n_train + 1) / 2;
  const auto perm = permutation(n_train, seed);
  TrainPartition p;
  p.build_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n1));
  p.aggregation_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(n1), perm.end());
  std::sort(p.build_indices.begin(), p.build_indices.end());
  std::sort(p.aggregation_indices.begin(), p.aggregation_indices.end());
  return p;
}

TrainPartition partition_train(const Dataset& train, std::uint64_t seed) {
  return partition_train(train.rows(), seed);
}

double rmse(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) {
    throw DataError("rmse: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                    std::to_string(actual.size()) + ")");
  }
  if (predicted.empty()) throw DataError("rmse: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double diff = predicted[i] - actual[i];
    sum += diff * diff;
  }
  const double out = std::sqrt(sum / static_cast<double>(predicted.size()));
  if (!std::isfinite(out)) throw NumericalError("rmse: non-finite input");
  return out;
}

double rmse(const Vector& predicted, const Vector& actual) {
  return rmse(std::span<const double>(predicted.data(), static_cast<std::size_t>(predicted.size())),
              std::span<const double>(actual.data(), static_cast<std::size_t>(actual.size())));
}

double max_abs(std::span<const double> values) noexcept {
  double m = 0.0;
  for (const double v : values) m = std::max(m, std::abs(v));
  return m;
}

void save_prediction_csv(const PredictionMatrix& pm, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  csv::write_row(out, pm.labels());
  std::vector<std::string> fields(pm.machines());
  for (std::size_t i = 0; i < pm.rows(); ++i) {
    const auto row = pm.row(i);
    for (std::size_t j = 0; j < pm.machines(); ++j) fields[j] = csv::format_double(row[j]);
    csv::write_row(out, fields);
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

PredictionMatrix load_prediction_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  if (table.rows.empty()) throw DataError(path.string() + ": no data rows");
  Matrix v(static_cast<Eigen::Index>(table.rows.size()),
           static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const auto parsed = csv::parse_double(table.rows[r][c]);
      if (!parsed || !std::isfinite(*parsed)) {
        throw DataError(path.string() + ": row " + std::to_string(r + 1) + ", column '" +
                        table.header[c] + "': invalid value '" + table.rows[r][c] + "'");
      }
      v(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *parsed;
    }
  }
  return PredictionMatrix(std::move(v), table.header);
}

void save_vector_csv(const Vector& v, const std::string& header,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << header << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) out << csv::format_double(v[i]) << '\n';
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace rpcomb
