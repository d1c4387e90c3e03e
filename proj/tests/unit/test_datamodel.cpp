#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "rpcomb/datamodel.hpp"
#include "rpcomb/error.hpp"
#include "test_util.hpp"

namespace rpcomb {
namespace {

using testing::data_path;
using testing::make_dataset;
using testing::scratch_dir;

TEST(DatasetTest, RejectsNonFiniteAndShapeErrors) {
  Matrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  Vector y(3);
  y << 1, 2, 3;
  EXPECT_NO_THROW(make_dataset(x, y));

  Matrix bad = x;
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(make_dataset(bad, y), DataError);
  Vector bad_y = y;
  bad_y[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(make_dataset(x, bad_y), DataError);
  EXPECT_THROW(make_dataset(x, Vector::Zero(2)), DataError);
  EXPECT_THROW(Dataset(x, y, {"a", "a"}), DataError);
  EXPECT_THROW(Dataset(x, y, {"a"}), DataError);
  EXPECT_THROW(make_dataset(Matrix(0, 2), Vector(0)), DataError);
}

TEST(DatasetTest, SubsetKeepsOrderAndRepeats) {
  Matrix x(3, 1);
  x << 10, 20, 30;
  Vector y(3);
  y << 1, 2, 3;
  const auto ds = make_dataset(x, y);
  const std::vector<std::size_t> idx{2, 0, 2};
  const auto s = ds.subset(idx);
  ASSERT_EQ(s.rows(), 3u);
  EXPECT_EQ(s.features()(0, 0), 30);
  EXPECT_EQ(s.features()(1, 0), 10);
  EXPECT_EQ(s.response()[2], 3);
  const std::vector<std::size_t> out_of_range{3};
  EXPECT_THROW(ds.subset(out_of_range), DataError);
}

TEST(CsvTest, LoadsNumericFile) {
  const auto ds = load_csv(data_path("small.csv"), "y");
  EXPECT_EQ(ds.rows(), 12u);
  EXPECT_EQ(ds.cols(), 3u);
  EXPECT_EQ(ds.column_names(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(ds.target_name(), "y");
}

TEST(CsvTest, OneHotEncodesCategoricalColumn) {
  const auto ds = load_csv(data_path("abalone_sample.csv"), "Rings");
  EXPECT_EQ(ds.rows(), 80u);
  EXPECT_EQ(ds.cols(), 10u);
  const auto& names = ds.column_names();
  EXPECT_EQ(names[0], "Sex_F");
  EXPECT_EQ(names[1], "Sex_I");
  EXPECT_EQ(names[2], "Sex_M");
  EXPECT_EQ(names[3], "Length");
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto r = ds.row(i);
    EXPECT_DOUBLE_EQ(r[0] + r[1] + r[2], 1.0);
  }
  CsvLoadOptions strict;
  strict.one_hot_categorical = false;
  EXPECT_THROW(load_csv(data_path("abalone_sample.csv"), "Rings", strict), DataError);
}

TEST(CsvTest, ErrorsNameTheCell) {
  try {
    load_csv(data_path("bad_value.csv"), "y");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("x2"), std::string::npos) << msg;
  }
  EXPECT_THROW(load_csv(data_path("ragged.csv"), "y"), DataError);
  EXPECT_THROW(load_csv(data_path("small.csv"), "missing"), DataError);
  EXPECT_THROW(load_csv(data_path("does_not_exist.csv"), "y"), DataError);
}

TEST(CsvTest, SaveLoadRoundTripIsExact) {
  std::mt19937_64 gen(1);
  const auto ds = make_dataset(testing::random_matrix(gen, 20, 4), testing::random_vector(gen, 20));
  const auto path = scratch_dir() / "ds.csv";
  save_csv(ds, path);
  const auto back = load_csv(path, "y");
  EXPECT_EQ(back.features(), ds.features());
  EXPECT_EQ(back.response(), ds.response());
  EXPECT_EQ(back.column_names(), ds.column_names());
}

TEST(SplitTest, SizesDisjointAndDeterministic) {
  for (const std::size_t n : {5u, 17u, 600u, 801u}) {
    const auto s = split_indices(n, {0.2, 9});
    EXPECT_EQ(s.test.size(), static_cast<std::size_t>(std::llround(0.2 * n)));
    EXPECT_EQ(s.train.size() + s.test.size(), n);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    EXPECT_EQ(all.size(), n);
    EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
    const auto again = split_indices(n, {0.2, 9});
    EXPECT_EQ(again.train, s.train);
  }
  EXPECT_NE(split_indices(100, {0.2, 1}).test, split_indices(100, {0.2, 2}).test);
  EXPECT_THROW(split_indices(4, {0.2, 1}), DataError);
  EXPECT_THROW(split_indices(100, {0.0, 1}), ConfigError);
  EXPECT_THROW(split_indices(100, {1.0, 1}), ConfigError);
}

TEST(SplitTest, PartitionHalves) {
  for (const std::size_t n : {4u, 5u, 480u, 641u}) {
    const auto p = partition_train(n, 3);
    EXPECT_EQ(p.build_indices.size(), (n + 1) / 2);
    EXPECT_EQ(p.build_indices.size() + p.aggregation_indices.size(), n);
    std::vector<std::size_t> inter;
    std::set_intersection(p.build_indices.begin(), p.build_indices.end(),
                          p.aggregation_indices.begin(), p.aggregation_indices.end(),
                          std::back_inserter(inter));
    EXPECT_TRUE(inter.empty());
  }
  EXPECT_THROW(partition_train(3, 0), DataError);
}

TEST(MetricsTest, RmseByHand) {
  const std::vector<double> p{1, 2, 3}, a{1, 4, 0};
  EXPECT_DOUBLE_EQ(rmse(p, a), std::sqrt(13.0 / 3.0));
  EXPECT_THROW(rmse(std::vector<double>{1}, std::vector<double>{1, 2}), DataError);
  EXPECT_THROW(rmse(std::vector<double>{}, std::vector<double>{}), DataError);
  EXPECT_DOUBLE_EQ(max_abs(std::vector<double>{-3, 2}), 3.0);
}

TEST(PredictionMatrixTest, BoundCoversValuesAndLabelsAreChecked) {
  Matrix v(2, 2);
  v << 1, -4, 2, 3;
  const PredictionMatrix pm(v, {"a", "b"}, 1.0);
  EXPECT_DOUBLE_EQ(pm.bound_R0(), 4.0);
  EXPECT_DOUBLE_EQ(PredictionMatrix(v, {"a", "b"}, 9.0).bound_R0(), 9.0);
  EXPECT_GT(PredictionMatrix(Matrix::Zero(2, 2), {"a", "b"}).bound_R0(), 0.0);
  EXPECT_THROW(PredictionMatrix(v, {"a", "a"}), DataError);
  EXPECT_THROW(PredictionMatrix(v, {"a"}), DataError);
  v(0, 0) = std::nan("");
  EXPECT_THROW(PredictionMatrix(v, {"a", "b"}), DataError);
}

TEST(PredictionMatrixTest, CsvRoundTrip) {
  std::mt19937_64 gen(2);
  const PredictionMatrix pm(testing::random_matrix(gen, 7, 3), {"m1", "m2", "m3"});
  const auto path = scratch_dir() / "pm.csv";
  save_prediction_csv(pm, path);
  const auto back = load_prediction_csv(path);
  EXPECT_EQ(back.values(), pm.values());
  EXPECT_EQ(back.labels(), pm.labels());
}

}  // namespace
}  // namespace rpcomb
