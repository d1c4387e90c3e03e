#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rpcomb/datamodel.hpp"
#include "rpcomb/random.hpp"

namespace rpcomb {

struct TreeParams {
  std::size_t max_depth = 12;
  std::size_t min_leaf = 5;
  /// Features examined per split; 0 means all of them.
  std::size_t max_features = 0;
};

/// CART regression tree stored as a flat node array; splits minimize the sum of
/// squared errors and send x[feature] <= threshold to the left child.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
  };

  RegressionTree() = default;
  explicit RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const noexcept;

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t depth() const;
  std::size_t leaf_count() const;

 private:
  std::vector<Node> nodes_;
};

/// Grows trees on a fixed multiset of training rows. The per-feature sort of
/// the sample is done once and reused for every tree fitted through the same
/// builder (boosting stages refit the same rows against new targets).
class TreeBuilder {
 public:
  /// `rows` are indices into `x` and may repeat (bootstrap samples).
  TreeBuilder(const Matrix& x, std::vector<std::size_t> rows);

  std::size_t sample_size() const noexcept { return rows_.size(); }

  /// `targets[s]` is the target of sample s (aligned with `rows`). `rng` is
  /// only consulted when params.max_features selects a feature subset.
  RegressionTree fit(std::span<const double> targets, const TreeParams& params,
                     CounterRng* rng = nullptr) const;

 private:
  const Matrix& x_;
  std::vector<std::size_t> rows_;
  std::vector<std::vector<std::uint32_t>> sorted_;  // per feature, sample ids by value
};

}  // namespace rpcomb
