#include "rpcomb/tree.hpp"

#include <algorithm>
#include <numeric>

#include "rpcomb/error.hpp"

namespace rpcomb {

double RegressionTree::predict(std::span<const double> x) const noexcept {
  if (nodes_.empty()) return 0.0;
  std::int32_t i = 0;
  while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes_[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(i)].value;
}

std::size_t RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  // Children always come after their parent in the array.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
}

TreeBuilder::TreeBuilder(const Matrix& x, std::vector<std::size_t> rows)
    : x_(x), rows_(std::move(rows)) {
  if (rows_.empty()) throw DataError("tree builder needs at least one sample");
  const auto d = static_cast<std::size_t>(x_.cols());
  const auto s = rows_.size();
  sorted_.resize(d);
  for (std::size_t f = 0; f < d; ++f) {
    auto& order = sorted_[f];
    order.resize(s);
    std::iota(order.begin(), order.end(), 0u);
    const auto col = static_cast<Eigen::Index>(f);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x_(static_cast<Eigen::Index>(rows_[a]), col) <
             x_(static_cast<Eigen::Index>(rows_[b]), col);
    });
  }
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  std::size_t left_count = 0;
  double gain = 0.0;
};

class Grower {
 public:
  Grower(const Matrix& x, const std::vector<std::size_t>& rows,
         std::vector<std::vector<std::uint32_t>> order, std::span<const double> targets,
         const TreeParams& params, CounterRng* rng)
      : x_(x),
        rows_(rows),
        order_(std::move(order)),
        targets_(targets),
        params_(params),
        rng_(rng),
        goes_left_(rows.size(), 0),
        buffer_(rows.size()),
        features_(order_.size()) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  std::vector<RegressionTree::Node> grow() {
    grow_node(0, rows_.size(), 0);
    return std::move(nodes_);
  }

 private:
  double value(std::uint32_t sample, std::size_t feature) const {
    return x_(static_cast<Eigen::Index>(rows_[sample]), static_cast<Eigen::Index>(feature));
  }

  std::span<const std::size_t> candidate_features() {
    const std::size_t d = features_.size();
    const std::size_t mtry = params_.max_features;
    if (mtry == 0 || mtry >= d || rng_ == nullptr) return features_;
    // Partial Fisher-Yates: the first mtry slots become a uniform subset.
    for (std::size_t i = 0; i < mtry; ++i) {
      const auto j = i + static_cast<std::size_t>(rng_->below(d - i));
      std::swap(features_[i], features_[j]);
    }
    return std::span<const std::size_t>(features_).first(mtry);
  }

  Split best_split(std::size_t lo, std::size_t hi, double sum, double total_ss) {
    Split best;
    const std::size_t n = hi - lo;
    const std::size_t min_leaf = std::max<std::size_t>(1, params_.min_leaf);
    if (n < 2 * min_leaf || !(total_ss > 0.0)) return best;
    const double parent = sum * sum / static_cast<double>(n);
    const double min_gain = 1e-12 * total_ss;

    for (const std::size_t f : candidate_features()) {
      const auto& order = order_[f];
      double left_sum = 0.0;
      for (std::size_t i = lo; i + 1 < hi; ++i) {
        left_sum += targets_[order[i]];
        const std::size_t nl = i - lo + 1;
        const std::size_t nr = n - nl;
        if (nl < min_leaf) continue;
        if (nr < min_leaf) break;
        const double xi = value(order[i], f);
        const double xn = value(order[i + 1], f);
        if (!(xi < xn)) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - parent;
        if (gain > min_gain && gain > best.gain) {
          double threshold = 0.5 * (xi + xn);
          if (!(threshold < xn)) threshold = xi;
          best = {static_cast<int>(f), threshold, nl, gain};
        }
      }
    }
    return best;
  }

  std::int32_t grow_node(std::size_t lo, std::size_t hi, std::size_t depth) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();

    double sum = 0.0;
    double sumsq = 0.0;
    const auto& any_order = order_.front();
    for (std::size_t i = lo; i < hi; ++i) {
      const double t = targets_[any_order[i]];
      sum += t;
      sumsq += t * t;
    }
    const double n = static_cast<double>(hi - lo);
    const double mean = sum / n;
    const double total_ss = std::max(0.0, sumsq - sum * mean);
    nodes_[static_cast<std::size_t>(index)].value = mean;

    if (depth >= params_.max_depth) return index;
    const Split split = best_split(lo, hi, sum, total_ss);
    if (split.feature < 0) return index;

    const auto& split_order = order_[static_cast<std::size_t>(split.feature)];
    for (std::size_t i = lo; i < hi; ++i) goes_left_[split_order[i]] = i < lo + split.left_count;
    for (auto& order : order_) {
      auto* left_out = buffer_.data();
      auto* right_out = buffer_.data() + split.left_count;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto s = order[i];
        if (goes_left_[s]) *left_out++ = s; else *right_out++ = s;
      }
      std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(hi - lo),
                order.begin() + static_cast<std::ptrdiff_t>(lo));
    }

    const std::size_t mid = lo + split.left_count;
    const auto left = grow_node(lo, mid, depth + 1);
    const auto right = grow_node(mid, hi, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  const Matrix& x_;
  const std::vector<std::size_t>& rows_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::span<const double> targets_;
  TreeParams params_;
  CounterRng* rng_;
  std::vector<char> goes_left_;
  std::vector<std::uint32_t> buffer_;
  std::vector<std::size_t> features_;
  std::vector<RegressionTree::Node> nodes_;
};

}  // namespace

RegressionTree TreeBuilder::fit(std::span<const double> targets, const TreeParams& params,
                                CounterRng* rng) const {
  if (targets.size() != rows_.size()) {
    throw DataError("tree targets do not match the sample size");
  }
  Grower grower(x_, rows_, sorted_, targets, params, rng);
  return RegressionTree(grower.grow());
}

}  // namespace rpcomb
