#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "rpcomb/random.hpp"

namespace rpcomb {
namespace {

TEST(RandomTest, SameSeedSameStream) {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomTest, DerivedSeedsDifferByKeyAndOrder) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 50; ++r)
    for (std::uint64_t m = 0; m < 50; ++m) seen.insert(derive_seed(7, {r, m}));
  EXPECT_EQ(seen.size(), 2500u);
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(7, {2, 1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(8, {1}));
  EXPECT_NE(derive_seed(7, {1}), derive_seed(7, {1, 0}));
}

TEST(RandomTest, UniformMomentsAndRange) {
  CounterRng rng(3);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  // 5 standard errors: sd(U) = 1/sqrt(12), sd(U^2) = sqrt(4/45).
  EXPECT_NEAR(sum / n, 0.5, 5.0 / std::sqrt(12.0 * n));
  EXPECT_NEAR(sq / n, 1.0 / 3.0, 5.0 * std::sqrt(4.0 / 45.0 / n));
}

TEST(RandomTest, BelowIsRoughlyUniform) {
  CounterRng rng(11);
  const int k = 7, n = 70000;
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) ++counts[rng.below(k)];
  double chi2 = 0.0;
  for (const int c : counts) chi2 += (c - n / k) * double(c - n / k) / (n / k);
  // 0.999 quantile of chi2 with 6 degrees of freedom is 22.46.
  EXPECT_LT(chi2, 22.46);
}

TEST(RandomTest, NormalMoments) {
  CounterRng rng(5);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(RandomTest, NormalAtIsRandomAccessAndStable) {
  for (std::uint64_t i = 0; i < 10; ++i) {
    EXPECT_EQ(CounterRng::normal_at(99, i), CounterRng::normal_at(99, i));
  }
  EXPECT_NE(CounterRng::normal_at(99, 0), CounterRng::normal_at(99, 1));
  EXPECT_NE(CounterRng::normal_at(99, 0), CounterRng::normal_at(100, 0));
  // The index-th draw matches the cosine half of the sequential generator.
  CounterRng seq(99);
  for (std::uint64_t i = 0; i < 10; ++i) {
    EXPECT_DOUBLE_EQ(seq.normal(), CounterRng::normal_at(99, i));
    seq.normal();  // skip the sine half
  }
}

TEST(RandomTest, PermutationIsAPermutation) {
  auto p = permutation(1000, 17);
  EXPECT_EQ(p, permutation(1000, 17));
  EXPECT_NE(p, permutation(1000, 18));
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
  EXPECT_TRUE(permutation(0, 1).empty());
}

TEST(RandomTest, PermutationFirstSlotUniform) {
  const int n = 5, trials = 50000;
  std::vector<int> counts(n, 0);
  for (int t = 0; t < trials; ++t) ++counts[permutation(n, derive_seed(1, {std::uint64_t(t)}))[0]];
  double chi2 = 0.0;
  for (const int c : counts) chi2 += (c - trials / n) * double(c - trials / n) / (trials / n);
  EXPECT_LT(chi2, 18.47);  // chi2(4) 0.999 quantile
}

}  // namespace
}  // namespace rpcomb
