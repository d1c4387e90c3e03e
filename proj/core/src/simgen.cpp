#include "rpcomb/simgen.hpp"

#include <cmath>

#include "rpcomb/error.hpp"
#include "rpcomb/random.hpp"

namespace rpcomb {

namespace {

void check_model(int id) {
  if (id < 1 || id > 5) throw ConfigError("model id must be 1..5, got " + std::to_string(id));
}

}  // namespace

SimModelSpec SimModelSpec::defaults(int model_id, std::uint64_t seed) {
  check_model(model_id);
  static constexpr std::size_t kN[] = {600, 800, 800, 800, 800};
  static constexpr std::size_t kD[] = {10, 30, 50, 100, 100};
  return {model_id, kN[model_id - 1], kD[model_id - 1], seed};
}

std::size_t min_dimension(int model_id) {
  check_model(model_id);
  static constexpr std::size_t kMin[] = {10, 29, 50, 100, 100};
  return kMin[model_id - 1];
}

double signal(int model_id, std::span<const double> x) {
  if (x.size() < min_dimension(model_id)) {
    throw ConfigError("model " + std::to_string(model_id) + " needs d >= " +
                      std::to_string(min_dimension(model_id)));
  }
  // 1-based coordinate access, matching the written formulas.
  const auto X = [&](int k) { return x[static_cast<std::size_t>(k - 1)]; };
  switch (model_id) {
    case 1:
      return X(1) * X(1) - X(3) * X(3) + 3.0 * X(4) * std::exp(-X(5)) -
             std::pow(X(7), 3) * std::exp(-X(8) * X(9) + X(5) * X(10));
    case 2: {
      double y = 0.0;
      for (int j = 1; j <= 5; ++j) {
        y += 3.0 * std::pow(X(2 * j), 3) * std::exp(X(30 - j) - X(2 * j + 1)) -
             2.0 * std::pow(X(2 * j - 1), 3) * std::exp(X(2 * j) - X(30 - 3 * j));
      }
      return y;
    }
    case 3: {
      double s = 0.0;
      for (int j = 1; j <= 5; ++j) s += (1.0 + X(5 + j)) / (2.0 - X(45 + j));
      return (1.0 - X(1) * X(1) + 2.0 * X(3) * X(4)) / (1.1 + X(5)) -
             2.0 * std::sqrt(1.0 + s) * std::exp(-X(10) + X(20) - X(30));
    }
    case 4: {
      double s = 0.0;
      for (int j = 1; j <= 10; ++j) s += X(10 * j);
      return (X(1) * X(1) - X(2) * X(2)) * (1.0 - std::exp(-X(5) * X(7))) +
             3.0 * X(3) * std::exp(-s);
    }
    case 5: {
      const double denom = 1.0 - std::sin(X(1) * X(2));
      double s = 0.0;
      for (int j = 1; j <= 10; ++j) {
        const double p = std::ldexp(1.0, j);
        s += (p + 1.0) / (p - 1.0) * X(5 * j) * X(10 * j) * X(j);
      }
      return (1.0 + std::sin(X(1) + X(2))) / denom - s;
    }
    default:
      check_model(model_id);
      return 0.0;
  }
}

Dataset generate(const SimModelSpec& spec) {
  check_model(spec.model_id);
  const auto defaults = SimModelSpec::defaults(spec.model_id, spec.seed);
  const std::size_t n = spec.n ? spec.n : defaults.n;
  const std::size_t d = spec.d ? spec.d : defaults.d;
  if (d < min_dimension(spec.model_id)) {
    throw ConfigError("model " + std::to_string(spec.model_id) + " references X_" +
                      std::to_string(min_dimension(spec.model_id)) + " but d=" + std::to_string(d));
  }

  CounterRng feature_rng(derive_seed(spec.seed, {0x46454154ULL}));  // "FEAT"
  CounterRng noise_rng(derive_seed(spec.seed, {0x4E4F4953ULL}));    // "NOIS"
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Vector y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = feature_rng.uniform(-1.0, 1.0);
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const std::span<const double> row(x.data() + static_cast<std::size_t>(i) * d, d);
    if (spec.model_id == 5) {
      const double denom = 1.0 - std::sin(row[0] * row[1]);
      if (!(denom > 0.15)) throw NumericalError("model 5 denominator fell to " + std::to_string(denom));
    }
    y[i] = signal(spec.model_id, row) + noise_rng.normal();
  }

  std::vector<std::string> names;
  names.reserve(d);
  for (std::size_t j = 1; j <= d; ++j) names.push_back("X" + std::to_string(j));
  return Dataset(std::move(x), std::move(y), std::move(names),
                 "model" + std::to_string(spec.model_id), "Y");
}

}  // namespace rpcomb
