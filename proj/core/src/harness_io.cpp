// Summaries and the on-disk result tables of an experiment.
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "csv.hpp"
#include "rpcomb/harness.hpp"

namespace rpcomb {

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Better>
std::map<Family, double> extreme_machine_rmse(const RunResult& result, Better better) {
  std::map<Family, double> out;
  for (const auto& m : result.machines) {
    auto [it, inserted] = out.emplace(m.family, m.rmse);
    if (!inserted && better(m.rmse, it->second)) it->second = m.rmse;
  }
  return out;
}

// Methods in reporting order: best_*, worst_*, baseline_mean, Comb_<m>
// ascending, Comb_Full.
struct MethodKey {
  int group;
  std::size_t order;
  bool operator<(const MethodKey& o) const {
    return group != o.group ? group < o.group : order < o.order;
  }
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::string fmt(double v) { return csv::format_double(v); }

std::size_t column_of(const csv::Table& t, const std::string& name, const std::string& file) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw DataError(file + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

double real_field(const std::string& text, const std::string& file) {
  const auto v = csv::parse_double(text);
  if (!v) throw DataError(file + ": bad number '" + text + "'");
  return *v;
}

std::uint64_t uint_field(const std::string& text, const std::string& file) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw DataError(file + ": bad integer '" + text + "'");
  }
  return std::stoull(text);
}

}  // namespace

std::map<Family, double> best_machine_rmse(const RunResult& result) {
  return extreme_machine_rmse(result, std::less<double>{});
}

std::map<Family, double> worst_machine_rmse(const RunResult& result) {
  return extreme_machine_rmse(result, std::greater<double>{});
}

std::vector<MethodSummary> summarize(std::span<const RunResult> results) {
  std::map<MethodKey, std::pair<std::string, std::vector<double>>> rmses;
  std::map<MethodKey, std::vector<double>> seconds;
  for (const auto& run : results) {
    for (const auto& [family, value] : best_machine_rmse(run)) {
      auto& slot = rmses[{0, static_cast<std::size_t>(family)}];
      slot.first = "best_" + std::string(family_name(family));
      slot.second.push_back(value);
    }
    for (const auto& [family, value] : worst_machine_rmse(run)) {
      auto& slot = rmses[{1, static_cast<std::size_t>(family)}];
      slot.first = "worst_" + std::string(family_name(family));
      slot.second.push_back(value);
    }
    auto& base = rmses[{2, 0}];
    base.first = "baseline_mean";
    base.second.push_back(run.baseline_rmse);
    for (const auto& a : run.aggregators) {
      const MethodKey key = a.m == 0 ? MethodKey{3, 0} : MethodKey{2, a.m};  // m >= 1
      rmses[key].first = a.method;
      rmses[key].second.push_back(a.rmse);
      seconds[key].push_back(a.seconds);
    }
  }

  std::vector<MethodSummary> out;
  for (const auto& [key, entry] : rmses) {
    MethodSummary s;
    s.method = entry.first;
    s.count = entry.second.size();
    s.mean_rmse = mean_of(entry.second);
    s.std_rmse = sample_sd(entry.second);
    s.degenerate = s.count < 2;
    if (const auto it = seconds.find(key); it != seconds.end()) {
      s.mean_seconds = mean_of(it->second);
      s.median_seconds = median_of(it->second);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TimingStats> timing_report(std::span<const RunResult> results) {
  std::map<std::size_t, std::pair<std::string, std::vector<double>>> by_m;
  for (const auto& run : results) {
    for (const auto& a : run.aggregators) {
      by_m[a.m].first = a.method;
      by_m[a.m].second.push_back(a.seconds);
    }
  }
  std::optional<double> full_mean;
  if (const auto it = by_m.find(0); it != by_m.end()) full_mean = mean_of(it->second.second);

  std::vector<TimingStats> out;
  for (const auto& [m, entry] : by_m) {
    if (m == 0) continue;
    TimingStats t{entry.first, m, mean_of(entry.second), median_of(entry.second), std::nullopt};
    if (full_mean && t.mean_seconds > 0.0) t.full_ratio = *full_mean / t.mean_seconds;
    out.push_back(std::move(t));
  }
  if (full_mean) {
    const auto& entry = by_m.at(0);
    out.push_back({entry.first, 0, *full_mean, median_of(entry.second), 1.0});
  }
  return out;
}

void write_summary(std::span<const RunResult> results, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto summary = summarize(results);

  auto out = open_out(dir / "summary.csv");
  csv::write_row(out, {"method", "count", "mean_rmse", "std_rmse", "degenerate", "mean_seconds",
                       "median_seconds"});
  for (const auto& s : summary) {
    csv::write_row(out, {s.method, std::to_string(s.count), fmt(s.mean_rmse), fmt(s.std_rmse),
                         s.degenerate ? "true" : "false",
                         s.mean_seconds ? fmt(*s.mean_seconds) : "",
                         s.median_seconds ? fmt(*s.median_seconds) : ""});
  }

  nlohmann::json doc;
  doc["replications"] = results.size();
  doc["methods"] = nlohmann::json::array();
  for (const auto& s : summary) {
    nlohmann::json m{{"method", s.method},
                     {"count", s.count},
                     {"mean_rmse", s.mean_rmse},
                     {"std_rmse", s.std_rmse},
                     {"degenerate", s.degenerate}};
    if (s.mean_seconds) m["mean_seconds"] = *s.mean_seconds;
    if (s.median_seconds) m["median_seconds"] = *s.median_seconds;
    doc["methods"].push_back(std::move(m));
  }
  doc["timing"] = nlohmann::json::array();
  for (const auto& t : timing_report(results)) {
    nlohmann::json j{{"method", t.method},
                     {"m", t.m},
                     {"mean_seconds", t.mean_seconds},
                     {"median_seconds", t.median_seconds}};
    if (t.full_ratio) j["full_ratio"] = *t.full_ratio;
    doc["timing"].push_back(std::move(j));
  }
  auto json_out = open_out(dir / "summary.json");
  json_out << doc.dump(2) << '\n';
}

void write_results(const ExperimentOutcome& outcome, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  // runs.csv carries no wall-clock values so equal seeds give equal bytes.
  auto runs = open_out(dir / "runs.csv");
  csv::write_row(runs, {"replication", "seed", "method", "m", "rmse", "h", "tune_iterations",
                        "converged", "projection_seed"});
  auto machines = open_out(dir / "machines.csv");
  csv::write_row(machines, {"replication", "label", "family", "rmse"});
  auto timings = open_out(dir / "timings.csv");
  csv::write_row(timings, {"replication", "method", "m", "seconds"});

  for (const auto& run : outcome.runs) {
    const auto rep = std::to_string(run.replication);
    const auto seed = std::to_string(run.seed);
    for (const auto& [family, value] : best_machine_rmse(run)) {
      csv::write_row(runs, {rep, seed, "best_" + std::string(family_name(family)), "", fmt(value),
                            "", "", "", ""});
    }
    for (const auto& [family, value] : worst_machine_rmse(run)) {
      csv::write_row(runs, {rep, seed, "worst_" + std::string(family_name(family)), "", fmt(value),
                            "", "", "", ""});
    }
    csv::write_row(runs, {rep, seed, "baseline_mean", "", fmt(run.baseline_rmse), "", "", "", ""});
    for (const auto& a : run.aggregators) {
      csv::write_row(runs, {rep, seed, a.method, std::to_string(a.m), fmt(a.rmse), fmt(a.h),
                            std::to_string(a.tune_iterations), a.tune_converged ? "true" : "false",
                            a.m == 0 ? "" : std::to_string(a.projection_seed)});
      csv::write_row(timings, {rep, a.method, std::to_string(a.m), fmt(a.seconds)});
    }
    for (const auto& m : run.machines) {
      csv::write_row(machines, {rep, m.label, std::string(family_name(m.family)), fmt(m.rmse)});
    }
  }

  if (!outcome.failures.empty()) {
    auto failures = open_out(dir / "failures.csv");
    csv::write_row(failures, {"replication", "seed", "stage", "kind", "message"});
    for (const auto& f : outcome.failures) {
      std::string message = f.message;
      std::replace(message.begin(), message.end(), ',', ';');
      std::replace(message.begin(), message.end(), '\n', ' ');
      const char* kind = f.kind == ErrorKind::kConfig ? "config"
                         : f.kind == ErrorKind::kData ? "data"
                                                      : "numerical";
      csv::write_row(failures, {std::to_string(f.replication), std::to_string(f.seed), f.stage,
                                kind, message});
    }
  }
  write_summary(outcome.runs, dir);
}

std::vector<RunResult> load_results(const std::filesystem::path& dir) {
  std::map<std::size_t, RunResult> by_rep;

  const auto runs = csv::read(dir / "runs.csv");
  {
    const std::string file = "runs.csv";
    const auto c_rep = column_of(runs, "replication", file);
    const auto c_seed = column_of(runs, "seed", file);
    const auto c_method = column_of(runs, "method", file);
    const auto c_m = column_of(runs, "m", file);
    const auto c_rmse = column_of(runs, "rmse", file);
    const auto c_h = column_of(runs, "h", file);
    const auto c_it = column_of(runs, "tune_iterations", file);
    const auto c_conv = column_of(runs, "converged", file);
    const auto c_pseed = column_of(runs, "projection_seed", file);
    for (const auto& row : runs.rows) {
      const auto rep = uint_field(row[c_rep], file);
      auto& run = by_rep[rep];
      run.replication = rep;
      run.seed = uint_field(row[c_seed], file);
      const auto& method = row[c_method];
      if (method == "baseline_mean") run.baseline_rmse = real_field(row[c_rmse], file);
      if (method.rfind("Comb_", 0) != 0) continue;  // best_/worst_ rows are derived
      AggregatorScore a;
      a.method = method;
      a.m = uint_field(row[c_m], file);
      a.rmse = real_field(row[c_rmse], file);
      a.h = real_field(row[c_h], file);
      a.tune_iterations = uint_field(row[c_it], file);
      a.tune_converged = row[c_conv] == "true";
      a.projection_seed = row[c_pseed].empty() ? 0 : uint_field(row[c_pseed], file);
      run.aggregators.push_back(std::move(a));
    }
  }

  const auto machines = csv::read(dir / "machines.csv");
  {
    const std::string file = "machines.csv";
    const auto c_rep = column_of(machines, "replication", file);
    const auto c_label = column_of(machines, "label", file);
    const auto c_family = column_of(machines, "family", file);
    const auto c_rmse = column_of(machines, "rmse", file);
    for (const auto& row : machines.rows) {
      const auto rep = uint_field(row[c_rep], file);
      const auto family = parse_family(row[c_family]);
      if (!family) throw DataError(file + ": unknown family '" + row[c_family] + "'");
      by_rep[rep].replication = rep;
      by_rep[rep].machines.push_back({row[c_label], *family, real_field(row[c_rmse], file)});
    }
  }

  if (std::filesystem::exists(dir / "timings.csv")) {
    const auto timings = csv::read(dir / "timings.csv");
    const std::string file = "timings.csv";
    const auto c_rep = column_of(timings, "replication", file);
    const auto c_m = column_of(timings, "m", file);
    const auto c_sec = column_of(timings, "seconds", file);
    for (const auto& row : timings.rows) {
      auto it = by_rep.find(uint_field(row[c_rep], file));
      if (it == by_rep.end()) continue;
      const auto m = uint_field(row[c_m], file);
      for (auto& a : it->second.aggregators) {
        if (a.m == m) a.seconds = real_field(row[c_sec], file);
      }
    }
  }

  std::vector<RunResult> out;
  for (auto& [rep, run] : by_rep) out.push_back(std::move(run));
  return out;
}

}  // namespace rpcomb
