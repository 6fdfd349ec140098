#pragma once

// Config-driven experiment runner behind the command-line tool. Reads one
// JSON document, runs one named experiment, writes CSV tables plus
// summary.json. Outputs are staged next to the target directory and moved in
// only after the experiment finishes.

#include <Eigen/Dense>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "momentrl/ensemble.hpp"
#include "momentrl/error.hpp"
#include "momentrl/frl.hpp"
#include "momentrl/oracle.hpp"

#ifndef MOMENTRL_VERSION
#define MOMENTRL_VERSION "0.0.0"
#endif

namespace momentrl::cli {

inline constexpr const char* kVersion = MOMENTRL_VERSION;

enum ExitCode : int { kOk = 0, kIoError = 1, kConfigError = 2, kNumericalError = 3 };

enum class Experiment { kCurseDemo, kLqrFinite, kLqrInfinite, kBloch };

inline const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::kCurseDemo: return "curse-demo";
    case Experiment::kLqrFinite: return "lqr-finite";
    case Experiment::kLqrInfinite: return "lqr-infinite";
    case Experiment::kBloch: return "bloch";
  }
  return "";
}

struct ExperimentConfig {
  Experiment experiment = Experiment::kLqrFinite;
  std::filesystem::path output_dir = "out";
  bool record_wall_time = true;

  // lqr-finite, bloch
  FrlConfig frl;
  int beta_count = kDefaultBetaCount;
  std::vector<double> trajectory_betas;  // bloch; empty means {1 - delta, 1, 1 + delta}

  // curse-demo, lqr-infinite
  int range_lo = 0;
  int range_hi = 0;
  bool exact_row0 = false;
  oracle::DemoSettings demo;
};

namespace detail {

using nlohmann::json;

inline const std::set<std::string>& allowed_keys(Experiment e) {
  static const std::set<std::string> frl_common = {"experiment", "output_dir", "record_wall_time", "N0", "Nmax",
                                                   "epsilon", "eta", "K", "steps", "T", "damping", "orders",
                                                   "beta_count"};
  static const std::set<std::string> lqr_finite = [] {
    auto s = frl_common;
    s.insert("exact_row0");
    return s;
  }();
  static const std::set<std::string> bloch = [] {
    auto s = frl_common;
    s.insert({"delta", "trajectory_betas"});
    return s;
  }();
  static const std::set<std::string> curse = {"experiment", "output_dir", "record_wall_time", "n_range", "rho",
                                              "sim_T", "sim_steps"};
  static const std::set<std::string> lqr_infinite = {"experiment", "output_dir", "record_wall_time", "N_range",
                                                     "rho", "sim_T", "sim_steps", "exact_row0"};
  switch (e) {
    case Experiment::kCurseDemo: return curse;
    case Experiment::kLqrFinite: return lqr_finite;
    case Experiment::kLqrInfinite: return lqr_infinite;
    case Experiment::kBloch: return bloch;
  }
  return curse;
}

inline double get_number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(key, "'" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline double require_number(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(key, "missing required field '" + key + "'");
  return get_number(j, key, 0.0);
}

inline int get_int(const json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ConfigError(key, "'" + key + "' must be an integer");
  return j.at(key).get<int>();
}

inline bool get_bool(const json& j, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(key, "'" + key + "' must be true or false");
  return j.at(key).get<bool>();
}

/// A number, or the string "inf".
inline double get_threshold(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw ConfigError(key, "'" + key + "' must be a number or \"inf\"");
  return v.get<double>();
}

inline std::pair<int, int> require_range(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(key, "missing required field '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw ConfigError(key, "'" + key + "' must be a pair [first, last] of integers");
  }
  const int lo = v[0].get<int>();
  const int hi = v[1].get<int>();
  if (hi < lo) throw ConfigError(key, "'" + key + "' must satisfy first <= last");
  return {lo, hi};
}

inline void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, "'" + key + "' " + what);
}

inline void parse_frl(const json& j, ExperimentConfig& c, bool bloch) {
  FrlConfig& f = c.frl;
  f.epsilon = require_number(j, "epsilon");
  check(f.epsilon > 0.0, "epsilon", "must be > 0");
  f.n0 = get_int(j, "N0", 2);
  f.n_max = get_int(j, "Nmax", 10);
  check(f.n0 >= 0, "N0", "must be >= 0");
  check(f.n0 <= f.n_max, "Nmax", "must be >= N0");
  if (j.contains("orders")) {
    const json& o = j.at("orders");
    check(o.is_array() && !o.empty(), "orders", "must be a non-empty array of integers");
    for (const auto& v : o) {
      check(v.is_number_integer(), "orders", "must be a non-empty array of integers");
      f.orders.push_back(v.get<int>());
    }
    check(f.orders.front() >= 0, "orders", "must be >= 0");
    for (std::size_t i = 1; i < f.orders.size(); ++i) {
      check(f.orders[i] > f.orders[i - 1], "orders", "must be strictly increasing");
    }
  }
  f.search.eta = get_threshold(j, "eta", 1.0);
  check(f.search.eta > 0.0, "eta", "must be > 0");
  f.search.max_iters = get_int(j, "K", 50);
  check(f.search.max_iters >= 1, "K", "must be >= 1");
  f.search.damping = get_number(j, "damping", 1.0);
  check(f.search.damping > 0.0 && f.search.damping <= 1.0, "damping", "must lie in (0, 1]");
  const int steps = get_int(j, "steps", 200);
  check(steps >= 1, "steps", "must be >= 1");
  const double horizon = get_number(j, "T", 1.0);
  check(horizon > 0.0, "T", "must be > 0");
  f.grid = TimeGrid(0.0, horizon, steps);
  c.beta_count = get_int(j, "beta_count", kDefaultBetaCount);
  check(c.beta_count >= 2, "beta_count", "must be >= 2");
  if (bloch) {
    const double delta = get_number(j, "delta", 0.4);
    check(delta > 0.0 && delta < 1.0, "delta", "must lie in (0, 1)");
    f.problem = BlochProblem{delta};
    if (j.contains("trajectory_betas")) {
      const json& b = j.at("trajectory_betas");
      check(b.is_array() && !b.empty(), "trajectory_betas", "must be a non-empty array of numbers");
      for (const auto& v : b) {
        check(v.is_number(), "trajectory_betas", "must be a non-empty array of numbers");
        c.trajectory_betas.push_back(v.get<double>());
      }
    } else {
      c.trajectory_betas = {1.0 - delta, 1.0, 1.0 + delta};
    }
  } else {
    f.problem = LqrProblem{get_bool(j, "exact_row0", false)};
  }
}

inline void parse_demo(const json& j, ExperimentConfig& c, const std::string& range_key, int min_lo) {
  std::tie(c.range_lo, c.range_hi) = require_range(j, range_key);
  check(c.range_lo >= min_lo, range_key, "first entry must be >= " + std::to_string(min_lo));
  c.demo.rho = get_number(j, "rho", 2.5);
  check(c.demo.rho > 0.0, "rho", "must be > 0");
  const double sim_t = get_number(j, "sim_T", 5.0);
  check(sim_t > 0.0, "sim_T", "must be > 0");
  const int sim_steps = get_int(j, "sim_steps", 500);
  check(sim_steps >= 1, "sim_steps", "must be >= 1");
  c.demo.sim_grid = TimeGrid(0.0, sim_t, sim_steps);
  c.exact_row0 = get_bool(j, "exact_row0", false);
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::check;
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  if (!j.contains("experiment")) throw ConfigError("experiment", "missing required field 'experiment'");
  check(j.at("experiment").is_string(), "experiment", "must be a string");
  const std::string name = j.at("experiment").get<std::string>();
  ExperimentConfig c;
  if (name == "curse-demo") c.experiment = Experiment::kCurseDemo;
  else if (name == "lqr-finite") c.experiment = Experiment::kLqrFinite;
  else if (name == "lqr-infinite") c.experiment = Experiment::kLqrInfinite;
  else if (name == "bloch") c.experiment = Experiment::kBloch;
  else throw ConfigError("experiment", "unknown experiment '" + name + "'");

  const auto& allowed = detail::allowed_keys(c.experiment);
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(item.key(), "unknown key '" + item.key() + "' for experiment " + name);
    }
  }
  if (j.contains("output_dir")) {
    check(j.at("output_dir").is_string(), "output_dir", "must be a string");
    c.output_dir = j.at("output_dir").get<std::string>();
  }
  c.record_wall_time = detail::get_bool(j, "record_wall_time", true);

  switch (c.experiment) {
    case Experiment::kLqrFinite: detail::parse_frl(j, c, false); break;
    case Experiment::kBloch: detail::parse_frl(j, c, true); break;
    case Experiment::kCurseDemo: detail::parse_demo(j, c, "n_range", 2); break;
    case Experiment::kLqrInfinite: detail::parse_demo(j, c, "N_range", 0); break;
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

/// One CSV file: header row, then numeric rows at 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : file_(std::fopen(path.string().c_str(), "w")), path_(path) {
    if (!file_) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) std::fprintf(file_, i ? ",%s" : "%s", header[i].c_str());
    std::fputc('\n', file_);
    width_ = header.size();
  }
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;
  ~CsvWriter() {
    if (file_) std::fclose(file_);
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw DimensionError("CsvWriter: row width differs from header in " + path_.string());
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::fprintf(file_, i ? ",%.17g" : "%.17g", values[i]);
    }
    std::fputc('\n', file_);
  }

  void close() {
    if (file_ && std::fclose(file_) != 0) {
      file_ = nullptr;
      throw std::runtime_error("write failed for " + path_.string());
    }
    file_ = nullptr;
  }

 private:
  std::FILE* file_;
  std::filesystem::path path_;
  std::size_t width_ = 0;
};

namespace detail {

inline double clock_seconds(double s, bool record) { return record ? std::round(s * 1000.0) / 1000.0 : 0.0; }

inline void write_hierarchy(const std::filesystem::path& dir, const FrlResult& r, bool record) {
  CsvWriter w(dir / "hierarchy.csv", {"N", "iterations", "cost", "projection_error", "wall_time_s"});
  for (const auto& h : r.reports) {
    w.row({double(h.order), double(h.iterations), h.cost, h.projection_error, clock_seconds(h.wall_time_s, record)});
  }
  w.close();
}

inline void write_policies(const std::filesystem::path& dir, const FrlResult& r) {
  for (const auto& h : r.reports) {
    const auto tag = std::to_string(h.order);
    const Eigen::VectorXd t = h.policy.grid().nodes();
    const bool two = h.policy.control_dim() == 2;
    CsvWriter p(dir / ("policy_N" + tag + ".csv"), two ? std::vector<std::string>{"t", "u", "v"}
                                                        : std::vector<std::string>{"t", "u"});
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const Eigen::VectorXd u = h.policy.at(static_cast<int>(i));
      if (two) p.row({t(i), u(0), u(1)});
      else p.row({t(i), u(0)});
    }
    p.close();
    CsvWriter v(dir / ("value_profile_N" + tag + ".csv"), {"t", "V"});
    for (Eigen::Index i = 0; i < t.size(); ++i) v.row({t(i), h.value_profile(i)});
    v.close();
  }
}

inline nlohmann::json hierarchy_summary(const FrlResult& r, double total, bool record) {
  nlohmann::json s;
  s["hierarchies"] = r.reports.size();
  s["converged"] = r.converged;
  s["final_order"] = r.last().order;
  s["final_cost"] = r.last().cost;
  s["final_projection_error"] = r.last().projection_error;
  s["total_iterations"] = [&] {
    int n = 0;
    for (const auto& h : r.reports) n += h.iterations;
    return n;
  }();
  s["costs"] = nlohmann::json::array();
  for (const auto& h : r.reports) s["costs"].push_back(h.cost);
  s["wall_time_s"] = clock_seconds(total, record);
  return s;
}

inline nlohmann::json run_frl_experiment(const ExperimentConfig& c, const std::filesystem::path& dir) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const FrlResult r = run_frl(c.frl);
  write_hierarchy(dir, r, c.record_wall_time);
  write_policies(dir, r);
  const auto& last = r.last();
  nlohmann::json s;

  if (c.experiment == Experiment::kBloch) {
    const double delta = std::get<BlochProblem>(c.frl.problem).delta;
    const EnsembleRun run = simulate_bloch_ensemble(last.policy, delta, c.beta_count, c.frl.grid);
    const ExcitationMetrics m = excitation_metrics(run);
    CsvWriter fin(dir / "bloch_final.csv", {"beta", "x1", "x2", "x3"});
    for (Eigen::Index j = 0; j < m.per_beta.rows(); ++j) {
      fin.row({m.per_beta(j, 0), m.per_beta(j, 1), m.per_beta(j, 2), m.per_beta(j, 3)});
    }
    fin.close();
    const Eigen::VectorXd t = c.frl.grid.nodes();
    CsvWriter mean(dir / "bloch_mean_x1.csv", {"t", "mean_x1"});
    for (Eigen::Index i = 0; i < t.size(); ++i) mean.row({t(i), m.mean_x1_vs_time(i)});
    mean.close();
    const Eigen::VectorXd betas = Eigen::Map<const Eigen::VectorXd>(c.trajectory_betas.data(),
                                                                    static_cast<Eigen::Index>(c.trajectory_betas.size()));
    const EnsembleRun paths = simulate_bloch_at(last.policy, betas, c.frl.grid);
    CsvWriter traj(dir / "bloch_trajectory.csv", {"t", "beta", "x1", "x2", "x3"});
    for (Eigen::Index j = 0; j < betas.size(); ++j) {
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const auto& x = paths.states[j];
        traj.row({t(i), betas(j), x(0, i), x(1, i), x(2, i)});
      }
    }
    traj.close();
    s["delta"] = delta;
    s["beta_count"] = c.beta_count;
    s["mean_x1_final"] = m.mean_x1_final;
    s["min_x1_final"] = m.min_x1_final;
    s["sphere_drift"] = sphere_drift(run);
  } else {
    const EnsembleRun run = simulate_linear_ensemble(last.policy, c.beta_count, c.frl.grid);
    s["beta_count"] = c.beta_count;
    s["ensemble_reward"] = linear_ensemble_reward(run, last.policy);
  }
  const double total = std::chrono::duration<double>(Clock::now() - start).count();
  s.update(hierarchy_summary(r, total, c.record_wall_time));
  return s;
}

inline nlohmann::json run_demo_experiment(const ExperimentConfig& c, const std::filesystem::path& dir) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const bool sampled = c.experiment == Experiment::kCurseDemo;
  const oracle::ConvergenceTable table = sampled ? oracle::sampled_demo(c.range_lo, c.range_hi, c.demo)
                                                 : oracle::frl_infinite_demo(c.range_lo, c.range_hi, c.demo,
                                                                             c.exact_row0);
  CsvWriter w(dir / "convergence.csv", {"n_or_N", "value_diff", "policy_diff", "param_count", "wall_time_s"});
  for (const auto& row : table.rows) {
    w.row({double(row.index), row.value_diff, row.policy_diff, double(row.param_count),
           clock_seconds(row.wall_time_s, c.record_wall_time)});
  }
  w.close();
  const Eigen::VectorXd t = table.sim_grid.nodes();
  if (!sampled) {
    for (const auto& row : table.rows) {
      const auto tag = std::to_string(row.index);
      CsvWriter p(dir / ("policy_N" + tag + ".csv"), {"t", "u"});
      for (Eigen::Index i = 0; i < t.size(); ++i) p.row({t(i), row.policy(i)});
      p.close();
      CsvWriter v(dir / ("value_profile_N" + tag + ".csv"), {"t", "V"});
      for (Eigen::Index i = 0; i < t.size(); ++i) v.row({t(i), row.value_trace(i)});
      v.close();
    }
  }
  nlohmann::json s;
  s["rows"] = table.rows.size();
  s["rho"] = c.demo.rho;
  const auto& last = table.rows.back();
  s["final_index"] = last.index;
  s["final_value"] = last.value;
  s["final_value_diff"] = last.value_diff;
  s["final_policy_diff"] = last.policy_diff;
  double min_pd = std::numeric_limits<double>::infinity();
  for (const auto& row : table.rows) {
    if (!std::isnan(row.policy_diff)) min_pd = std::min(min_pd, row.policy_diff);
  }
  s["min_policy_diff"] = table.rows.size() > 1 ? nlohmann::json(min_pd) : nlohmann::json(nullptr);
  s["wall_time_s"] = clock_seconds(std::chrono::duration<double>(Clock::now() - start).count(), c.record_wall_time);
  return s;
}

}  // namespace detail

/// Runs the configured experiment into `c.output_dir`. Throws on failure and
/// leaves the target directory untouched in that case.
inline nlohmann::json run_experiment(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  const fs::path target = c.output_dir.empty() ? fs::path(".") : c.output_dir;
  const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
  const fs::path staging = parent / (target.filename().string() + ".partial");
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    nlohmann::json summary;
    summary["experiment"] = experiment_name(c.experiment);
    summary["version"] = kVersion;
    summary["results"] = c.experiment == Experiment::kLqrFinite || c.experiment == Experiment::kBloch
                             ? detail::run_frl_experiment(c, staging)
                             : detail::run_demo_experiment(c, staging);
    {
      std::ofstream out(staging / "summary.json");
      out << summary.dump(2) << '\n';
      if (!out) throw std::runtime_error("cannot write summary.json");
    }
    fs::create_directories(target);
    for (const auto& entry : fs::directory_iterator(staging)) {
      fs::rename(entry.path(), target / entry.path().filename());
    }
    fs::remove_all(staging);
    return summary;
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

/// Maps failures onto the documented exit codes.
inline int run_command(const std::filesystem::path& config_path, const std::optional<std::string>& output_dir,
                       std::FILE* err = stderr) {
  try {
    ExperimentConfig c = load_config(config_path);
    if (output_dir) c.output_dir = *output_dir;
    run_experiment(c);
    return kOk;
  } catch (const ConfigError& e) {
    std::fprintf(err, "config error [%s]: %s\n", e.field().c_str(), e.what());
    return kConfigError;
  } catch (const DomainError& e) {
    std::fprintf(err, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const NumericalError& e) {
    std::fprintf(err, "numerical error: %s\n", e.what());
    return kNumericalError;
  } catch (const std::exception& e) {
    std::fprintf(err, "error: %s\n", e.what());
    return kIoError;
  }
}

}  // namespace momentrl::cli
