#pragma once

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "brownsim/engine.hpp"
#include "brownsim/presets.hpp"
#include "brownsim/stats.hpp"
#include "brownsim/types.hpp"
#include "brownsim/workload.hpp"

namespace brownsim {

using json = nlohmann::json;

/// Raised for malformed configuration; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SweepAxis { None, Lambda, Threshold, OptionalFraction };

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::None: return "none";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::Threshold: return "threshold";
    case SweepAxis::OptionalFraction: return "optional_fraction";
  }
  return "?";
}

struct SynthTraceParams {
  double base_level = 0.7;
  double spike_prob = 0.3;
  double spike_level = 0.95;
};

struct TraceSource {
  std::optional<std::string> dir;  // PlanetLab-format directory; synthetic when absent
  SynthTraceParams synth;
};

struct ExperimentSpec {
  std::vector<Policy> policies{Policy::PCO};
  SweepAxis axis = SweepAxis::None;
  std::vector<double> axis_values;
  int repeats = 1;
  std::vector<std::uint64_t> seeds;  // one per repeat
  SimConfig base;
  int n_hosts = 50;
  int n_vms = 100;
  ComponentGenParams gen;
  TraceSource traces;
  std::string out_dir = "out";
  int threads = 1;
  bool paper_faithful = false;
  json resolved;  // full effective configuration, embedded in artifacts
};

namespace detail {

inline double require_number(const json& j, const std::string& key, double fallback,
                             bool present_required = false) {
  if (!j.contains(key)) {
    if (present_required) throw ConfigError("missing config field: " + key);
    return fallback;
  }
  if (!j.at(key).is_number()) throw ConfigError("config field must be a number: " + key);
  return j.at(key).get<double>();
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_axis_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

/// Index-scheduled parallel loop; result slots are preallocated by the
/// caller so the schedule cannot influence output ordering.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  int k = std::min<int>(threads, static_cast<int>(n));
  pool.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Parses the experiment configuration document. Unknown policies, bad axis
/// names and malformed scalars raise ConfigError. The `ubp_corrected` and
/// `weighted_utilization` keys default to the corrected/weighted mode at
/// this layer; `paper_faithful` flips both to the paper-literal behavior.
inline ExperimentSpec load_experiment(const json& j) {
  ExperimentSpec spec;
  try {
    if (j.contains("policies")) {
      spec.policies.clear();
      for (const auto& p : j.at("policies")) spec.policies.push_back(policy_from_string(p.get<std::string>()));
      if (spec.policies.empty()) throw ConfigError("policies list is empty");
    }

    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      std::string axis = s.value("axis", "none");
      if (axis == "none") {
        spec.axis = SweepAxis::None;
      } else if (axis == "lambda") {
        spec.axis = SweepAxis::Lambda;
      } else if (axis == "threshold") {
        spec.axis = SweepAxis::Threshold;
      } else if (axis == "optional_fraction") {
        spec.axis = SweepAxis::OptionalFraction;
      } else {
        throw ConfigError("unknown sweep axis: " + axis);
      }
      if (spec.axis != SweepAxis::None) {
        if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty())
          throw ConfigError("sweep.values must be a non-empty array");
        for (const auto& v : s.at("values")) spec.axis_values.push_back(v.get<double>());
      }
    }

    spec.repeats = static_cast<int>(detail::require_number(j, "repeats", 1));
    if (spec.repeats < 1) throw ConfigError("repeats must be >= 1");

    std::uint64_t base_seed = 1;
    if (j.contains("base_seed")) base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("seeds")) {
      for (const auto& s : j.at("seeds")) spec.seeds.push_back(s.get<std::uint64_t>());
      if (static_cast<int>(spec.seeds.size()) != spec.repeats)
        throw ConfigError("seeds list length must equal repeats");
    } else {
      for (int i = 0; i < spec.repeats; ++i)
        spec.seeds.push_back(base_seed + static_cast<std::uint64_t>(i));
    }

    if (j.contains("fleet")) {
      const json& f = j.at("fleet");
      spec.n_hosts = static_cast<int>(detail::require_number(f, "hosts", 50));
      spec.n_vms = static_cast<int>(detail::require_number(f, "vms", 100));
      if (spec.n_hosts < 1 || spec.n_vms < 1)
        throw ConfigError("fleet.hosts and fleet.vms must be >= 1");
    }

    if (j.contains("components")) {
      const json& c = j.at("components");
      spec.gen.optional_fraction = detail::require_number(c, "optional_fraction", 0.5);
      spec.gen.n_optional = static_cast<int>(detail::require_number(c, "n_optional", 5));
      spec.gen.sigma_u = detail::require_number(c, "sigma_u", 0.05);
      spec.gen.sigma_d = detail::require_number(c, "sigma_d", 0.05);
    }

    if (j.contains("traces")) {
      const json& t = j.at("traces");
      if (t.contains("dir")) {
        spec.traces.dir = t.at("dir").get<std::string>();
      } else if (t.contains("synthetic")) {
        const json& s = t.at("synthetic");
        spec.traces.synth.base_level = detail::require_number(s, "base_level", 0.7);
        spec.traces.synth.spike_prob = detail::require_number(s, "spike_prob", 0.3);
        spec.traces.synth.spike_level = detail::require_number(s, "spike_level", 0.95);
      } else {
        throw ConfigError("traces must contain either 'dir' or 'synthetic'");
      }
    }

    if (j.contains("sim")) {
      const json& s = j.at("sim");
      spec.base.interval_s = detail::require_number(s, "interval_s", spec.base.interval_s);
      spec.base.horizon_intervals =
          static_cast<long>(detail::require_number(s, "horizon_intervals", 288));
      spec.base.overload_threshold =
          detail::require_number(s, "overload_threshold", spec.base.overload_threshold);
      spec.base.lambda = detail::require_number(s, "lambda", spec.base.lambda);
      spec.base.window_size =
          static_cast<int>(detail::require_number(s, "window_size", spec.base.window_size));
      spec.base.host_transition_s =
          detail::require_number(s, "host_transition_s", spec.base.host_transition_s);
      spec.base.ubp_alpha = detail::require_number(s, "ubp_alpha", spec.base.ubp_alpha);
      spec.base.mdp_lookahead =
          static_cast<int>(detail::require_number(s, "mdp_lookahead", spec.base.mdp_lookahead));
      spec.base.ubp_corrected = s.value("ubp_corrected", true);
      spec.base.weighted_utilization = s.value("weighted_utilization", true);
    } else {
      spec.base.horizon_intervals = 288;
      spec.base.ubp_corrected = true;
      spec.base.weighted_utilization = true;
    }

    spec.paper_faithful = j.value("paper_faithful", false);
    if (spec.paper_faithful) {
      spec.base.ubp_corrected = false;
      spec.base.weighted_utilization = false;
    }

    spec.out_dir = j.value("out_dir", "out");
    spec.threads = static_cast<int>(detail::require_number(j, "threads", 1));
    if (spec.threads < 1) throw ConfigError("threads must be >= 1");

    spec.base.check();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config error: ") + e.what());
  }

  // freeze the effective configuration for artifact provenance
  json resolved;
  resolved["policies"] = json::array();
  for (Policy p : spec.policies) resolved["policies"].push_back(to_string(p));
  resolved["sweep"] = {{"axis", to_string(spec.axis)}, {"values", spec.axis_values}};
  resolved["repeats"] = spec.repeats;
  resolved["seeds"] = spec.seeds;
  resolved["fleet"] = {{"hosts", spec.n_hosts}, {"vms", spec.n_vms}};
  resolved["components"] = {{"optional_fraction", spec.gen.optional_fraction},
                            {"n_optional", spec.gen.n_optional},
                            {"sigma_u", spec.gen.sigma_u},
                            {"sigma_d", spec.gen.sigma_d}};
  if (spec.traces.dir) {
    resolved["traces"] = {{"dir", *spec.traces.dir}};
  } else {
    resolved["traces"] = {{"synthetic",
                           {{"base_level", spec.traces.synth.base_level},
                            {"spike_prob", spec.traces.synth.spike_prob},
                            {"spike_level", spec.traces.synth.spike_level}}}};
    // synthetic repeats stand in for distinct trace days, one seed per day
    resolved["traces"]["note"] = "repeats map to trace seeds, not calendar days";
  }
  resolved["sim"] = {{"interval_s", spec.base.interval_s},
                     {"horizon_intervals", spec.base.horizon_intervals},
                     {"overload_threshold", spec.base.overload_threshold},
                     {"lambda", spec.base.lambda},
                     {"window_size", spec.base.window_size},
                     {"host_transition_s", spec.base.host_transition_s},
                     {"ubp_alpha", spec.base.ubp_alpha},
                     {"mdp_lookahead", spec.base.mdp_lookahead},
                     {"ubp_corrected", spec.base.ubp_corrected},
                     {"weighted_utilization", spec.base.weighted_utilization}};
  resolved["paper_faithful"] = spec.paper_faithful;
  resolved["out_dir"] = spec.out_dir;
  resolved["threads"] = spec.threads;
  spec.resolved = resolved;
  return spec;
}

inline ExperimentSpec load_experiment_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error in ") + path.string() + ": " + e.what());
  }
  return load_experiment(j);
}

struct RunOutput {
  Policy policy = Policy::PCO;
  std::optional<double> axis_value;
  int repeat = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  MetricsLedger ledger;
  std::string csv_name;
};

/// Runs every (axis value, policy, repeat) combination. Work items are
/// dispatched across `spec.threads` threads into preallocated slots, so the
/// result vector (and therefore every artifact) is independent of the
/// thread count.
inline std::vector<RunOutput> execute(const ExperimentSpec& spec) {
  std::optional<TraceSet> shared_traces;
  if (spec.traces.dir) {
    shared_traces = load_trace_dir(*spec.traces.dir,
                                   static_cast<std::size_t>(spec.base.horizon_intervals));
    if (shared_traces->vm_count() < static_cast<std::size_t>(spec.n_vms))
      throw std::runtime_error("trace directory provides fewer series than fleet VMs");
  }

  std::vector<std::optional<double>> axis_cells;
  if (spec.axis == SweepAxis::None) {
    axis_cells.push_back(std::nullopt);
  } else {
    for (double v : spec.axis_values) axis_cells.push_back(v);
  }

  std::vector<RunOutput> results;
  for (const auto& axis_value : axis_cells) {
    for (Policy p : spec.policies) {
      for (int r = 0; r < spec.repeats; ++r) {
        RunOutput out;
        out.policy = p;
        out.axis_value = axis_value;
        out.repeat = r;
        out.seed = spec.seeds[static_cast<std::size_t>(r)];
        results.push_back(std::move(out));
      }
    }
  }

  detail::parallel_for(results.size(), spec.threads, [&](std::size_t i) {
    RunOutput& out = results[i];
    SimConfig cfg = spec.base;
    cfg.policy = out.policy;
    cfg.seed = out.seed;
    ComponentGenParams gen = spec.gen;
    if (out.axis_value) {
      switch (spec.axis) {
        case SweepAxis::Lambda: cfg.lambda = *out.axis_value; break;
        case SweepAxis::Threshold: cfg.overload_threshold = *out.axis_value; break;
        case SweepAxis::OptionalFraction: gen.optional_fraction = *out.axis_value; break;
        case SweepAxis::None: break;
      }
    }
    out.lambda = cfg.lambda;

    TraceSet traces;
    if (shared_traces) {
      traces = *shared_traces;  // replayed identically for every repeat
    } else {
      traces = synth_traces(spec.n_vms, cfg.horizon_intervals, spec.traces.synth.base_level,
                            spec.traces.synth.spike_prob, spec.traces.synth.spike_level,
                            mix_seed(cfg.seed, stream::traces));
    }
    DatacenterState fleet = build_fleet(spec.n_hosts, spec.n_vms, gen, cfg.seed);
    out.ledger = run(cfg, traces, fleet);

    std::ostringstream name;
    name << to_string(out.policy);
    if (out.axis_value)
      name << "_" << to_string(spec.axis) << "=" << detail::format_axis_value(*out.axis_value);
    name << "_seed" << out.seed << ".csv";
    out.csv_name = name.str();
  });
  return results;
}

inline void write_interval_csv(const std::filesystem::path& path, const MetricsLedger& ledger) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv: " + path.string());
  out << "t,energy_kwh,discount,g,overloaded,migrations,hosts_on\n";
  for (const auto& r : ledger.records) {
    out << r.t << "," << detail::format_double(r.energy_kwh) << ","
        << detail::format_double(r.discount) << "," << detail::format_double(r.g) << ","
        << r.overloaded << "," << r.migrations << "," << r.hosts_on << "\n";
  }
}

inline MetricsLedger read_interval_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read csv: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t,energy_kwh,discount,g,overloaded,migrations,hosts_on")
    throw std::runtime_error("unexpected csv header in " + path.string());
  MetricsLedger ledger;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    IntervalRecord r;
    std::istringstream ss(line);
    std::string field;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) throw std::runtime_error("short csv row in " + path.string());
      return field;
    };
    r.t = std::stol(next());
    r.energy_kwh = std::stod(next());
    r.discount = std::stod(next());
    r.g = std::stod(next());
    r.overloaded = std::stoi(next());
    r.migrations = std::stoi(next());
    r.hosts_on = std::stoi(next());
    ledger.append(r);
  }
  return ledger;
}

inline json aggregate_stats(const std::vector<double>& samples) {
  json out;
  if (samples.size() >= 2) {
    MeanCi ci = mean_ci95(samples);
    out = {{"mean", ci.mean}, {"ci_lo", ci.lo}, {"ci_hi", ci.hi}};
  } else if (samples.size() == 1) {
    out = {{"mean", samples[0]}, {"ci_lo", samples[0]}, {"ci_hi", samples[0]}};
  } else {
    out = {{"mean", nullptr}, {"ci_lo", nullptr}, {"ci_hi", nullptr}};
  }
  return out;
}

/// Builds the summary document: one row per run plus per-(axis, policy)
/// aggregates, with the resolved config and seed list embedded.
inline json summarize(const ExperimentSpec& spec, const std::vector<RunOutput>& results) {
  json summary;
  summary["schema"] = "brownsim-summary-v1";
  summary["config"] = spec.resolved;
  summary["seeds"] = spec.seeds;
  summary["runs"] = json::array();
  for (const auto& r : results) {
    double mean_hosts_on = 0.0;
    for (const auto& rec : r.ledger.records) mean_hosts_on += rec.hosts_on;
    if (!r.ledger.records.empty()) mean_hosts_on /= static_cast<double>(r.ledger.records.size());
    json row = {{"policy", to_string(r.policy)},
                {"repeat", r.repeat},
                {"seed", r.seed},
                {"energy_kwh", r.ledger.total_energy_kwh},
                {"discount", r.ledger.total_discount},
                {"discount_pct_of_max", r.ledger.discount_pct_of_max()},
                {"objective", cumulative_objective(r.ledger, r.lambda)},
                {"migrations", r.ledger.total_migrations},
                {"shutdowns", r.ledger.total_shutdowns},
                {"mean_hosts_on", mean_hosts_on},
                {"csv", r.csv_name}};
    if (r.axis_value) row["axis_value"] = *r.axis_value;
    summary["runs"].push_back(row);
  }

  summary["aggregates"] = json::array();
  std::vector<std::pair<std::optional<double>, Policy>> cells;
  for (const auto& r : results) {
    std::pair<std::optional<double>, Policy> key{r.axis_value, r.policy};
    bool seen = false;
    for (const auto& c : cells) seen = seen || (c == key);
    if (!seen) cells.push_back(key);
  }
  for (const auto& [axis_value, policy] : cells) {
    std::vector<double> energy;
    std::vector<double> discount;
    for (const auto& r : results) {
      if (r.policy != policy || r.axis_value != axis_value) continue;
      energy.push_back(r.ledger.total_energy_kwh);
      discount.push_back(r.ledger.total_discount);
    }
    json cell = {{"policy", to_string(policy)},
                 {"energy", aggregate_stats(energy)},
                 {"discount", aggregate_stats(discount)}};
    if (axis_value) cell["axis_value"] = *axis_value;
    summary["aggregates"].push_back(cell);
  }
  return summary;
}

inline void write_sweep_csv(const std::filesystem::path& path, const ExperimentSpec& spec,
                            const std::vector<RunOutput>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv: " + path.string());
  out << "axis,axis_value,policy,energy_mean,energy_ci_lo,energy_ci_hi,"
         "discount_mean,discount_ci_lo,discount_ci_hi\n";
  for (double v : spec.axis_values) {
    for (Policy p : spec.policies) {
      std::vector<double> energy;
      std::vector<double> discount;
      for (const auto& r : results) {
        if (r.policy != p || !r.axis_value || *r.axis_value != v) continue;
        energy.push_back(r.ledger.total_energy_kwh);
        discount.push_back(r.ledger.total_discount);
      }
      if (energy.empty()) continue;
      auto stats_or_single = [](const std::vector<double>& xs) {
        if (xs.size() >= 2) return mean_ci95(xs);
        return MeanCi{xs[0], xs[0], xs[0]};
      };
      MeanCi e = stats_or_single(energy);
      MeanCi d = stats_or_single(discount);
      out << to_string(spec.axis) << "," << detail::format_axis_value(v) << "," << to_string(p)
          << "," << detail::format_double(e.mean) << "," << detail::format_double(e.lo) << ","
          << detail::format_double(e.hi) << "," << detail::format_double(d.mean) << ","
          << detail::format_double(d.lo) << "," << detail::format_double(d.hi) << "\n";
    }
  }
}

/// Writes all artifacts for a finished experiment and returns the summary.
inline json write_artifacts(const ExperimentSpec& spec, const std::vector<RunOutput>& results,
                            const std::string& summary_name) {
  namespace fs = std::filesystem;
  fs::path out_dir(spec.out_dir);
  fs::create_directories(out_dir / "runs");
  for (const auto& r : results) write_interval_csv(out_dir / "runs" / r.csv_name, r.ledger);
  json summary = summarize(spec, results);
  {
    std::ofstream out(out_dir / summary_name);
    if (!out) throw std::runtime_error("cannot write summary: " + (out_dir / summary_name).string());
    out << summary.dump(2) << "\n";
  }
  if (spec.axis != SweepAxis::None) write_sweep_csv(out_dir / "sweep.csv", spec, results);
  return summary;
}

/// One named sample series extracted from a summary document.
struct SummarySeries {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<double> energy;
  std::vector<double> discount;
};

inline std::vector<SummarySeries> extract_series(const json& summary, const std::string& tag) {
  std::map<std::string, SummarySeries> by_key;
  std::vector<std::string> order;
  for (const auto& row : summary.at("runs")) {
    std::string key = row.at("policy").get<std::string>();
    if (row.contains("axis_value"))
      key += "@" + detail::format_axis_value(row.at("axis_value").get<double>());
    if (!by_key.count(key)) order.push_back(key);
    SummarySeries& s = by_key[key];
    s.name = tag.empty() ? key : tag + ":" + key;
    s.seeds.push_back(row.at("seed").get<std::uint64_t>());
    s.energy.push_back(row.at("energy_kwh").get<double>());
    s.discount.push_back(row.at("discount").get<double>());
  }
  std::vector<SummarySeries> out;
  for (const auto& key : order) out.push_back(by_key.at(key));
  return out;
}

struct ComparisonReport {
  std::vector<PairedComparison> energy;
  std::vector<PairedComparison> discount;
};

/// Pairs every distinct series combination by run index. Series must share
/// the repeat structure (same length and seed list).
inline ComparisonReport compare_series(const std::vector<SummarySeries>& series) {
  ComparisonReport report;
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (std::size_t k = i + 1; k < series.size(); ++k) {
      const SummarySeries& a = series[i];
      const SummarySeries& b = series[k];
      if (a.seeds.size() != b.seeds.size())
        throw std::runtime_error("mismatched repeats between " + a.name + " and " + b.name);
      if (a.seeds != b.seeds)
        throw std::runtime_error("seed lists differ between " + a.name + " and " + b.name);
      report.energy.push_back(paired_ttest(a.energy, b.energy, a.name, b.name));
      report.discount.push_back(paired_ttest(a.discount, b.discount, a.name, b.name));
    }
  }
  return report;
}

inline void write_comparison_csv(const std::filesystem::path& path,
                                 const ComparisonReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv: " + path.string());
  out << "metric,name_a,name_b,mean_a,mean_b,difference,ci_lo,ci_hi,p_value\n";
  auto emit = [&](const std::string& metric, const PairedComparison& c) {
    out << metric << "," << c.name_a << "," << c.name_b << ","
        << detail::format_double(c.mean_a) << "," << detail::format_double(c.mean_b) << ","
        << detail::format_double(c.difference) << "," << detail::format_double(c.ci_lo) << ","
        << detail::format_double(c.ci_hi) << "," << detail::format_double(c.p_value) << "\n";
  };
  for (const auto& c : report.energy) emit("energy_kwh", c);
  for (const auto& c : report.discount) emit("discount", c);
}

}  // namespace brownsim
