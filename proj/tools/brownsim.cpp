// brownsim command line: single runs, parameter sweeps, paired comparisons
// and synthetic trace generation. Exit codes: 0 ok, 2 config error, 3
// runtime/simulation error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brownsim/brownsim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<double> threshold;
  std::optional<std::string> policy;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<long> horizon;
  bool paper_faithful = false;
};

brownsim::ExperimentSpec load_spec(const std::string& config_path, const Overrides& ov) {
  brownsim::json j;
  {
    std::ifstream in(config_path);
    if (!in) throw brownsim::ConfigError("cannot open config file: " + config_path);
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw brownsim::ConfigError("config parse error in " + config_path + ": " + e.what());
    }
  }
  // flag overrides land in the document before resolution so the artifacts
  // record what actually ran
  if (ov.seed) j["base_seed"] = *ov.seed, j.erase("seeds");
  if (ov.lambda) j["sim"]["lambda"] = *ov.lambda;
  if (ov.threshold) j["sim"]["overload_threshold"] = *ov.threshold;
  if (ov.policy) j["policies"] = std::vector<std::string>{*ov.policy};
  if (ov.out_dir) j["out_dir"] = *ov.out_dir;
  if (ov.threads) j["threads"] = *ov.threads;
  if (ov.horizon) j["sim"]["horizon_intervals"] = *ov.horizon;
  if (ov.paper_faithful) j["paper_faithful"] = true;
  return brownsim::load_experiment(j);
}

int run_command(const std::string& config_path, const Overrides& ov, bool sweep) {
  brownsim::ExperimentSpec spec = load_spec(config_path, ov);
  if (sweep && spec.axis == brownsim::SweepAxis::None)
    throw brownsim::ConfigError("sweep requires a sweep axis in the config");
  if (!sweep && spec.axis != brownsim::SweepAxis::None)
    throw brownsim::ConfigError("config sets a sweep axis; use the sweep subcommand");

  std::vector<brownsim::RunOutput> results = brownsim::execute(spec);
  brownsim::json summary =
      brownsim::write_artifacts(spec, results, sweep ? "sweep.json" : "summary.json");

  for (const auto& cell : summary.at("aggregates")) {
    std::string axis = cell.contains("axis_value")
                           ? (brownsim::to_string(spec.axis) + "=" +
                              brownsim::detail::format_axis_value(cell.at("axis_value").get<double>()) + " ")
                           : "";
    std::printf("%s%-8s energy_kwh mean=%.4f  discount mean=%.4f\n", axis.c_str(),
                cell.at("policy").get<std::string>().c_str(),
                cell.at("energy").at("mean").is_null() ? 0.0
                                                       : cell.at("energy").at("mean").get<double>(),
                cell.at("discount").at("mean").is_null()
                    ? 0.0
                    : cell.at("discount").at("mean").get<double>());
  }
  std::printf("artifacts written to %s\n", spec.out_dir.c_str());
  return kExitOk;
}

int compare_command(const std::vector<std::string>& summary_paths, const std::string& out_csv) {
  std::vector<brownsim::SummarySeries> series;
  for (const auto& path : summary_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open summary: " + path);
    brownsim::json j;
    in >> j;
    std::string tag = std::filesystem::path(path).stem().string();
    if (summary_paths.size() == 1) tag.clear();
    for (auto& s : brownsim::extract_series(j, tag)) series.push_back(std::move(s));
  }
  brownsim::ComparisonReport report = brownsim::compare_series(series);
  brownsim::write_comparison_csv(out_csv, report);

  auto print_block = [](const char* metric, const std::vector<brownsim::PairedComparison>& rows) {
    for (const auto& c : rows) {
      std::printf("%-10s %-24s (%.4f) vs %-24s (%.4f)  diff %.4f (%.4f, %.4f)  p=%.4g\n", metric,
                  c.name_a.c_str(), c.mean_a, c.name_b.c_str(), c.mean_b, c.difference, c.ci_lo,
                  c.ci_hi, c.p_value);
    }
  };
  print_block("energy", report.energy);
  print_block("discount", report.discount);
  std::printf("comparison written to %s\n", out_csv.c_str());
  return kExitOk;
}

int gen_traces_command(int n_vms, long horizon, double base, double spike_prob, double spike,
                       std::uint64_t seed, const std::string& out_dir) {
  brownsim::TraceSet traces =
      brownsim::synth_traces(n_vms, horizon, base, spike_prob, spike,
                             brownsim::mix_seed(seed, brownsim::stream::traces));
  brownsim::write_trace_dir(traces, out_dir);
  std::printf("wrote %zu trace files to %s\n", traces.vm_count(), out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brownout datacenter simulator"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", ov.seed, "override base seed");
    cmd->add_option("--lambda", ov.lambda, "override discount weight");
    cmd->add_option("--threshold", ov.threshold, "override overload threshold");
    cmd->add_option("--policy", ov.policy, "run a single policy");
    cmd->add_option("--out", ov.out_dir, "output directory");
    cmd->add_option("--threads", ov.threads, "dispatcher threads");
    cmd->add_option("--horizon", ov.horizon, "override horizon intervals");
    cmd->add_flag("--paper-faithful", ov.paper_faithful,
                  "unweighted utilization sums and the literal UBP formula");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "execute one experiment");
  add_common(run_cmd);
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "execute a parameter sweep");
  add_common(sweep_cmd);

  std::vector<std::string> summary_paths;
  std::string compare_out = "comparison.csv";
  CLI::App* compare_cmd = app.add_subcommand("compare", "paired t-tests between summaries");
  compare_cmd->add_option("summaries", summary_paths, "summary JSON files")->required();
  compare_cmd->add_option("--out", compare_out, "comparison CSV path");

  int gen_vms = 100;
  long gen_horizon = 288;
  double gen_base = 0.7;
  double gen_spike_prob = 0.3;
  double gen_spike = 0.95;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "traces";
  CLI::App* gen_cmd = app.add_subcommand("gen-traces", "write synthetic PlanetLab-format traces");
  gen_cmd->add_option("--vms", gen_vms, "number of VM series");
  gen_cmd->add_option("--horizon", gen_horizon, "samples per series");
  gen_cmd->add_option("--base", gen_base, "base utilization level");
  gen_cmd->add_option("--spike-prob", gen_spike_prob, "per-sample spike probability");
  gen_cmd->add_option("--spike", gen_spike, "spike utilization level");
  gen_cmd->add_option("--seed", gen_seed, "trace seed");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return run_command(config_path, ov, /*sweep=*/false);
    if (sweep_cmd->parsed()) return run_command(config_path, ov, /*sweep=*/true);
    if (compare_cmd->parsed()) return compare_command(summary_paths, compare_out);
    if (gen_cmd->parsed())
      return gen_traces_command(gen_vms, gen_horizon, gen_base, gen_spike_prob, gen_spike,
                                gen_seed, gen_out);
  } catch (const brownsim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
