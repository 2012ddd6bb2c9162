#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "brownsim/rng.hpp"
#include "brownsim/types.hpp"

namespace brownsim {

/// CPU demand series, one per VM, as fractions of VM capacity.
struct TraceSet {
  std::vector<std::vector<double>> series;
  std::vector<std::string> names;
  int samples_per_day = 288;

  std::size_t vm_count() const { return series.size(); }

  std::size_t min_length() const {
    std::size_t n = series.empty() ? 0 : series.front().size();
    for (const auto& s : series) n = std::min(n, s.size());
    return n;
  }
};

/// Reads a directory of PlanetLab-format trace files: one file per VM,
/// one integer 0-100 per line. Files are taken in lexicographic order so
/// trace ids are stable across platforms.
inline TraceSet load_trace_dir(const std::filesystem::path& dir, std::size_t min_length = 0) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw std::runtime_error("trace directory not found: " + dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  TraceSet out;
  for (const auto& file : files) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open trace file: " + file.string());
    std::vector<double> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      // tolerate trailing whitespace and a final blank line
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
        line.pop_back();
      if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
      std::size_t pos = 0;
      int value = 0;
      try {
        value = std::stoi(line, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != line.size() || value < 0 || value > 100) {
        std::ostringstream msg;
        msg << "malformed trace line " << lineno << " in " << file.string() << ": '" << line << "'";
        throw std::runtime_error(msg.str());
      }
      samples.push_back(static_cast<double>(value) / 100.0);
    }
    if (samples.size() < min_length) {
      std::ostringstream msg;
      msg << "trace " << file.string() << " has " << samples.size()
          << " samples, shorter than required " << min_length;
      throw std::runtime_error(msg.str());
    }
    out.series.push_back(std::move(samples));
    out.names.push_back(file.filename().string());
  }
  return out;
}

/// Synthetic demand: a flat base level with spikes. Samples are quantized
/// to integer percent so a written trace reloads to the identical TraceSet.
inline TraceSet synth_traces(int n_vms, long horizon, double base_level, double spike_prob,
                             double spike_level, std::uint64_t seed) {
  if (n_vms < 0) throw std::invalid_argument("n_vms must be >= 0");
  if (base_level < 0.0 || base_level > 1.0 || spike_level < 0.0 || spike_level > 1.0)
    throw std::invalid_argument("trace levels must be in [0,1]");
  if (spike_prob < 0.0 || spike_prob > 1.0)
    throw std::invalid_argument("spike_prob must be in [0,1]");

  auto quantize = [](double level) {
    int pct = static_cast<int>(std::lround(level * 100.0));
    return static_cast<double>(std::clamp(pct, 0, 100)) / 100.0;
  };
  double base = quantize(base_level);
  double spike = quantize(spike_level);

  TraceSet out;
  out.series.reserve(static_cast<std::size_t>(n_vms));
  for (int v = 0; v < n_vms; ++v) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(v) + 1));
    std::vector<double> samples(static_cast<std::size_t>(horizon));
    for (long t = 0; t < horizon; ++t)
      samples[static_cast<std::size_t>(t)] = rng.bernoulli(spike_prob) ? spike : base;
    out.series.push_back(std::move(samples));
    char name[32];
    std::snprintf(name, sizeof(name), "vm_%04d", v);
    out.names.emplace_back(name);
  }
  return out;
}

/// Writes a TraceSet in the same file format load_trace_dir reads.
inline void write_trace_dir(const TraceSet& traces, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t v = 0; v < traces.series.size(); ++v) {
    std::string name;
    if (v < traces.names.size() && !traces.names[v].empty()) {
      name = traces.names[v];
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "vm_%04zu", v);
      name = buf;
    }
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write trace file: " + (dir / name).string());
    for (double u : traces.series[v])
      out << static_cast<int>(std::lround(u * 100.0)) << "\n";
  }
}

struct ComponentGenParams {
  double optional_fraction = 0.5;
  int n_optional = 5;
  double sigma_u = 0.05;
  double sigma_d = 0.05;
  std::uint64_t seed = 1;
};

/// Generates one application's component set: a mandatory remainder plus
/// n_optional components whose utilizations and discounts are normal draws
/// around optional_fraction / n_optional, clamped to [0.001, 1] and rescaled
/// so each optional total lands exactly on optional_fraction.
inline std::vector<ComponentProfile> gen_components(const ComponentGenParams& p) {
  if (p.n_optional < 1) throw std::invalid_argument("n_optional must be >= 1");
  if (!(p.optional_fraction > 0.0 && p.optional_fraction <= 1.0))
    throw std::invalid_argument("optional_fraction must be in (0,1]");
  if (p.optional_fraction / p.n_optional <= 0.0)
    throw std::invalid_argument("optional component mean must be positive");
  if (!(p.sigma_u < 0.1) || !(p.sigma_d < 0.1))
    throw std::invalid_argument("component std dev must be < 0.1");

  double mean = p.optional_fraction / p.n_optional;
  Rng rng(p.seed);

  std::vector<double> utils(static_cast<std::size_t>(p.n_optional));
  std::vector<double> discounts(static_cast<std::size_t>(p.n_optional));
  double u_sum = 0.0;
  double d_sum = 0.0;
  for (int i = 0; i < p.n_optional; ++i) {
    utils[static_cast<std::size_t>(i)] = std::clamp(rng.normal(mean, p.sigma_u), 0.001, 1.0);
    discounts[static_cast<std::size_t>(i)] = std::clamp(rng.normal(mean, p.sigma_d), 0.001, 1.0);
    u_sum += utils[static_cast<std::size_t>(i)];
    d_sum += discounts[static_cast<std::size_t>(i)];
  }
  for (auto& u : utils) u *= p.optional_fraction / u_sum;
  for (auto& d : discounts) d *= p.optional_fraction / d_sum;

  std::vector<ComponentProfile> out;
  out.reserve(static_cast<std::size_t>(p.n_optional) + 1);
  ComponentProfile mandatory;
  mandatory.id = 0;
  mandatory.mandatory = true;
  mandatory.utilization = 1.0 - p.optional_fraction;
  mandatory.discount = 0.0;
  mandatory.active = true;
  out.push_back(mandatory);
  for (int i = 0; i < p.n_optional; ++i) {
    ComponentProfile c;
    c.id = i + 1;
    c.mandatory = false;
    c.utilization = utils[static_cast<std::size_t>(i)];
    c.discount = discounts[static_cast<std::size_t>(i)];
    c.active = true;
    out.push_back(c);
  }
  return out;
}

/// Splits a traced VM-level sample across components in proportion to their
/// utilization shares. Deactivated components get 0; their share is removed,
/// not redistributed.
inline std::vector<double> partition_trace(const VmState& vm, double traced_u) {
  if (traced_u < 0.0 || traced_u > 1.0)
    throw std::invalid_argument("traced utilization outside [0,1]");
  std::vector<double> out(vm.components.size(), 0.0);
  double all = vm.share_sum();
  if (all <= 0.0) return out;
  for (std::size_t i = 0; i < vm.components.size(); ++i) {
    const auto& c = vm.components[i];
    if (c.active) out[i] = traced_u * (c.utilization / all);
  }
  return out;
}

}  // namespace brownsim
