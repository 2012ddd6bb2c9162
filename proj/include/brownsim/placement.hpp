#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "brownsim/power.hpp"
#include "brownsim/rng.hpp"
#include "brownsim/types.hpp"

namespace brownsim {

struct MigrationDecision {
  VmId vm_id = 0;
  HostId source_host = 0;
  HostId target_host = 0;
};

struct ConsolidationResult {
  std::vector<MigrationDecision> migrations;
  std::vector<HostId> turned_on;
  std::vector<HostId> shutdowns;
  int unresolved_overloads = 0;
};

/// vm_cpu / host_cpu share of one VM on one host.
inline double vm_weight(const VmState& vm, const HostState& host) {
  return vm.spec.cpu_mhz / host.spec.total_mhz();
}

inline double vm_weight(const VmState& vm, const HostState& host, bool weighted) {
  return weighted ? vm_weight(vm, host) : 1.0;
}

/// Aggregate host utilization under the configured weighting mode. This is
/// the quantity compared against the overload threshold and fed into the
/// dynamic power term.
inline double host_utilization(const DatacenterState& state, const HostState& host,
                               bool weighted) {
  double total = 0.0;
  for (VmId v : host.vm_ids) {
    const VmState& vm = state.vm(v);
    total += vm.effective_utilization() * vm_weight(vm, host, weighted);
  }
  return total;
}

/// CPU-capacity utilization (always MHz-weighted); packing feasibility uses
/// this regardless of the overload metric in effect.
inline double host_capacity_utilization(const DatacenterState& state, const HostState& host) {
  return host_utilization(state, host, /*weighted=*/true);
}

inline double host_ram_used(const DatacenterState& state, const HostState& host) {
  double total = 0.0;
  for (VmId v : host.vm_ids) total += state.vm(v).spec.ram_mb;
  return total;
}

/// Instantaneous power of a host under its current placement.
inline double host_power_now(const DatacenterState& state, const HostState& host,
                             bool weighted) {
  std::vector<WeightedUtil> utils;
  utils.reserve(host.vm_ids.size());
  for (VmId v : host.vm_ids) {
    const VmState& vm = state.vm(v);
    utils.push_back({vm.effective_utilization(), vm_weight(vm, host, weighted)});
  }
  return host_power(host, utils);
}

namespace detail {

// On-state power as a function of the aggregate metric utilization; used
// for placement deltas, where transition blending does not apply.
inline double on_power(const HostSpec& spec, double metric_util, std::size_t n_vms) {
  if (n_vms == 0) return 0.0;
  return spec.power.idle_watts + std::min(metric_util, 1.0) * spec.power.dynamic_watts;
}

struct PendingLoad {
  double util_metric = 0.0;
  double util_capacity = 0.0;
  double ram_mb = 0.0;
  int vms = 0;
};

inline bool fits_with_pending(const DatacenterState& state, const HostState& host,
                              const VmState& vm, const SimConfig& cfg,
                              const PendingLoad& pending, double metric_limit) {
  double ram_after = host_ram_used(state, host) + pending.ram_mb + vm.spec.ram_mb;
  if (ram_after > host.spec.ram_mb) return false;
  double cap_after = host_capacity_utilization(state, host) + pending.util_capacity +
                     vm.effective_utilization() * vm_weight(vm, host, true);
  if (cap_after > 1.0 + 1e-12) return false;
  double metric_after = host_utilization(state, host, cfg.weighted_utilization) +
                        pending.util_metric +
                        vm.effective_utilization() * vm_weight(vm, host, cfg.weighted_utilization);
  return metric_after <= metric_limit + 1e-12;
}

inline double power_delta_with_pending(const DatacenterState& state, const HostState& host,
                                       const VmState& vm, const SimConfig& cfg,
                                       const PendingLoad& pending) {
  double util = host_utilization(state, host, cfg.weighted_utilization) + pending.util_metric;
  std::size_t n = host.vm_ids.size() + static_cast<std::size_t>(pending.vms);
  double before = on_power(host.spec, util, n);
  double add = vm.effective_utilization() * vm_weight(vm, host, cfg.weighted_utilization);
  double after = on_power(host.spec, util + add, n + 1);
  return after - before;
}

inline void move_vm(DatacenterState& state, VmId vm_id, HostId from, HostId to) {
  auto& src = state.host(from).vm_ids;
  src.erase(std::remove(src.begin(), src.end(), vm_id), src.end());
  state.host(to).vm_ids.push_back(vm_id);
  state.vm(vm_id).host_id = to;
}

}  // namespace detail

/// Hosts whose aggregate utilization strictly exceeds TP, ascending by id.
/// Powered-off hosts are never overloaded.
inline std::vector<HostId> detect_overloaded(const DatacenterState& state,
                                             const SimConfig& cfg) {
  std::vector<HostId> out;
  for (const HostState& h : state.hosts) {
    if (h.is_off()) continue;
    if (host_utilization(state, h, cfg.weighted_utilization) > cfg.overload_threshold)
      out.push_back(h.id);
  }
  return out;
}

/// Power-aware best-fit-decreasing initial placement. VMs are sorted by
/// current CPU demand and each goes to the feasible host whose power rises
/// least; powered-off hosts are switched on only when nothing running fits.
/// Throws when some VM fits no host at all.
inline void initial_placement(DatacenterState& state, const SimConfig& cfg) {
  std::vector<VmId> order;
  order.reserve(state.vms.size());
  for (const VmState& vm : state.vms) order.push_back(vm.id);
  std::stable_sort(order.begin(), order.end(), [&](VmId a, VmId b) {
    double da = state.vm(a).demand_mhz();
    double db = state.vm(b).demand_mhz();
    if (da != db) return da > db;
    return a < b;
  });

  for (VmId vm_id : order) {
    const VmState& vm = state.vm(vm_id);
    detail::PendingLoad none;
    auto pick = [&](bool powered) -> std::optional<HostId> {
      std::optional<HostId> best;
      double best_delta = std::numeric_limits<double>::infinity();
      for (const HostState& h : state.hosts) {
        if (h.powered_on() != powered || (!powered && !h.is_off())) continue;
        if (!detail::fits_with_pending(state, h, vm, cfg, none, 1.0)) continue;
        double delta = detail::power_delta_with_pending(state, h, vm, cfg, none);
        if (delta < best_delta) {
          best_delta = delta;
          best = h.id;
        }
      }
      return best;
    };
    std::optional<HostId> target = pick(true);
    if (!target) {
      target = pick(false);
      if (target) state.host(*target).lifecycle = Lifecycle::on();
    }
    if (!target) {
      std::ostringstream msg;
      msg << "initial placement infeasible: vm " << vm_id << " fits no host";
      throw std::runtime_error(msg.str());
    }
    state.host(*target).vm_ids.push_back(vm_id);
    state.vm(vm_id).host_id = *target;
  }
}

/// PCO selection on an overloaded host: repeatedly drop the VM whose removal
/// just clears the threshold (smallest sufficient contribution); if no single
/// VM suffices, drop the largest and repeat.
inline std::vector<VmId> select_vms_pco(const DatacenterState& state, const HostState& host,
                                        const SimConfig& cfg) {
  struct Entry {
    VmId id;
    double contribution;
  };
  std::vector<Entry> remaining;
  double util = 0.0;
  for (VmId v : host.vm_ids) {
    const VmState& vm = state.vm(v);
    double c = vm.effective_utilization() * vm_weight(vm, host, cfg.weighted_utilization);
    remaining.push_back({v, c});
    util += c;
  }
  std::sort(remaining.begin(), remaining.end(),
            [](const Entry& a, const Entry& b) { return a.id < b.id; });

  std::vector<VmId> selected;
  while (util > cfg.overload_threshold && !remaining.empty()) {
    std::size_t pick = remaining.size();
    double pick_c = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      double c = remaining[i].contribution;
      if (util - c <= cfg.overload_threshold && c < pick_c) {
        pick = i;
        pick_c = c;
      }
    }
    if (pick == remaining.size()) {
      // nothing sufficient on its own: drop the largest
      pick = 0;
      for (std::size_t i = 1; i < remaining.size(); ++i)
        if (remaining[i].contribution > remaining[pick].contribution) pick = i;
    }
    selected.push_back(remaining[pick].id);
    util -= remaining[pick].contribution;
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return selected;
}

/// UBP migration probability. The printed form rises above 1 for any u <= 1
/// and is clamped; the corrected variant grows from 0 at T_h to 1 at full
/// utilization.
inline double ubp_migration_probability(double u, double t_h, double alpha,
                                        bool corrected = false) {
  if (u < 0.0 || u > 1.0) throw std::invalid_argument("utilization outside [0,1]");
  if (t_h >= 1.0) throw std::invalid_argument("T_h = 1 divides by zero");
  if (t_h <= 0.0) throw std::invalid_argument("T_h must be in (0,1)");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  double raw;
  if (corrected) {
    raw = u > t_h ? std::pow((u - t_h) / (1.0 - t_h), alpha) : 0.0;
  } else {
    raw = std::pow(1.0 - (u - 1.0) / (1.0 - t_h), alpha);
  }
  return std::clamp(raw, 0.0, 1.0);
}

/// Probabilistic selection on an overloaded host: walk the hosted VMs in id
/// order, migrating each with probability f_m of the current utilization,
/// until the host clears the threshold or every VM has been considered.
inline std::vector<VmId> select_vms_ubp(const DatacenterState& state, const HostState& host,
                                        const SimConfig& cfg, Rng& rng) {
  std::vector<VmId> order(host.vm_ids.begin(), host.vm_ids.end());
  std::sort(order.begin(), order.end());
  double util = host_utilization(state, host, cfg.weighted_utilization);
  std::vector<VmId> selected;
  for (VmId v : order) {
    if (util <= cfg.overload_threshold) break;
    double p = ubp_migration_probability(std::clamp(util, 0.0, 1.0), cfg.overload_threshold,
                                         cfg.ubp_alpha, cfg.ubp_corrected);
    if (rng.bernoulli(p)) {
      const VmState& vm = state.vm(v);
      selected.push_back(v);
      util -= vm.effective_utilization() * vm_weight(vm, host, cfg.weighted_utilization);
    }
  }
  return selected;
}

/// Two-phase consolidation. Phase 1 drains overloaded hosts onto the
/// cheapest feasible targets, waking sleeping hosts as a last resort.
/// Phase 2 walks the least-utilized hosts and fully evacuates any whose VMs
/// all fit elsewhere, marking the emptied host for shutdown. Targets are
/// rejected whenever a move would push them past the overload threshold.
inline ConsolidationResult consolidate(DatacenterState& state, const SimConfig& cfg,
                                       Rng& ubp_rng) {
  ConsolidationResult result;
  const bool weighted = cfg.weighted_utilization;
  detail::PendingLoad none;

  // phase 1: overload mitigation
  for (HostId over_id : detect_overloaded(state, cfg)) {
    HostState& source = state.host(over_id);
    std::vector<VmId> selected = (cfg.policy == Policy::UBP)
                                     ? select_vms_ubp(state, source, cfg, ubp_rng)
                                     : select_vms_pco(state, source, cfg);
    for (VmId vm_id : selected) {
      const VmState& vm = state.vm(vm_id);
      std::optional<HostId> best;
      double best_delta = std::numeric_limits<double>::infinity();
      for (const HostState& h : state.hosts) {
        if (!h.powered_on() || h.id == over_id) continue;
        if (host_utilization(state, h, weighted) > cfg.overload_threshold) continue;
        if (!detail::fits_with_pending(state, h, vm, cfg, none, cfg.overload_threshold))
          continue;
        double delta = detail::power_delta_with_pending(state, h, vm, cfg, none);
        if (delta < best_delta) {
          best_delta = delta;
          best = h.id;
        }
      }
      if (!best) {
        // wake a sleeping host
        for (const HostState& h : state.hosts) {
          if (!h.is_off()) continue;
          if (detail::fits_with_pending(state, h, vm, cfg, none, cfg.overload_threshold)) {
            best = h.id;
            break;
          }
        }
        if (best) {
          state.host(*best).lifecycle = Lifecycle::turning_on(cfg.host_transition_s);
          result.turned_on.push_back(*best);
        }
      }
      if (best) {
        detail::move_vm(state, vm_id, over_id, *best);
        result.migrations.push_back({vm_id, over_id, *best});
      } else {
        ++result.unresolved_overloads;
      }
    }
  }

  // phase 2: evacuate the least-utilized hosts
  std::vector<char> failed(state.hosts.size(), 0);
  for (;;) {
    HostId candidate = -1;
    double cand_util = std::numeric_limits<double>::infinity();
    for (const HostState& h : state.hosts) {
      if (!h.powered_on() || failed[static_cast<std::size_t>(h.id)]) continue;
      double u = host_utilization(state, h, weighted);
      if (u > cfg.overload_threshold) continue;
      if (u < cand_util) {
        cand_util = u;
        candidate = h.id;
      }
    }
    if (candidate < 0) break;

    const HostState& source = state.host(candidate);
    std::vector<VmId> evacuees(source.vm_ids.begin(), source.vm_ids.end());
    std::stable_sort(evacuees.begin(), evacuees.end(), [&](VmId a, VmId b) {
      double da = state.vm(a).demand_mhz();
      double db = state.vm(b).demand_mhz();
      if (da != db) return da > db;
      return a < b;
    });

    std::map<HostId, detail::PendingLoad> pending;
    std::vector<MigrationDecision> moves;
    bool ok = true;
    for (VmId vm_id : evacuees) {
      const VmState& vm = state.vm(vm_id);
      std::optional<HostId> best;
      double best_delta = std::numeric_limits<double>::infinity();
      for (const HostState& h : state.hosts) {
        if (!h.powered_on() || h.id == candidate) continue;
        if (host_utilization(state, h, weighted) > cfg.overload_threshold) continue;
        const detail::PendingLoad& load = pending[h.id];
        if (!detail::fits_with_pending(state, h, vm, cfg, load, cfg.overload_threshold))
          continue;
        double delta = detail::power_delta_with_pending(state, h, vm, cfg, load);
        if (delta < best_delta) {
          best_delta = delta;
          best = h.id;
        }
      }
      if (!best) {
        ok = false;
        break;
      }
      detail::PendingLoad& load = pending[*best];
      load.util_metric += vm.effective_utilization() * vm_weight(vm, state.host(*best), weighted);
      load.util_capacity += vm.effective_utilization() * vm_weight(vm, state.host(*best), true);
      load.ram_mb += vm.spec.ram_mb;
      load.vms += 1;
      moves.push_back({vm_id, candidate, *best});
    }

    if (ok) {
      for (const auto& m : moves) detail::move_vm(state, m.vm_id, m.source_host, m.target_host);
      result.migrations.insert(result.migrations.end(), moves.begin(), moves.end());
      state.host(candidate).lifecycle = Lifecycle::turning_off(cfg.host_transition_s);
      result.shutdowns.push_back(candidate);
    } else {
      failed[static_cast<std::size_t>(candidate)] = 1;
    }
  }

  return result;
}

}  // namespace brownsim
