#pragma once

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "brownsim/brownout.hpp"
#include "brownsim/placement.hpp"
#include "brownsim/power.hpp"
#include "brownsim/rng.hpp"
#include "brownsim/types.hpp"
#include "brownsim/workload.hpp"

namespace brownsim {

struct IntervalRecord {
  long t = 0;
  double energy_kwh = 0.0;
  double discount = 0.0;
  double g = 0.0;
  int overloaded = 0;
  int migrations = 0;
  int hosts_on = 0;
  int shutdowns = 0;  // hosts switched off this interval; not a CSV column
};

struct MetricsLedger {
  std::vector<IntervalRecord> records;
  double total_energy_kwh = 0.0;
  double total_discount = 0.0;
  long total_migrations = 0;
  long total_shutdowns = 0;
  /// Sum of every optional component's discount times the horizon; the
  /// denominator for discount-as-percentage reporting.
  double max_discount_accruable = 0.0;

  void append(const IntervalRecord& r) {
    records.push_back(r);
    total_energy_kwh += r.energy_kwh;
    total_discount += r.discount;
    total_migrations += r.migrations;
    total_shutdowns += r.shutdowns;
  }

  double discount_pct_of_max() const {
    return max_discount_accruable > 0.0 ? 100.0 * total_discount / max_discount_accruable
                                        : 0.0;
  }
};

/// Eq. 8 over a finished run: sum of E(t) + lambda * D(t).
inline double cumulative_objective(const MetricsLedger& ledger, double lambda) {
  std::vector<double> e;
  std::vector<double> d;
  e.reserve(ledger.records.size());
  d.reserve(ledger.records.size());
  for (const auto& r : ledger.records) {
    e.push_back(r.energy_kwh);
    d.push_back(r.discount);
  }
  return cumulative_objective(e, d, lambda);
}

/// Snapshot of Q(t) = (E(t), D(t)) plus the activation vector C(t).
inline SystemState make_system_state(const DatacenterState& state, double energy_kwh,
                                     double discount) {
  SystemState s;
  s.energy_kwh = energy_kwh;
  s.discount_amount = discount;
  for (const auto& vm : state.vms)
    for (const auto& c : vm.components) s.activation_vector.push_back(c.active);
  return s;
}

/// Mutable per-run companions of the datacenter state.
struct RunContext {
  OverloadWindow window;
  Rng ubp_rng;

  RunContext(const SimConfig& cfg)
      : window(cfg.window_size), ubp_rng(mix_seed(cfg.seed, stream::ubp)) {}
};

namespace detail {

/// Interval energy of one host in kWh, blending transition windows: a host
/// switching on or off draws idle power for the transition slice and its
/// destination-state power for the remainder of the interval.
inline double host_interval_energy(const DatacenterState& state, const HostState& host,
                                   const SimConfig& cfg) {
  double dt = cfg.interval_s;
  double idle = host.spec.power.idle_watts;
  double joules = 0.0;
  switch (host.lifecycle.phase) {
    case LifecyclePhase::Off:
      return 0.0;
    case LifecyclePhase::On:
      joules = host_power_now(state, host, cfg.weighted_utilization) * dt;
      break;
    case LifecyclePhase::TurningOn: {
      double trans = std::min(host.lifecycle.remaining_s, dt);
      HostState as_on = host;
      as_on.lifecycle = Lifecycle::on();
      joules = idle * trans +
               host_power_now(state, as_on, cfg.weighted_utilization) * (dt - trans);
      break;
    }
    case LifecyclePhase::TurningOff: {
      double trans = std::min(host.lifecycle.remaining_s, dt);
      joules = idle * trans;  // destination state draws nothing
      break;
    }
  }
  return joules / kJoulesPerKwh;
}

inline void advance_lifecycle(DatacenterState& state, double dt) {
  for (auto& h : state.hosts) {
    if (h.lifecycle.phase == LifecyclePhase::TurningOn ||
        h.lifecycle.phase == LifecyclePhase::TurningOff) {
      h.lifecycle.remaining_s -= dt;
      if (h.lifecycle.remaining_s <= 0.0) {
        h.lifecycle = (h.lifecycle.phase == LifecyclePhase::TurningOn) ? Lifecycle::on()
                                                                       : Lifecycle::off();
      }
    }
  }
}

}  // namespace detail

/// One scheduling interval. Phases: load traces and reset components, record
/// N(t), brownout (policy-dependent), consolidation, power/energy/discount
/// accounting on the resulting placement, lifecycle advance, ledger record.
inline IntervalRecord step(DatacenterState& state, const SimConfig& cfg,
                           const TraceSet& traces, RunContext& ctx) {
  long t = state.clock;

  // 1. demand for this interval; every optional component starts active
  for (auto& vm : state.vms) {
    const auto& series = traces.series.at(static_cast<std::size_t>(vm.trace_id));
    if (static_cast<std::size_t>(t) >= series.size()) {
      std::ostringstream msg;
      msg << "trace " << vm.trace_id << " exhausted at interval " << t;
      throw std::runtime_error(msg.str());
    }
    vm.traced_u = series[static_cast<std::size_t>(t)];
  }
  reset_components(state);

  // 2. overload census feeds the sliding window
  int overloaded = static_cast<int>(detect_overloaded(state, cfg).size());
  ctx.window.record(overloaded);

  // 3. brownout
  if (cfg.policy == Policy::BMDP) {
    apply_plan(state, bmdp_select(state, cfg, ctx.window));
  } else if (cfg.policy == Policy::HUPRFCS) {
    apply_plan(state, huprfcs_select(state, cfg, ctx.window));
  }

  // 4. consolidation on the post-brownout utilizations
  ConsolidationResult consolidation = consolidate(state, cfg, ctx.ubp_rng);

  // 5. energy and discount for the interval, on the final placement
  double energy = 0.0;
  int hosts_on = 0;
  for (const auto& h : state.hosts) {
    energy += detail::host_interval_energy(state, h, cfg);
    if (!h.is_off()) ++hosts_on;
  }
  double discount = interval_discount(state.vms);
  IntervalCost cost = instant_cost(energy, discount, cfg.lambda);

  // 6. transitions complete within the interval
  detail::advance_lifecycle(state, cfg.interval_s);

  IntervalRecord record;
  record.t = t;
  record.energy_kwh = cost.energy_kwh;
  record.discount = cost.discount;
  record.g = cost.g;
  record.overloaded = overloaded;
  record.migrations = static_cast<int>(consolidation.migrations.size());
  record.hosts_on = hosts_on;
  record.shutdowns = static_cast<int>(consolidation.shutdowns.size());

  state.clock = t + 1;
  return record;
}

/// Full run: initial placement followed by horizon steps. Bit-reproducible
/// for a fixed config and seed.
inline MetricsLedger run(const SimConfig& cfg, const TraceSet& traces, DatacenterState fleet) {
  cfg.check();
  if (traces.vm_count() < fleet.vms.size())
    throw std::runtime_error("trace set smaller than fleet");
  if (cfg.horizon_intervals > 0 &&
      traces.min_length() < static_cast<std::size_t>(cfg.horizon_intervals))
    throw std::runtime_error("trace shorter than horizon");

  MetricsLedger ledger;
  for (const auto& vm : fleet.vms)
    for (const auto& c : vm.components)
      if (!c.mandatory)
        ledger.max_discount_accruable += c.discount * static_cast<double>(cfg.horizon_intervals);

  if (cfg.horizon_intervals == 0) return ledger;

  for (auto& vm : fleet.vms)
    vm.traced_u = traces.series.at(static_cast<std::size_t>(vm.trace_id)).at(0);
  initial_placement(fleet, cfg);

  RunContext ctx(cfg);
  for (long t = 0; t < cfg.horizon_intervals; ++t) ledger.append(step(fleet, cfg, traces, ctx));
  return ledger;
}

}  // namespace brownsim
