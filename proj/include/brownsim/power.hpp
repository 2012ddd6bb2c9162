#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "brownsim/types.hpp"

namespace brownsim {

inline constexpr double kJoulesPerKwh = 3.6e6;

/// Per-interval cost record; g = energy_kwh + lambda * discount.
struct IntervalCost {
  double energy_kwh = 0.0;
  double discount = 0.0;
  double g = 0.0;
};

/// VM utilization for one interval: the traced demand split across the
/// VM's components in proportion to their shares, summed over the active
/// ones. Deactivated components drop out; their demand is not redistributed.
inline double vm_utilization(const VmState& vm, double traced_u) {
  if (traced_u < 0.0 || traced_u > 1.0)
    throw std::invalid_argument("traced utilization outside [0,1]");
  double all = vm.share_sum();
  if (all <= 0.0) return 0.0;
  return traced_u * (vm.active_share_sum() / all);
}

/// (utilization fraction, vm_cpu / host_cpu weight) pair for one hosted VM.
struct WeightedUtil {
  double utilization = 0.0;
  double weight = 1.0;
};

/// Instantaneous host power. An empty host draws nothing even when on; a
/// transitioning host draws its idle floor; otherwise idle plus the dynamic
/// span scaled by total weighted utilization, capped at full load.
inline double host_power(const HostState& host, std::span<const WeightedUtil> vm_utils) {
  switch (host.lifecycle.phase) {
    case LifecyclePhase::Off:
      return 0.0;
    case LifecyclePhase::TurningOn:
    case LifecyclePhase::TurningOff:
      return host.spec.power.idle_watts;
    case LifecyclePhase::On:
      break;
  }
  if (vm_utils.empty()) return 0.0;
  double total = 0.0;
  for (const auto& wu : vm_utils) {
    if (wu.utilization < 0.0) throw std::invalid_argument("negative VM utilization");
    total += wu.utilization * wu.weight;
  }
  total = std::min(total, 1.0);
  return host.spec.power.idle_watts + total * host.spec.power.dynamic_watts;
}

/// Rectangle-rule energy for one interval: watts held constant over
/// interval_s seconds, converted to kWh.
inline double interval_energy(std::span<const double> powers_w, double interval_s) {
  if (!(interval_s > 0.0)) throw std::invalid_argument("interval_s must be > 0");
  double joules = 0.0;
  for (double p : powers_w) joules += p * interval_s;
  return joules / kJoulesPerKwh;
}

/// Total discount accrued this interval: the sum of d(App_c) over every
/// deactivated component of every VM.
inline double interval_discount(const std::vector<VmState>& vms) {
  double total = 0.0;
  for (const auto& vm : vms)
    for (const auto& c : vm.components)
      if (!c.active) total += c.discount;
  return total;
}

inline IntervalCost instant_cost(double energy_kwh, double discount, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  return {energy_kwh, discount, energy_kwh + lambda * discount};
}

/// Sum of E(t) + lambda * D(t) over the run.
inline double cumulative_objective(std::span<const double> energy_kwh,
                                   std::span<const double> discount, double lambda) {
  if (energy_kwh.size() != discount.size())
    throw std::invalid_argument("energy and discount series differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < energy_kwh.size(); ++i)
    total += energy_kwh[i] + lambda * discount[i];
  return total;
}

}  // namespace brownsim
