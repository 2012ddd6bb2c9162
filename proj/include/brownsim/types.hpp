#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace brownsim {

using HostId = int;
using VmId = int;
using ComponentId = int;

/// Linear server power model: idle floor plus a dynamic span that scales
/// with total CPU utilization.
struct PowerProfile {
  double idle_watts = 0.0;
  double dynamic_watts = 0.0;
};

struct HostSpec {
  double cpu_mhz_per_core = 0.0;
  int cores = 1;
  double ram_mb = 0.0;
  double bw_mbps = 0.0;
  double storage_gb = 0.0;
  PowerProfile power;

  double total_mhz() const { return cpu_mhz_per_core * cores; }
};

struct VmSpec {
  double cpu_mhz = 0.0;
  double ram_mb = 0.0;
  double bw_mbps = 0.0;
  double storage_gb = 0.0;
};

/// One application component hosted on a VM. `utilization` and `discount`
/// are fractions of the VM's CPU capacity and of the application price.
/// Mandatory components are never deactivated and carry no discount.
struct ComponentProfile {
  ComponentId id = 0;
  bool mandatory = false;
  double utilization = 0.0;
  double discount = 0.0;
  bool active = true;
};

struct VmState {
  VmId id = 0;
  VmSpec spec;
  std::optional<HostId> host_id;
  std::vector<ComponentProfile> components;
  int trace_id = 0;
  /// Demand fraction for the current interval, loaded from the trace.
  double traced_u = 0.0;

  double share_sum() const {
    double s = 0.0;
    for (const auto& c : components) s += c.utilization;
    return s;
  }

  double active_share_sum() const {
    double s = 0.0;
    for (const auto& c : components)
      if (c.active) s += c.utilization;
    return s;
  }

  /// Current CPU demand as a fraction of the VM's capacity, after trace
  /// scaling and component deactivation. Computed as a ratio of share sums
  /// so that the all-active case reproduces traced_u bit-exactly.
  double effective_utilization() const {
    double all = share_sum();
    if (all <= 0.0) return 0.0;
    return traced_u * (active_share_sum() / all);
  }

  double demand_mhz() const { return effective_utilization() * spec.cpu_mhz; }

  /// True when the application carries no mandatory utilization, i.e. every
  /// unit of demand comes from deactivatable components.
  bool fully_optional() const {
    for (const auto& c : components)
      if (c.mandatory && c.utilization > 0.0) return false;
    return true;
  }
};

enum class LifecyclePhase { Off, On, TurningOn, TurningOff };

struct Lifecycle {
  LifecyclePhase phase = LifecyclePhase::Off;
  double remaining_s = 0.0;  // only meaningful while transitioning

  static Lifecycle off() { return {LifecyclePhase::Off, 0.0}; }
  static Lifecycle on() { return {LifecyclePhase::On, 0.0}; }
  static Lifecycle turning_on(double s) { return {LifecyclePhase::TurningOn, s}; }
  static Lifecycle turning_off(double s) { return {LifecyclePhase::TurningOff, s}; }
};

struct HostState {
  HostId id = 0;
  HostSpec spec;
  Lifecycle lifecycle;
  std::vector<VmId> vm_ids;

  bool is_off() const { return lifecycle.phase == LifecyclePhase::Off; }
  /// On or coming up; a host in either state can run VMs.
  bool powered_on() const {
    return lifecycle.phase == LifecyclePhase::On ||
           lifecycle.phase == LifecyclePhase::TurningOn;
  }
};

struct DatacenterState {
  std::vector<HostState> hosts;
  std::vector<VmState> vms;
  long clock = 0;  // interval index t

  // Builders keep id == vector index; validate() flags any drift.
  HostState& host(HostId id) { return hosts.at(static_cast<std::size_t>(id)); }
  const HostState& host(HostId id) const { return hosts.at(static_cast<std::size_t>(id)); }
  VmState& vm(VmId id) { return vms.at(static_cast<std::size_t>(id)); }
  const VmState& vm(VmId id) const { return vms.at(static_cast<std::size_t>(id)); }
};

/// Q(t) = (E(t), D(t)) paired with the component activation vector C(t).
struct SystemState {
  double energy_kwh = 0.0;
  double discount_amount = 0.0;
  std::vector<bool> activation_vector;
};

enum class Policy { PCO, UBP, HUPRFCS, BMDP };

inline std::string to_string(Policy p) {
  switch (p) {
    case Policy::PCO: return "PCO";
    case Policy::UBP: return "UBP";
    case Policy::HUPRFCS: return "HUPRFCS";
    case Policy::BMDP: return "BMDP";
  }
  return "?";
}

inline Policy policy_from_string(const std::string& s) {
  if (s == "PCO") return Policy::PCO;
  if (s == "UBP") return Policy::UBP;
  if (s == "HUPRFCS") return Policy::HUPRFCS;
  if (s == "BMDP") return Policy::BMDP;
  throw std::invalid_argument("unknown policy: " + s);
}

struct SimConfig {
  double interval_s = 300.0;
  long horizon_intervals = 288;
  double overload_threshold = 0.8;  // TP
  double lambda = 100.0;
  int window_size = 12;  // L_w
  double host_transition_s = 30.0;
  Policy policy = Policy::PCO;
  double ubp_alpha = 1.0;
  std::uint64_t seed = 1;
  /// Depth of the finite-horizon backup used by the MDP controller.
  int mdp_lookahead = 1;
  /// UBP migration probability: false evaluates the formula as printed
  /// (clamped), true uses the corrected decreasing variant.
  bool ubp_corrected = false;
  /// Weight each VM's utilization by vm_cpu/host_cpu when aggregating at
  /// host level; false adds raw VM fractions.
  bool weighted_utilization = true;

  void check() const {
    if (!(overload_threshold > 0.0 && overload_threshold <= 1.0))
      throw std::invalid_argument("overload_threshold must be in (0,1]");
    if (window_size < 1) throw std::invalid_argument("window_size must be >= 1");
    if (!(interval_s > 0.0)) throw std::invalid_argument("interval_s must be > 0");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  }
};

namespace detail {
inline void add_violation(std::vector<std::string>& out, const std::string& entity,
                          const std::string& what) {
  out.push_back(entity + ": " + what);
}
}  // namespace detail

/// Structural invariant check. Returns one message per broken invariant;
/// an empty list means the state is consistent.
inline std::vector<std::string> validate(const DatacenterState& state,
                                         double host_transition_s = 30.0) {
  std::vector<std::string> out;
  constexpr double eps = 1e-9;

  for (std::size_t i = 0; i < state.hosts.size(); ++i) {
    const HostState& h = state.hosts[i];
    std::ostringstream tag;
    tag << "host " << h.id;
    if (h.id != static_cast<HostId>(i))
      detail::add_violation(out, tag.str(), "id does not match container position");
    if (h.spec.cpu_mhz_per_core <= 0 || h.spec.cores <= 0 || h.spec.ram_mb <= 0 ||
        h.spec.bw_mbps <= 0 || h.spec.storage_gb <= 0)
      detail::add_violation(out, tag.str(), "host capacities must be positive");
    if (h.spec.power.idle_watts < 0 || h.spec.power.dynamic_watts < 0)
      detail::add_violation(out, tag.str(), "power profile watts must be non-negative");
    if (h.is_off() && !h.vm_ids.empty())
      detail::add_violation(out, tag.str(), "Off host hosts VM");
    if (h.lifecycle.phase == LifecyclePhase::TurningOn ||
        h.lifecycle.phase == LifecyclePhase::TurningOff) {
      if (!(h.lifecycle.remaining_s > 0.0 &&
            h.lifecycle.remaining_s <= host_transition_s + eps))
        detail::add_violation(out, tag.str(),
                              "transition remaining_s outside (0, transition_time]");
    }
    for (VmId v : h.vm_ids) {
      if (v < 0 || static_cast<std::size_t>(v) >= state.vms.size()) {
        detail::add_violation(out, tag.str(), "references unknown VM");
      } else if (state.vms[static_cast<std::size_t>(v)].host_id != h.id) {
        detail::add_violation(out, tag.str(), "VM back-reference mismatch");
      }
    }
  }

  for (std::size_t j = 0; j < state.vms.size(); ++j) {
    const VmState& vm = state.vms[j];
    std::ostringstream tag;
    tag << "vm " << vm.id;
    if (vm.id != static_cast<VmId>(j))
      detail::add_violation(out, tag.str(), "id does not match container position");
    if (vm.spec.cpu_mhz <= 0 || vm.spec.ram_mb <= 0 || vm.spec.bw_mbps <= 0 ||
        vm.spec.storage_gb <= 0)
      detail::add_violation(out, tag.str(), "VM capacities must be positive");
    if (vm.traced_u < 0.0 || vm.traced_u > 1.0)
      detail::add_violation(out, tag.str(), "traced utilization outside [0,1]");
    double active_sum = 0.0;
    for (const auto& c : vm.components) {
      std::ostringstream ctag;
      ctag << "vm " << vm.id << " component " << c.id;
      if (c.utilization < 0.0 || c.utilization > 1.0)
        detail::add_violation(out, ctag.str(), "utilization outside [0,1]");
      if (c.discount < 0.0 || c.discount > 1.0)
        detail::add_violation(out, ctag.str(), "discount outside [0,1]");
      if (c.mandatory && !c.active)
        detail::add_violation(out, ctag.str(), "mandatory component is inactive");
      if (c.mandatory && c.discount != 0.0)
        detail::add_violation(out, ctag.str(), "mandatory component has nonzero discount");
      if (c.active) active_sum += c.utilization;
    }
    if (active_sum > 1.0 + eps)
      detail::add_violation(out, tag.str(), "utilization exceeds capacity");
    if (vm.host_id) {
      HostId h = *vm.host_id;
      if (h < 0 || static_cast<std::size_t>(h) >= state.hosts.size()) {
        detail::add_violation(out, tag.str(), "references unknown host");
      } else {
        const auto& ids = state.hosts[static_cast<std::size_t>(h)].vm_ids;
        bool found = false;
        for (VmId v : ids) found = found || (v == vm.id);
        if (!found) detail::add_violation(out, tag.str(), "host does not list this VM");
      }
    }
  }

  if (state.clock < 0) detail::add_violation(out, "datacenter", "clock is negative");
  return out;
}

}  // namespace brownsim
