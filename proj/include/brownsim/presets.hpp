#pragma once

#include <vector>

#include "brownsim/rng.hpp"
#include "brownsim/types.hpp"
#include "brownsim/workload.hpp"

namespace brownsim {

// Built-in host and VM shapes. The wattages are the implementer-chosen
// defaults, derived from published SPECpower results for the IBM x3550 M3
// line (idle draw and full-load span of the X5670 / X5675 configurations);
// any profile can be overridden through configuration.

inline HostSpec host_type1() {
  HostSpec h;
  h.cpu_mhz_per_core = 1860.0;
  h.cores = 2;
  h.ram_mb = 4096.0;
  h.bw_mbps = 1000.0;
  h.storage_gb = 100.0;
  h.power = {66.0, 181.0};
  return h;
}

inline HostSpec host_type2() {
  HostSpec h;
  h.cpu_mhz_per_core = 2660.0;
  h.cores = 2;
  h.ram_mb = 4096.0;
  h.bw_mbps = 1000.0;
  h.storage_gb = 100.0;
  h.power = {58.4, 163.6};
  return h;
}

inline VmSpec vm_type(int kind) {
  switch (kind % 4) {
    case 0: return {2500.0, 870.0, 100.0, 1.0};
    case 1: return {2000.0, 1740.0, 100.0, 1.0};
    case 2: return {1000.0, 1740.0, 100.0, 1.0};
    default: return {500.0, 613.0, 100.0, 1.0};
  }
}

/// Builds an unplaced fleet: hosts alternate between the two built-in types
/// and start powered off; VMs cycle through the four VM types, each carrying
/// a freshly generated component set and pointing at trace index == vm id.
inline DatacenterState build_fleet(int n_hosts, int n_vms, const ComponentGenParams& gen,
                                   std::uint64_t seed) {
  DatacenterState state;
  state.hosts.reserve(static_cast<std::size_t>(n_hosts));
  for (int i = 0; i < n_hosts; ++i) {
    HostState h;
    h.id = i;
    h.spec = (i % 2 == 0) ? host_type1() : host_type2();
    h.lifecycle = Lifecycle::off();
    state.hosts.push_back(std::move(h));
  }
  state.vms.reserve(static_cast<std::size_t>(n_vms));
  for (int j = 0; j < n_vms; ++j) {
    VmState vm;
    vm.id = j;
    vm.spec = vm_type(j);
    vm.trace_id = j;
    ComponentGenParams per_vm = gen;
    per_vm.seed = mix_seed(mix_seed(seed, stream::components), static_cast<std::uint64_t>(j));
    vm.components = gen_components(per_vm);
    state.vms.push_back(std::move(vm));
  }
  return state;
}

}  // namespace brownsim
