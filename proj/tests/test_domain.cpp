#include <gtest/gtest.h>

#include "brownsim/presets.hpp"
#include "brownsim/types.hpp"

namespace {

using namespace brownsim;

ComponentProfile component(ComponentId id, bool mandatory, double u, double d,
                           bool active = true) {
  ComponentProfile c;
  c.id = id;
  c.mandatory = mandatory;
  c.utilization = u;
  c.discount = d;
  c.active = active;
  return c;
}

DatacenterState two_host_two_vm_state() {
  DatacenterState state;
  for (int i = 0; i < 2; ++i) {
    HostState h;
    h.id = i;
    h.spec = host_type1();
    h.lifecycle = Lifecycle::on();
    state.hosts.push_back(h);
  }
  for (int j = 0; j < 2; ++j) {
    VmState vm;
    vm.id = j;
    vm.spec = vm_type(2);
    vm.trace_id = j;
    vm.traced_u = 0.5;
    vm.components.push_back(component(0, true, 0.5, 0.0));
    vm.components.push_back(component(1, false, 0.3, 0.1));
    vm.host_id = j;
    state.hosts[static_cast<std::size_t>(j)].vm_ids.push_back(j);
    state.vms.push_back(vm);
  }
  return state;
}

TEST(Validate, ConsistentStateHasNoViolations) {
  DatacenterState state = two_host_two_vm_state();
  EXPECT_TRUE(validate(state).empty());
}

TEST(Validate, OffHostHostingVmIsFlagged) {
  DatacenterState state = two_host_two_vm_state();
  state.hosts[1].lifecycle = Lifecycle::off();
  auto violations = validate(state);
  ASSERT_FALSE(violations.empty());
  bool found = false;
  for (const auto& v : violations) found = found || v.find("Off host hosts VM") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(Validate, ActiveUtilizationAboveCapacityIsFlagged) {
  DatacenterState state = two_host_two_vm_state();
  state.vms[0].components.push_back(component(2, false, 0.4, 0.1));
  // active shares now 0.5 + 0.3 + 0.4 = 1.2
  auto violations = validate(state);
  bool found = false;
  for (const auto& v : violations)
    found = found || v.find("utilization exceeds capacity") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(Validate, InactiveMandatoryComponentIsFlagged) {
  DatacenterState state = two_host_two_vm_state();
  state.vms[0].components[0].active = false;
  auto violations = validate(state);
  bool found = false;
  for (const auto& v : violations)
    found = found || v.find("mandatory component is inactive") != std::string::npos;
  EXPECT_TRUE(found);
}

TEST(Validate, BrokenCrossReferenceIsFlagged) {
  DatacenterState state = two_host_two_vm_state();
  state.vms[1].host_id = 0;  // host 0 does not list vm 1
  EXPECT_FALSE(validate(state).empty());
}

TEST(Validate, TransitionRemainingOutOfRangeIsFlagged) {
  DatacenterState state = two_host_two_vm_state();
  state.hosts[1].vm_ids.clear();
  state.vms[1].host_id.reset();
  state.hosts[1].lifecycle = Lifecycle::turning_off(45.0);
  EXPECT_FALSE(validate(state, 30.0).empty());
  state.hosts[1].lifecycle = Lifecycle::turning_off(30.0);
  EXPECT_TRUE(validate(state, 30.0).empty());
}

TEST(VmState, EffectiveUtilizationIsExactWhenAllActive) {
  VmState vm;
  vm.spec = vm_type(0);
  vm.traced_u = 0.73;
  vm.components.push_back(component(0, true, 0.5, 0.0));
  vm.components.push_back(component(1, false, 0.17, 0.09));
  vm.components.push_back(component(2, false, 0.33, 0.11));
  EXPECT_EQ(vm.effective_utilization(), 0.73);  // bit-exact, not just close
}

TEST(VmState, DeactivationOnlyLowersEffectiveUtilization) {
  VmState vm;
  vm.spec = vm_type(0);
  vm.traced_u = 0.8;
  vm.components.push_back(component(0, true, 0.4, 0.0));
  vm.components.push_back(component(1, false, 0.6, 0.2));
  double before = vm.effective_utilization();
  vm.components[1].active = false;
  EXPECT_LT(vm.effective_utilization(), before);
  EXPECT_NEAR(vm.effective_utilization(), 0.8 * 0.4, 1e-12);
}

TEST(VmState, FullyOptionalIgnoresZeroUtilizationMandatory) {
  VmState vm;
  vm.components.push_back(component(0, true, 0.0, 0.0));
  vm.components.push_back(component(1, false, 1.0, 0.5));
  EXPECT_TRUE(vm.fully_optional());
  vm.components[0].utilization = 0.1;
  EXPECT_FALSE(vm.fully_optional());
}

TEST(SimConfig, CheckRejectsBadValues) {
  SimConfig cfg;
  cfg.overload_threshold = 0.0;
  EXPECT_THROW(cfg.check(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.window_size = 0;
  EXPECT_THROW(cfg.check(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.check(), std::invalid_argument);
  cfg = SimConfig{};
  EXPECT_NO_THROW(cfg.check());
}

TEST(Presets, FleetBuilderIsDeterministic) {
  ComponentGenParams gen;
  DatacenterState a = build_fleet(4, 8, gen, 7);
  DatacenterState b = build_fleet(4, 8, gen, 7);
  ASSERT_EQ(a.vms.size(), b.vms.size());
  for (std::size_t i = 0; i < a.vms.size(); ++i) {
    ASSERT_EQ(a.vms[i].components.size(), b.vms[i].components.size());
    for (std::size_t c = 0; c < a.vms[i].components.size(); ++c) {
      EXPECT_EQ(a.vms[i].components[c].utilization, b.vms[i].components[c].utilization);
      EXPECT_EQ(a.vms[i].components[c].discount, b.vms[i].components[c].discount);
    }
  }
  EXPECT_TRUE(validate(a).empty());
}

}  // namespace
