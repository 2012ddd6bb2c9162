#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "brownsim/power.hpp"
#include "brownsim/rng.hpp"

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

HostState host_with(double idle, double dynamic, LifecyclePhase phase) {
  HostState h;
  h.spec.cpu_mhz_per_core = 2000;
  h.spec.cores = 2;
  h.spec.ram_mb = 4096;
  h.spec.bw_mbps = 1000;
  h.spec.storage_gb = 100;
  h.spec.power = {idle, dynamic};
  h.lifecycle.phase = phase;
  if (phase == LifecyclePhase::TurningOn || phase == LifecyclePhase::TurningOff)
    h.lifecycle.remaining_s = 30.0;
  return h;
}

TEST(VmUtilization, SumsActiveComponentsUnderIdentityScaling) {
  VmState vm;
  vm.components.push_back(component(0, true, 0.10, 0.0));
  vm.components.push_back(component(1, false, 0.20, 0.1));
  vm.components.push_back(component(2, false, 0.25, 0.1, /*active=*/false));
  // traced demand equal to the share total makes the scaling an identity
  EXPECT_NEAR(vm_utilization(vm, 0.55), 0.30, 1e-12);
}

TEST(VmUtilization, OnlyMandatoryLeftActive) {
  VmState vm;
  vm.components.push_back(component(0, true, 0.10, 0.0));
  vm.components.push_back(component(1, false, 0.20, 0.1, false));
  vm.components.push_back(component(2, false, 0.25, 0.1, false));
  EXPECT_NEAR(vm_utilization(vm, 0.55), 0.10, 1e-12);
}

TEST(VmUtilization, NoComponentsGivesZero) {
  VmState vm;
  EXPECT_EQ(vm_utilization(vm, 0.9), 0.0);
}

TEST(VmUtilization, RejectsTracedOutsideUnitRange) {
  VmState vm;
  vm.components.push_back(component(0, true, 0.5, 0.0));
  EXPECT_THROW(vm_utilization(vm, 1.2), std::invalid_argument);
  EXPECT_THROW(vm_utilization(vm, -0.1), std::invalid_argument);
}

TEST(HostPower, OnWithNoVmsDrawsNothing) {
  HostState h = host_with(100, 150, LifecyclePhase::On);
  EXPECT_EQ(host_power(h, {}), 0.0);
}

TEST(HostPower, IdlePlusWeightedDynamic) {
  HostState h = host_with(100, 150, LifecyclePhase::On);
  std::vector<WeightedUtil> utils{{0.3, 1.0}, {0.2, 1.0}};
  EXPECT_NEAR(host_power(h, utils), 175.0, 1e-12);
}

TEST(HostPower, TransitioningHostDrawsIdle) {
  HostState off = host_with(100, 150, LifecyclePhase::TurningOff);
  HostState on = host_with(100, 150, LifecyclePhase::TurningOn);
  std::vector<WeightedUtil> utils{{0.9, 1.0}};
  EXPECT_EQ(host_power(off, utils), 100.0);
  EXPECT_EQ(host_power(on, utils), 100.0);
}

TEST(HostPower, OffHostDrawsNothing) {
  HostState h = host_with(100, 150, LifecyclePhase::Off);
  std::vector<WeightedUtil> utils{{0.9, 1.0}};
  EXPECT_EQ(host_power(h, utils), 0.0);
}

TEST(HostPower, UtilizationSumIsClampedAtFullLoad) {
  HostState h = host_with(100, 150, LifecyclePhase::On);
  std::vector<WeightedUtil> utils{{0.9, 1.0}, {0.8, 1.0}};
  EXPECT_NEAR(host_power(h, utils), 250.0, 1e-12);
}

TEST(HostPower, RejectsNegativeUtilization) {
  HostState h = host_with(100, 150, LifecyclePhase::On);
  std::vector<WeightedUtil> utils{{-0.1, 1.0}};
  EXPECT_THROW(host_power(h, utils), std::invalid_argument);
}

TEST(HostPower, MonotoneInEveryUtilizationWhileOn) {
  HostState h = host_with(80, 200, LifecyclePhase::On);
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<WeightedUtil> utils;
    int n = 1 + static_cast<int>(rng.canonical() * 4);
    for (int i = 0; i < n; ++i) utils.push_back({rng.canonical(), 0.25 + 0.75 * rng.canonical()});
    double base = host_power(h, utils);
    std::size_t bump = static_cast<std::size_t>(rng.canonical() * n);
    utils[bump].utilization = std::min(1.0, utils[bump].utilization + rng.canonical() * 0.3);
    EXPECT_GE(host_power(h, utils) + 1e-12, base);
  }
}

TEST(IntervalEnergy, RectangleRule) {
  std::vector<double> p{175.0};
  EXPECT_NEAR(interval_energy(p, 300.0), 0.01458333333333333, 1e-15);
  EXPECT_DOUBLE_EQ(interval_energy(p, 300.0), 175.0 * 300.0 / 3.6e6);
}

TEST(IntervalEnergy, EmptyListIsZero) {
  EXPECT_EQ(interval_energy({}, 300.0), 0.0);
}

TEST(IntervalEnergy, TwoHostsOneHour) {
  std::vector<double> p{100.0, 100.0};
  EXPECT_NEAR(interval_energy(p, 3600.0), 0.2, 1e-15);
}

TEST(IntervalEnergy, LinearInDurationAndAdditiveOverPartitions) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p;
    int n = 2 + static_cast<int>(rng.canonical() * 6);
    for (int i = 0; i < n; ++i) p.push_back(rng.canonical() * 300.0);
    double dt = 10.0 + rng.canonical() * 1000.0;
    EXPECT_NEAR(interval_energy(p, 2.0 * dt), 2.0 * interval_energy(p, dt), 1e-12);
    std::size_t cut = 1 + static_cast<std::size_t>(rng.canonical() * (n - 1));
    std::vector<double> a(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<double> b(p.begin() + static_cast<std::ptrdiff_t>(cut), p.end());
    EXPECT_NEAR(interval_energy(a, dt) + interval_energy(b, dt), interval_energy(p, dt), 1e-12);
  }
}

TEST(IntervalDiscount, AllActiveIsZero) {
  VmState vm;
  vm.components.push_back(component(0, true, 0.5, 0.0));
  vm.components.push_back(component(1, false, 0.3, 0.2));
  std::vector<VmState> vms{vm};
  EXPECT_EQ(interval_discount(vms), 0.0);
}

TEST(IntervalDiscount, SumsInactiveDiscounts) {
  VmState vm;
  vm.components.push_back(component(0, true, 0.5, 0.0));
  vm.components.push_back(component(1, false, 0.2, 0.05, false));
  vm.components.push_back(component(2, false, 0.2, 0.10, false));
  std::vector<VmState> vms{vm};
  EXPECT_NEAR(interval_discount(vms), 0.15, 1e-12);
}

TEST(IntervalDiscount, AddsAcrossVms) {
  VmState a;
  a.components.push_back(component(0, false, 0.2, 0.05, false));
  VmState b;
  b.components.push_back(component(0, false, 0.2, 0.05, false));
  std::vector<VmState> vms{a, b};
  EXPECT_NEAR(interval_discount(vms), 0.10, 1e-12);
}

TEST(IntervalDiscount, InvariantToReordering) {
  Rng rng(17);
  std::vector<VmState> vms;
  for (int v = 0; v < 6; ++v) {
    VmState vm;
    for (int c = 0; c < 4; ++c)
      vm.components.push_back(
          component(c, false, rng.canonical() * 0.2, rng.canonical() * 0.2, rng.bernoulli(0.5)));
    vms.push_back(vm);
  }
  double base = interval_discount(vms);
  std::reverse(vms.begin(), vms.end());
  for (auto& vm : vms) std::reverse(vm.components.begin(), vm.components.end());
  EXPECT_NEAR(interval_discount(vms), base, 1e-12);
}

TEST(InstantCost, WeightsDiscountByLambda) {
  IntervalCost c = instant_cost(600.0, 0.1, 100.0);
  EXPECT_NEAR(c.g, 610.0, 1e-9);
  EXPECT_EQ(c.energy_kwh, 600.0);
  EXPECT_EQ(c.discount, 0.1);
}

TEST(InstantCost, ZeroLambdaDropsDiscount) {
  EXPECT_EQ(instant_cost(600.0, 0.1, 0.0).g, 600.0);
}

TEST(InstantCost, ZeroCaseAndFormulaExactness) {
  EXPECT_EQ(instant_cost(0.0, 0.0, 100.0).g, 0.0);
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    double e = rng.canonical() * 1000.0;
    double d = rng.canonical();
    double lambda = rng.canonical() * 5000.0;
    IntervalCost c = instant_cost(e, d, lambda);
    EXPECT_EQ(c.g, e + lambda * d);  // the stated formula, bit for bit
  }
}

TEST(InstantCost, RejectsNegativeLambda) {
  EXPECT_THROW(instant_cost(1.0, 0.0, -1.0), std::invalid_argument);
}

TEST(CumulativeObjective, SumsPerIntervalCosts) {
  std::vector<double> e{610.0, 590.0};
  std::vector<double> d{0.0, 0.0};
  EXPECT_NEAR(cumulative_objective(e, d, 100.0), 1200.0, 1e-9);
}

TEST(CumulativeObjective, EmptyAndSingle) {
  EXPECT_EQ(cumulative_objective({}, {}, 100.0), 0.0);
  std::vector<double> e{610.0};
  std::vector<double> d{0.25};
  EXPECT_NEAR(cumulative_objective(e, d, 100.0), 635.0, 1e-9);
}

TEST(CumulativeObjective, AffineInLambdaWithDiscountSlope) {
  Rng rng(31);
  std::vector<double> e;
  std::vector<double> d;
  double d_sum = 0.0;
  for (int i = 0; i < 20; ++i) {
    e.push_back(rng.canonical() * 10.0);
    d.push_back(rng.canonical());
    d_sum += d.back();
  }
  double at0 = cumulative_objective(e, d, 0.0);
  for (double lambda : {1.0, 10.0, 100.0, 4500.0}) {
    EXPECT_NEAR(cumulative_objective(e, d, lambda), at0 + lambda * d_sum, 1e-8 * (1.0 + lambda));
  }
}

}  // namespace
