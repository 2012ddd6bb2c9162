#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "brownsim/rng.hpp"
#include "brownsim/workload.hpp"

namespace {

using namespace brownsim;
namespace fs = std::filesystem;

class TempTraceDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("brownsim_traces_") +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write_file(const std::string& name, const std::string& body) {
    std::ofstream out(dir_ / name);
    out << body;
  }

  fs::path dir_;
};

TEST_F(TempTraceDir, LoadsIntegerPercentagesAsFractions) {
  write_file("vm_a", "50\n75\n");
  TraceSet t = load_trace_dir(dir_);
  ASSERT_EQ(t.vm_count(), 1u);
  ASSERT_EQ(t.series[0].size(), 2u);
  EXPECT_EQ(t.series[0][0], 0.50);
  EXPECT_EQ(t.series[0][1], 0.75);
}

TEST_F(TempTraceDir, FilesAreOrderedLexicographically) {
  write_file("vm_b", "10\n");
  write_file("vm_a", "20\n");
  TraceSet t = load_trace_dir(dir_);
  ASSERT_EQ(t.vm_count(), 2u);
  EXPECT_EQ(t.names[0], "vm_a");
  EXPECT_EQ(t.series[0][0], 0.20);
  EXPECT_EQ(t.series[1][0], 0.10);
}

TEST_F(TempTraceDir, RejectsOutOfRangeLine) {
  write_file("vm_a", "101\n");
  EXPECT_THROW(load_trace_dir(dir_), std::runtime_error);
}

TEST_F(TempTraceDir, RejectsNonIntegerLine) {
  write_file("vm_a", "5x\n");
  EXPECT_THROW(load_trace_dir(dir_), std::runtime_error);
}

TEST_F(TempTraceDir, EmptyDirectoryGivesEmptyTraceSet) {
  TraceSet t = load_trace_dir(dir_);
  EXPECT_EQ(t.vm_count(), 0u);
}

TEST_F(TempTraceDir, ShortSeriesErrorNamesTheFile) {
  write_file("vm_short", "10\n20\n");
  try {
    load_trace_dir(dir_, 5);
    FAIL() << "expected error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("vm_short"), std::string::npos);
  }
}

TEST(LoadTraceDir, MissingDirectoryIsAnError) {
  EXPECT_THROW(load_trace_dir("/nonexistent/brownsim_traces"), std::runtime_error);
}

TEST(SynthTraces, ZeroSpikeProbabilityIsConstantBase) {
  TraceSet t = synth_traces(3, 50, 0.7, 0.0, 0.95, 42);
  for (const auto& s : t.series)
    for (double u : s) EXPECT_EQ(u, 0.70);
}

TEST(SynthTraces, UnitSpikeProbabilityIsConstantSpike) {
  TraceSet t = synth_traces(3, 50, 0.7, 1.0, 0.95, 42);
  for (const auto& s : t.series)
    for (double u : s) EXPECT_EQ(u, 0.95);
}

TEST(SynthTraces, SameSeedSameTraces) {
  TraceSet a = synth_traces(5, 100, 0.7, 0.3, 0.95, 42);
  TraceSet b = synth_traces(5, 100, 0.7, 0.3, 0.95, 42);
  ASSERT_EQ(a.series.size(), b.series.size());
  for (std::size_t i = 0; i < a.series.size(); ++i) EXPECT_EQ(a.series[i], b.series[i]);
  TraceSet c = synth_traces(5, 100, 0.7, 0.3, 0.95, 43);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.series.size(); ++i)
    any_diff = any_diff || (a.series[i] != c.series[i]);
  EXPECT_TRUE(any_diff);
}

TEST(SynthTraces, RejectsBadLevels) {
  EXPECT_THROW(synth_traces(1, 10, 1.2, 0.5, 0.9, 1), std::invalid_argument);
  EXPECT_THROW(synth_traces(1, 10, 0.5, -0.1, 0.9, 1), std::invalid_argument);
}

TEST_F(TempTraceDir, WriteThenLoadRoundTrips) {
  TraceSet a = synth_traces(4, 60, 0.7, 0.3, 0.95, 9);
  write_trace_dir(a, dir_);
  TraceSet b = load_trace_dir(dir_);
  ASSERT_EQ(a.series.size(), b.series.size());
  for (std::size_t i = 0; i < a.series.size(); ++i) EXPECT_EQ(a.series[i], b.series[i]);
}

TEST(GenComponents, ZeroSigmaSplitsEvenly) {
  ComponentGenParams p;
  p.optional_fraction = 0.5;
  p.n_optional = 5;
  p.sigma_u = 0.0;
  p.sigma_d = 0.0;
  p.seed = 1;
  auto comps = gen_components(p);
  ASSERT_EQ(comps.size(), 6u);
  EXPECT_TRUE(comps[0].mandatory);
  EXPECT_NEAR(comps[0].utilization, 0.5, 1e-12);
  EXPECT_EQ(comps[0].discount, 0.0);
  for (std::size_t i = 1; i < comps.size(); ++i) {
    EXPECT_FALSE(comps[i].mandatory);
    EXPECT_NEAR(comps[i].utilization, 0.1, 1e-12);
    EXPECT_NEAR(comps[i].discount, 0.1, 1e-12);
  }
}

TEST(GenComponents, FullyOptionalApplicationHasZeroMandatoryShare) {
  ComponentGenParams p;
  p.optional_fraction = 1.0;
  p.n_optional = 4;
  auto comps = gen_components(p);
  EXPECT_EQ(comps[0].utilization, 0.0);
  EXPECT_TRUE(comps[0].mandatory);
}

TEST(GenComponents, RescaledTotalsHitOptionalFractionExactly) {
  ComponentGenParams p;
  p.optional_fraction = 0.5;
  p.n_optional = 5;
  p.sigma_u = 0.05;
  p.sigma_d = 0.05;
  p.seed = 77;
  auto comps = gen_components(p);
  double u_sum = 0.0;
  double d_sum = 0.0;
  for (const auto& c : comps) {
    if (c.mandatory) continue;
    u_sum += c.utilization;
    d_sum += c.discount;
  }
  EXPECT_NEAR(u_sum, 0.5, 1e-12);
  EXPECT_NEAR(d_sum, 0.5, 1e-12);
}

TEST(GenComponents, DeterministicPerSeed) {
  ComponentGenParams p;
  p.seed = 123;
  auto a = gen_components(p);
  auto b = gen_components(p);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].utilization, b[i].utilization);
    EXPECT_EQ(a[i].discount, b[i].discount);
  }
}

TEST(GenComponents, RejectsBadParameters) {
  ComponentGenParams p;
  p.n_optional = 0;
  EXPECT_THROW(gen_components(p), std::invalid_argument);
  p = ComponentGenParams{};
  p.optional_fraction = 0.0;
  EXPECT_THROW(gen_components(p), std::invalid_argument);
  p = ComponentGenParams{};
  p.sigma_u = 0.2;
  EXPECT_THROW(gen_components(p), std::invalid_argument);
}

VmState vm_with_shares(std::vector<std::pair<double, bool>> shares) {
  VmState vm;
  int id = 0;
  for (auto [u, active] : shares) {
    ComponentProfile c;
    c.id = id++;
    c.mandatory = false;
    c.utilization = u;
    c.discount = 0.1;
    c.active = active;
    vm.components.push_back(c);
  }
  return vm;
}

TEST(PartitionTrace, ProportionalSplit) {
  VmState vm = vm_with_shares({{0.5, true}, {0.5, true}});
  auto parts = partition_trace(vm, 0.8);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_NEAR(parts[0], 0.4, 1e-12);
  EXPECT_NEAR(parts[1], 0.4, 1e-12);
}

TEST(PartitionTrace, InactiveShareIsRemovedNotRedistributed) {
  VmState vm = vm_with_shares({{0.5, true}, {0.5, false}});
  auto parts = partition_trace(vm, 0.8);
  EXPECT_NEAR(parts[0], 0.4, 1e-12);
  EXPECT_EQ(parts[1], 0.0);
}

TEST(PartitionTrace, ZeroTraceGivesZeros) {
  VmState vm = vm_with_shares({{0.5, true}, {0.5, true}});
  for (double p : partition_trace(vm, 0.0)) EXPECT_EQ(p, 0.0);
}

TEST(PartitionTrace, ConservesTracedDemandWhenAllActive) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, bool>> shares;
    int n = 1 + static_cast<int>(rng.canonical() * 6);
    for (int i = 0; i < n; ++i) shares.push_back({0.01 + rng.canonical(), true});
    VmState vm = vm_with_shares(shares);
    double traced = rng.canonical();
    double sum = 0.0;
    for (double p : partition_trace(vm, traced)) sum += p;
    EXPECT_NEAR(sum, traced, 1e-12);
  }
}

TEST(PartitionTrace, DeactivationNeverIncreasesEffectiveUtilization) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<double, bool>> shares;
    int n = 2 + static_cast<int>(rng.canonical() * 5);
    for (int i = 0; i < n; ++i) shares.push_back({0.01 + rng.canonical(), true});
    VmState vm = vm_with_shares(shares);
    vm.traced_u = rng.canonical();
    double before = vm.effective_utilization();
    vm.components[static_cast<std::size_t>(rng.canonical() * n)].active = false;
    EXPECT_LE(vm.effective_utilization(), before + 1e-12);
  }
}

}  // namespace
