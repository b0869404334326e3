#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "backfill_scenarios.hpp"
#include "fixtures.hpp"
#include "qwait/error.hpp"
#include "qwait/simworld.hpp"

using namespace qwait;

namespace {

std::map<std::string, Instant> starts(const Trace& t) {
  std::map<std::string, Instant> out;
  for (const auto& r : t.records) out[r.job_id] = r.start;
  return out;
}

// Replays a trace and checks that node usage never exceeds capacity.
int peak_usage(const Trace& t) {
  std::map<Instant, int> delta;
  for (const auto& r : t.records) {
    if (r.end == r.start) continue;
    delta[r.start] += r.nodes_req;
    delta[r.end] -= r.nodes_req;
  }
  int used = 0, peak = 0;
  for (const auto& [at, d] : delta) {
    used += d;
    peak = std::max(peak, used);
  }
  return peak;
}

}  // namespace

class BackfillScenarioTest : public ::testing::TestWithParam<qwait::testing::BackfillScenario> {};

TEST_P(BackfillScenarioTest, HandComputedStarts) {
  const auto& s = GetParam();
  const Trace t = simulate_backfill(s.jobs, s.capacity);
  EXPECT_EQ(starts(t), s.expected_start);
  for (const auto& r : t.records) {
    const auto it = std::find_if(s.jobs.begin(), s.jobs.end(), [&](const SimJob& j) { return j.job_id == r.job_id; });
    EXPECT_EQ(r.end - r.start, it->actual_runtime);
  }
}

INSTANTIATE_TEST_SUITE_P(Hand, BackfillScenarioTest, ::testing::ValuesIn(qwait::testing::backfill_scenarios()),
                         [](const auto& info) {
                           std::string n = info.param.name;
                           for (char& c : n) c = std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
                           return n;
                         });

TEST(SimulateBackfill, NarrowJobBackfillsBeforeReservation) {
  const std::vector<SimJob> full = {{"A", 0, 4, 3600, 3600}, {"B", 10, 4, 3600, 3600}, {"C", 20, 1, 600, 600}};
  auto s = starts(simulate_backfill(full, 4));
  EXPECT_EQ(s["B"], 3600);
  EXPECT_EQ(s["C"], 7200);
  const std::vector<SimJob> partial = {{"A", 0, 3, 3600, 3600}, {"B", 10, 4, 3600, 3600}, {"C", 20, 1, 600, 600}};
  s = starts(simulate_backfill(partial, 4));
  EXPECT_EQ(s["B"], 3600);
  EXPECT_EQ(s["C"], 20);
  EXPECT_EQ(starts(simulate_backfill({{"X", 99, 2, 60, 60}}, 4))["X"], 99);
}

TEST(SimulateBackfill, RejectsOversizedAndOverrunningJobs) {
  EXPECT_THROW(simulate_backfill({{"A", 0, 9, 10, 10}}, 8), Error);
  EXPECT_THROW(simulate_backfill({{"A", 0, 1, 10, 11}}, 8), Error);
}

TEST(SimulateBackfill, EmptyWorkload) {
  EXPECT_TRUE(simulate_backfill({}, 8).records.empty());
}

TEST(GenerateWorkload, ZeroRate) {
  WorkloadSpec w;
  w.jobs_per_day = 0;
  EXPECT_TRUE(generate_workload(w).empty());
}

TEST(GenerateWorkload, PoissonCount) {
  WorkloadSpec w;
  w.duration_days = 30;
  w.jobs_per_day = 50;
  w.array_mean_size = 1;
  const auto jobs = generate_workload(w);
  EXPECT_NEAR(static_cast<double>(jobs.size()), 1500.0, 3 * std::sqrt(1500.0));
  EXPECT_EQ(generate_workload(w), jobs);
}

TEST(GenerateWorkload, MeanCountOverSeeds) {
  WorkloadSpec w = qwait::testing::small_world();
  w.duration_days = 7;
  w.jobs_per_day = 200;
  double total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    w.seed = seed;
    total += static_cast<double>(generate_workload(w).size());
  }
  // 20 draws of Poisson(1400): mean within 3 standard errors.
  EXPECT_NEAR(total / 20, 1400.0, 3 * std::sqrt(1400.0 / 20));
}

TEST(GenerateWorkload, AttributesWithinSpec) {
  const WorkloadSpec w = qwait::testing::small_world();
  const auto jobs = generate_workload(w);
  ASSERT_FALSE(jobs.empty());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& j = jobs[i];
    EXPECT_GE(j.nodes, 1);
    EXPECT_LE(j.nodes, 16);
    EXPECT_GE(j.req_wtime, w.wtime_min);
    EXPECT_LE(j.req_wtime, w.wtime_max + w.wtime_granularity);
    EXPECT_EQ(j.req_wtime % w.wtime_granularity, 0);
    EXPECT_GE(j.actual_runtime, 0);
    EXPECT_LE(j.actual_runtime, j.req_wtime);
    EXPECT_GE(j.submit, w.start);
    EXPECT_LT(j.submit, w.start + static_cast<Instant>(w.duration_days * kSecondsPerDay));
    if (i) EXPECT_LE(jobs[i - 1].submit, j.submit);
  }
}

TEST(GenerateWorkload, ArraysShareShape) {
  WorkloadSpec w = qwait::testing::small_world();
  w.array_mean_size = 5;
  const auto jobs = generate_workload(w);
  std::size_t shared = 0;
  for (std::size_t i = 1; i < jobs.size(); ++i) {
    if (jobs[i].submit == jobs[i - 1].submit && jobs[i].nodes == jobs[i - 1].nodes &&
        jobs[i].req_wtime == jobs[i - 1].req_wtime) {
      ++shared;
    }
  }
  // About four of every five jobs follow a sibling.
  EXPECT_NEAR(static_cast<double>(shared) / jobs.size(), 0.8, 0.05);
}

TEST(Simulate, DeterministicAndCapacityRespected) {
  const WorkloadSpec w = qwait::testing::small_world(12);
  const Trace a = simulate(w);
  const Trace b = simulate(w);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].job_id, b.records[i].job_id);
    EXPECT_EQ(a.records[i].start, b.records[i].start);
  }
  EXPECT_LE(peak_usage(a), w.node_capacity);
  EXPECT_EQ(a.node_capacity, w.node_capacity);
  for (const auto& r : a.records) EXPECT_GE(r.start, r.submit);
}

TEST(Simulate, DifferentSeedsDiffer) {
  EXPECT_NE(simulate(qwait::testing::small_world(1)).records.size(),
            simulate(qwait::testing::small_world(2)).records.size());
}

TEST(Simulate, NoJobStartsWhileAnEarlierReservationWouldSlip) {
  // Starting jobs never exceed capacity, and a job that waited could not have
  // started at its submit time without exceeding capacity on its request.
  const Trace t = simulate(qwait::testing::small_world(13));
  EXPECT_LE(peak_usage(t), t.node_capacity);
  std::size_t waited = 0;
  for (const auto& r : t.records) waited += r.wait() > 0;
  EXPECT_GT(waited, 0u);
}

TEST(WorkloadSpecText, RoundTripAndErrors) {
  WorkloadSpec w = qwait::testing::small_world(77);
  w.daily_load_sigma = 0.25;
  w.array_mean_size = 2.5;
  std::stringstream buf;
  write_workload_spec(buf, w);
  EXPECT_EQ(parse_workload_spec(buf), w);

  std::istringstream partial("# comment\nnode_capacity = 32\nsize_classes = [1-2:0.5, 3-8:0.5]\n");
  const auto p = parse_workload_spec(partial);
  EXPECT_EQ(p.node_capacity, 32);
  ASSERT_EQ(p.size_classes.size(), 2u);
  EXPECT_EQ(p.size_classes[1], (SizeClass{3, 8, 0.5}));

  std::istringstream unknown("nodes = 4\n");
  EXPECT_THROW(parse_workload_spec(unknown), ParseError);
  std::istringstream bad("node_capacity = many\n");
  EXPECT_THROW(parse_workload_spec(bad), ParseError);
  std::istringstream inverted("wtime_min = 100\nwtime_max = 50\n");
  EXPECT_THROW(parse_workload_spec(inverted).validate(), Error);
}
