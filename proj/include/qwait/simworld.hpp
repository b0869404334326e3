#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qwait/rng.hpp"
#include "qwait/time.hpp"
#include "qwait/trace.hpp"

namespace qwait {

// Node counts drawn log-uniformly from [lo, hi].
struct SizeClass {
  int lo = 1;
  int hi = 1;
  double weight = 1.0;

  friend bool operator==(const SizeClass&, const SizeClass&) = default;
};

struct WorkloadSpec {
  std::string machine = "sim";
  Instant start = 1672617600;  // Monday 2023-01-02 00:00 UTC
  double duration_days = 30.0;
  int node_capacity = 512;
  // Mean arrivals per day; the instantaneous rate is
  // jobs_per_day * hour_weight * weekday_weight with both weight sets
  // rescaled to mean 1.
  double jobs_per_day = 1575.0;
  std::array<double, 24> hour_weights;
  std::array<double, 7> weekday_weights;  // Monday first
  // Each calendar day's rate is further multiplied by an independent
  // log-normal factor exp(sigma * z - sigma^2 / 2), so busy and quiet days
  // are not predictable from the calendar alone. 0 disables it.
  double daily_load_sigma = 0.0;
  // Jobs arrive in arrays of geometrically distributed size with this mean,
  // sharing submit time, node count and requested wall time. 1 disables it.
  double array_mean_size = 3.0;
  std::vector<SizeClass> size_classes;
  // Requested wall time: log-uniform in [wtime_min, wtime_max] seconds,
  // rounded up to a multiple of wtime_granularity.
  Seconds wtime_min = 300;
  Seconds wtime_max = 24 * 3600;
  Seconds wtime_granularity = 300;
  // actual / requested follows Kumaraswamy(ratio_a, ratio_b) on [0, 1].
  double ratio_a = 1.0;
  double ratio_b = 5.67;
  std::uint64_t seed = kDefaultSeed;

  WorkloadSpec();
  // Throws Error on a non-positive weight, inverted range or similar.
  void validate() const;

  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

struct SimJob {
  std::string job_id;
  Instant submit = 0;
  int nodes = 1;
  Seconds req_wtime = 1;
  Seconds actual_runtime = 0;

  friend bool operator==(const SimJob&, const SimJob&) = default;
};

// Inhomogeneous Poisson arrivals by thinning, sorted by submit. Ids are
// "j" plus a zero-padded sequence number.
std::vector<SimJob> generate_workload(const WorkloadSpec& spec);

// FCFS with conservative backfill. At every event batch the queue is walked
// in (submit, id) order and each job is given the earliest slot in the
// requested-wall-time availability profile that does not disturb the
// reservations of the jobs ahead of it; jobs whose slot is now start.
// Events at the same instant are applied finish, submit, then schedule.
// Throws Error when a job needs more than node_capacity nodes.
Trace simulate_backfill(std::vector<SimJob> jobs, int node_capacity, std::string machine = "sim");

Trace simulate(const WorkloadSpec& spec);

// "key = value" lines, '#' comments, optional quotes and [brackets] around
// lists. Keys mirror WorkloadSpec fields; size_classes is a list of
// "lo-hi:weight" items. Throws ParseError on an unknown key or bad value.
WorkloadSpec parse_workload_spec(std::istream& in);
WorkloadSpec load_workload_spec(const std::filesystem::path& path);
void write_workload_spec(std::ostream& out, const WorkloadSpec& spec);

}  // namespace qwait
