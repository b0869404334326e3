#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qwait/time.hpp"
#include "qwait/trace.hpp"

namespace qwait {

struct QueuedJob {
  int nodes_req = 1;
  double req_wtime = 0;  // seconds
  Instant queued_since = 0;
  // Runtime used for work features, in seconds.
  double runtime_for_features = 0;
};

struct RunningJob {
  int nodes_req = 1;
  double req_wtime = 0;  // seconds
  Instant started_at = 0;
  double runtime_for_features = 0;

  double remaining(Instant at) const;  // seconds, floored at 0
};

// Queued and running jobs at one instant.
struct QueueSnapshot {
  Instant at = 0;
  std::vector<QueuedJob> queued;
  std::vector<RunningJob> running;
};

// The job whose wait is being predicted.
struct JobRequest {
  int nodes_req = 1;
  double req_wtime = 0;  // seconds
  Instant submit = 0;
};

// Queued = submit <= at < start, running = start <= at < end, the job with id
// `exclude` omitted. runtime_for_features is set to each job's actual runtime;
// prediction paths overwrite it with sampled runtimes.
QueueSnapshot reconstruct(const Trace& trace, Instant at, std::string_view exclude = {});

// Produces the same snapshots as reconstruct() for a non-decreasing sequence
// of instants in O(active jobs) per query.
class SnapshotCursor {
 public:
  explicit SnapshotCursor(const Trace& trace);

  QueueSnapshot advance_to(Instant at, std::string_view exclude = {});

 private:
  const Trace* trace_;
  std::size_t next_ = 0;
  std::vector<std::size_t> active_;  // submitted and not ended, ascending record index
  Instant last_ = 0;
  bool started_ = false;
};

// Histogram feature families, in feature-vector order.
enum class HistFamily : int { q_nodes = 0, q_work, q_wait, r_nodes, r_work, r_remain };
inline constexpr std::size_t kHistFamilies = 6;
inline constexpr std::size_t kHistBins = 8;
inline constexpr std::size_t kHistEdges = kHistBins - 1;

std::string_view family_name(HistFamily f);

// Seven ascending interior edges per family. Bin 0 is (-inf, e0], bin i is
// (e[i-1], e[i]], bin 7 is (e6, inf).
struct BinBoundaries {
  std::array<std::array<double, kHistEdges>, kHistFamilies> edges{};

  std::size_t bin_of(HistFamily family, double value) const;
};

// Equal-count edges at the nearest-rank 1/8..7/8 quantiles of `pooled`.
// Duplicate edges are moved to the next distinct value (or the previous one
// where no larger value remains). Throws Error naming `family` when fewer than
// eight distinct values are present.
std::array<double, kHistEdges> equal_count_edges(std::vector<double> pooled, std::string_view family);

// Per-family member values of one snapshot (work in node-hours, times in hours).
void append_family_values(const QueueSnapshot& snap, HistFamily family, std::vector<double>& out);

// Pools each family over the submit-time snapshots of every training job
// (actual runtimes) and derives equal-count edges.
BinBoundaries calibrate_bins(std::span<const JobRecord> train, const Trace& trace);

// Feature layout. Times are hours, work is node-hours.
namespace feature {
inline constexpr std::size_t nodes_req = 0;
inline constexpr std::size_t req_wtime = 1;
inline constexpr std::size_t day = 2;
inline constexpr std::size_t hour = 3;
inline constexpr std::size_t s_q_jobs = 4;
inline constexpr std::size_t s_q_nodes = 5;
inline constexpr std::size_t s_q_work = 6;
inline constexpr std::size_t m_q_wait = 7;
inline constexpr std::size_t d_q_nodes = 8;
inline constexpr std::size_t d_q_work = 16;
inline constexpr std::size_t d_q_wait = 24;
inline constexpr std::size_t s_r_jobs = 32;
inline constexpr std::size_t s_r_nodes = 33;
inline constexpr std::size_t s_r_work = 34;
inline constexpr std::size_t d_r_nodes = 35;
inline constexpr std::size_t d_r_work = 43;
inline constexpr std::size_t d_r_remain = 51;
inline constexpr std::size_t count = 59;
}  // namespace feature

using FeatureVector = std::array<double, feature::count>;

std::string feature_name(std::size_t index);

FeatureVector featurize(const JobRequest& job, const QueueSnapshot& snap, const BinBoundaries& bins);

}  // namespace qwait
