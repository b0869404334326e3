#include "qwait/snapshot.hpp"

#include <algorithm>
#include <set>

#include "qwait/error.hpp"

namespace qwait {
namespace {

constexpr double kHour = 3600.0;

bool is_queued(const JobRecord& r, Instant at) { return r.submit <= at && at < r.start; }
bool is_running(const JobRecord& r, Instant at) { return r.start <= at && at < r.end; }

void add_member(QueueSnapshot& snap, const JobRecord& r) {
  if (is_queued(r, snap.at)) {
    snap.queued.push_back({r.nodes_req, static_cast<double>(r.req_wtime), r.submit,
                           static_cast<double>(r.actual())});
  } else if (is_running(r, snap.at)) {
    snap.running.push_back({r.nodes_req, static_cast<double>(r.req_wtime), r.start,
                            static_cast<double>(r.actual())});
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace

double RunningJob::remaining(Instant at) const {
  return std::max(0.0, runtime_for_features - static_cast<double>(at - started_at));
}

QueueSnapshot reconstruct(const Trace& trace, Instant at, std::string_view exclude) {
  QueueSnapshot snap;
  snap.at = at;
  for (const auto& r : trace.records) {
    if (r.submit > at) break;
    if (!exclude.empty() && r.job_id == exclude) continue;
    add_member(snap, r);
  }
  return snap;
}

SnapshotCursor::SnapshotCursor(const Trace& trace) : trace_(&trace) {}

QueueSnapshot SnapshotCursor::advance_to(Instant at, std::string_view exclude) {
  if (started_ && at < last_) throw Error("SnapshotCursor instants must be non-decreasing");
  started_ = true;
  last_ = at;
  const auto& recs = trace_->records;
  while (next_ < recs.size() && recs[next_].submit <= at) active_.push_back(next_++);
  std::erase_if(active_, [&](std::size_t i) { return recs[i].end <= at; });

  QueueSnapshot snap;
  snap.at = at;
  for (std::size_t i : active_) {
    if (!exclude.empty() && recs[i].job_id == exclude) continue;
    add_member(snap, recs[i]);
  }
  return snap;
}

std::string_view family_name(HistFamily f) {
  switch (f) {
    case HistFamily::q_nodes: return "q_nodes";
    case HistFamily::q_work: return "q_work";
    case HistFamily::q_wait: return "q_wait";
    case HistFamily::r_nodes: return "r_nodes";
    case HistFamily::r_work: return "r_work";
    case HistFamily::r_remain: return "r_remain";
  }
  return "?";
}

std::size_t BinBoundaries::bin_of(HistFamily family, double value) const {
  const auto& e = edges[static_cast<std::size_t>(family)];
  return static_cast<std::size_t>(std::lower_bound(e.begin(), e.end(), value) - e.begin());
}

std::array<double, kHistEdges> equal_count_edges(std::vector<double> pooled, std::string_view family) {
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> distinct;
  for (double v : pooled) {
    if (distinct.empty() || distinct.back() != v) distinct.push_back(v);
  }
  if (distinct.size() < kHistBins) {
    throw Error("bin calibration for " + std::string(family) + " needs at least 8 distinct values, got " +
                std::to_string(distinct.size()));
  }
  const std::size_t n = pooled.size();
  const std::size_t d = distinct.size();
  std::array<double, kHistEdges> edges{};
  std::size_t prev = 0;
  for (std::size_t j = 0; j < kHistEdges; ++j) {
    // Nearest rank: the ceil(q n)-th smallest value.
    const std::size_t rank = ((j + 1) * n + kHistBins - 1) / kHistBins;
    const double q = pooled[rank - 1];
    std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(distinct.begin(), distinct.end(), q) - distinct.begin());
    if (j > 0) idx = std::max(idx, prev + 1);
    idx = std::min(idx, d - kHistEdges + j);
    edges[j] = distinct[idx];
    prev = idx;
  }
  return edges;
}

void append_family_values(const QueueSnapshot& snap, HistFamily family, std::vector<double>& out) {
  switch (family) {
    case HistFamily::q_nodes:
      for (const auto& q : snap.queued) out.push_back(q.nodes_req);
      break;
    case HistFamily::q_work:
      for (const auto& q : snap.queued) out.push_back(q.nodes_req * q.runtime_for_features / kHour);
      break;
    case HistFamily::q_wait:
      for (const auto& q : snap.queued) out.push_back(static_cast<double>(snap.at - q.queued_since) / kHour);
      break;
    case HistFamily::r_nodes:
      for (const auto& r : snap.running) out.push_back(r.nodes_req);
      break;
    case HistFamily::r_work:
      for (const auto& r : snap.running) out.push_back(r.nodes_req * r.remaining(snap.at) / kHour);
      break;
    case HistFamily::r_remain:
      for (const auto& r : snap.running) out.push_back(r.remaining(snap.at) / kHour);
      break;
  }
}

BinBoundaries calibrate_bins(std::span<const JobRecord> train, const Trace& trace) {
  if (train.empty()) throw Error("bin calibration needs training jobs");
  // Training jobs in submit order so one forward sweep serves them all.
  std::vector<const JobRecord*> order;
  order.reserve(train.size());
  for (const auto& r : train) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const JobRecord* a, const JobRecord* b) { return a->submit < b->submit; });

  BinBoundaries bins;
  // One family at a time keeps the pooled population bounded.
  for (std::size_t f = 0; f < kHistFamilies; ++f) {
    const auto family = static_cast<HistFamily>(f);
    std::vector<double> pooled;
    SnapshotCursor cursor(trace);
    for (const JobRecord* r : order) {
      append_family_values(cursor.advance_to(r->submit, r->job_id), family, pooled);
    }
    bins.edges[f] = equal_count_edges(std::move(pooled), family_name(family));
  }
  return bins;
}

std::string feature_name(std::size_t i) {
  using namespace feature;
  struct Group { std::size_t begin; const char* name; bool hist; };
  static constexpr Group groups[] = {
      {nodes_req, "nodes_req", false}, {req_wtime, "req_wtime", false}, {day, "day", false},
      {hour, "hour", false},           {s_q_jobs, "s_q_jobs", false},   {s_q_nodes, "s_q_nodes", false},
      {s_q_work, "s_q_work", false},   {m_q_wait, "m_q_wait", false},   {d_q_nodes, "d_q_nodes", true},
      {d_q_work, "d_q_work", true},    {d_q_wait, "d_q_wait", true},    {s_r_jobs, "s_r_jobs", false},
      {s_r_nodes, "s_r_nodes", false}, {s_r_work, "s_r_work", false},   {d_r_nodes, "d_r_nodes", true},
      {d_r_work, "d_r_work", true},    {d_r_remain, "d_r_remain", true}};
  for (const auto& g : groups) {
    if (!g.hist && i == g.begin) return g.name;
    if (g.hist && i >= g.begin && i < g.begin + kHistBins) {
      return std::string(g.name) + "[" + std::to_string(i - g.begin) + "]";
    }
  }
  throw Error("feature index out of range: " + std::to_string(i));
}

FeatureVector featurize(const JobRequest& job, const QueueSnapshot& snap, const BinBoundaries& bins) {
  using namespace feature;
  FeatureVector f{};
  f[nodes_req] = job.nodes_req;
  f[feature::req_wtime] = job.req_wtime / kHour;
  f[day] = day_of_week(job.submit);
  f[hour] = hour_of_day(job.submit);

  std::vector<double> waits;
  waits.reserve(snap.queued.size());
  f[s_q_jobs] = static_cast<double>(snap.queued.size());
  for (const auto& q : snap.queued) {
    const double work = q.nodes_req * q.runtime_for_features / kHour;
    const double waited = static_cast<double>(snap.at - q.queued_since) / kHour;
    f[s_q_nodes] += q.nodes_req;
    f[s_q_work] += work;
    waits.push_back(waited);
    f[d_q_nodes + bins.bin_of(HistFamily::q_nodes, q.nodes_req)] += 1;
    f[d_q_work + bins.bin_of(HistFamily::q_work, work)] += 1;
    f[d_q_wait + bins.bin_of(HistFamily::q_wait, waited)] += 1;
  }
  f[m_q_wait] = median(std::move(waits));

  f[s_r_jobs] = static_cast<double>(snap.running.size());
  for (const auto& r : snap.running) {
    const double remain = r.remaining(snap.at) / kHour;
    const double work = r.nodes_req * r.remaining(snap.at) / kHour;
    f[s_r_nodes] += r.nodes_req;
    f[s_r_work] += work;
    f[d_r_nodes + bins.bin_of(HistFamily::r_nodes, r.nodes_req)] += 1;
    f[d_r_work + bins.bin_of(HistFamily::r_work, work)] += 1;
    f[d_r_remain + bins.bin_of(HistFamily::r_remain, remain)] += 1;
  }
  return f;
}

}  // namespace qwait
