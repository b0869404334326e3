#include "qwait/walldist.hpp"

#include <algorithm>

#include "qwait/error.hpp"
#include "qwait/rng.hpp"

namespace qwait {
namespace {

int ratio_bin(double ratio) {
  return std::min(kRatioBins - 1, static_cast<int>(ratio * kRatioBins));
}

double job_ratio(const JobRecord& r) {
  return std::clamp(static_cast<double>(r.actual()) / static_cast<double>(r.req_wtime), 0.0, 1.0);
}

RatioStratum build_stratum(int lo, int hi, const std::vector<double>& ratios) {
  RatioStratum s;
  s.lo = lo;
  s.hi = hi;
  s.count = ratios.size();
  std::array<std::size_t, kRatioBins> counts{};
  for (double v : ratios) ++counts[ratio_bin(v)];
  std::size_t running = 0;
  for (int i = 0; i < kRatioBins; ++i) {
    s.pdf[i] = static_cast<double>(counts[i]) / static_cast<double>(ratios.size());
    running += counts[i];
    s.cdf[i] = static_cast<double>(running) / static_cast<double>(ratios.size());
  }
  if (std::all_of(ratios.begin(), ratios.end(), [&](double v) { return v == ratios.front(); })) {
    s.point_mass = ratios.front();
  }
  return s;
}

}  // namespace

double RatioStratum::cdf_at(double ratio) const {
  if (ratio <= 0.0) return 0.0;
  if (ratio >= 1.0) return 1.0;
  const int i = ratio_bin(ratio);
  const double below = i == 0 ? 0.0 : cdf[i - 1];
  const double frac = ratio * kRatioBins - i;
  return below + pdf[i] * frac;
}

double RatioStratum::inverse(double u) const {
  if (point_mass) return *point_mass;
  u = std::clamp(u, 0.0, 1.0);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const int i = it == cdf.end() ? kRatioBins - 1 : static_cast<int>(it - cdf.begin());
  const double below = i == 0 ? 0.0 : cdf[i - 1];
  const double frac = pdf[i] > 0.0 ? std::clamp((u - below) / pdf[i], 0.0, 1.0) : 1.0;
  return std::min(1.0, (i + frac) * kRatioBinWidth);
}

WallTimeRatioModel::WallTimeRatioModel(std::vector<RatioStratum> strata) : strata_(std::move(strata)) {
  if (strata_.empty() || strata_.front().lo != 1) throw Error("ratio model strata must start at 1 node");
  for (std::size_t i = 1; i < strata_.size(); ++i) {
    if (strata_[i].lo != strata_[i - 1].hi + 1) throw Error("ratio model strata must be contiguous");
  }
}

WallTimeRatioModel WallTimeRatioModel::fit(std::span<const JobRecord> train,
                                           std::span<const int> stratum_starts) {
  if (train.empty()) throw Error("cannot fit a ratio model on an empty training set");
  if (stratum_starts.empty() || stratum_starts.front() != 1) throw Error("node strata must start at 1");

  struct Range { int lo, hi; std::vector<double> ratios; };
  std::vector<Range> ranges;
  for (std::size_t i = 0; i < stratum_starts.size(); ++i) {
    const int hi = i + 1 < stratum_starts.size() ? stratum_starts[i + 1] - 1 : std::numeric_limits<int>::max();
    ranges.push_back({stratum_starts[i], hi, {}});
  }
  for (const auto& r : train) {
    auto it = std::find_if(ranges.begin(), ranges.end(),
                           [&](const Range& g) { return r.nodes_req >= g.lo && r.nodes_req <= g.hi; });
    it->ratios.push_back(job_ratio(r));
  }
  // Merge sparse strata into the lower neighbour (the upper one for the first).
  bool merged = true;
  while (merged && ranges.size() > 1) {
    merged = false;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      if (ranges[i].ratios.size() >= kMinStratumJobs) continue;
      const std::size_t into = i == 0 ? 1 : i - 1;
      auto& dst = ranges[into];
      dst.lo = std::min(dst.lo, ranges[i].lo);
      dst.hi = std::max(dst.hi, ranges[i].hi);
      dst.ratios.insert(dst.ratios.end(), ranges[i].ratios.begin(), ranges[i].ratios.end());
      ranges.erase(ranges.begin() + static_cast<std::ptrdiff_t>(i));
      merged = true;
      break;
    }
  }
  std::vector<RatioStratum> strata;
  for (auto& g : ranges) strata.push_back(build_stratum(g.lo, g.hi, g.ratios));
  return WallTimeRatioModel(std::move(strata));
}

WallTimeRatioModel WallTimeRatioModel::constant(double ratio) {
  ratio = std::clamp(ratio, 0.0, 1.0);
  return WallTimeRatioModel({build_stratum(1, std::numeric_limits<int>::max(), {ratio})});
}

const RatioStratum& WallTimeRatioModel::stratum_for(int nodes) const {
  if (strata_.empty()) throw Error("ratio model is not fitted");
  nodes = std::max(nodes, 1);
  auto it = std::lower_bound(strata_.begin(), strata_.end(), nodes,
                             [](const RatioStratum& s, int n) { return s.hi < n; });
  return it == strata_.end() ? strata_.back() : *it;
}

WallTimeRatioModel fit_ratio_model(std::span<const JobRecord> train) {
  return WallTimeRatioModel::fit(train);
}

double sample_ratio(const WallTimeRatioModel& model, int nodes, double u) {
  return model.stratum_for(nodes).inverse(u);
}

void sample_state(QueueSnapshot& snap, const WallTimeRatioModel& model, std::uint64_t seed,
                  std::uint64_t state_index) {
  std::uint64_t member = 0;
  for (auto& q : snap.queued) {
    q.runtime_for_features =
        sample_ratio(model, q.nodes_req, keyed_uniform(seed, state_index, member++)) * q.req_wtime;
  }
  for (auto& r : snap.running) {
    r.runtime_for_features =
        sample_ratio(model, r.nodes_req, keyed_uniform(seed, state_index, member++)) * r.req_wtime;
  }
}

StochasticStateSet generate_states(const QueueSnapshot& snap, const WallTimeRatioModel& model,
                                   int states, std::uint64_t seed) {
  if (states < 1) throw Error("state count must be at least 1");
  StochasticStateSet set;
  set.base = snap;
  set.seed = seed;
  set.states.reserve(static_cast<std::size_t>(states));
  for (int s = 0; s < states; ++s) {
    QueueSnapshot state = snap;
    sample_state(state, model, seed, static_cast<std::uint64_t>(s));
    set.states.push_back(std::move(state));
  }
  return set;
}

}  // namespace qwait
