#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "qwait/snapshot.hpp"
#include "qwait/trace.hpp"

namespace qwait {

inline constexpr int kRatioBins = 50;
inline constexpr double kRatioBinWidth = 1.0 / kRatioBins;
inline constexpr std::size_t kMinStratumJobs = 100;

// Default lower bounds of the node strata {1}, {2-4}, {5-16}, {17-64}, {65-256}, {257+}.
inline constexpr std::array<int, 6> kDefaultStratumStarts = {1, 2, 5, 17, 65, 257};

// Empirical distribution of actual / requested wall time for one node range.
struct RatioStratum {
  int lo = 1;
  int hi = std::numeric_limits<int>::max();  // inclusive
  std::size_t count = 0;
  std::array<double, kRatioBins> pdf{};
  std::array<double, kRatioBins> cdf{};
  // Set when every ratio in the stratum was the same value; sampling then
  // returns it exactly instead of interpolating inside its bin.
  std::optional<double> point_mass;

  // Piecewise-linear CDF implied by the histogram.
  double cdf_at(double ratio) const;
  // Inverse CDF with linear interpolation inside the selected bin.
  double inverse(double u) const;
};

class WallTimeRatioModel {
 public:
  WallTimeRatioModel() = default;
  explicit WallTimeRatioModel(std::vector<RatioStratum> strata);

  // Histograms clamp(actual / req_wtime, 0, 1) per node stratum. Strata with
  // fewer than kMinStratumJobs jobs are merged into a neighbour. Throws on
  // an empty training set.
  static WallTimeRatioModel fit(std::span<const JobRecord> train,
                                std::span<const int> stratum_starts = kDefaultStratumStarts);

  // Every stratum a point mass at `ratio` (test and what-if helper).
  static WallTimeRatioModel constant(double ratio);

  const RatioStratum& stratum_for(int nodes) const;
  const std::vector<RatioStratum>& strata() const { return strata_; }

 private:
  std::vector<RatioStratum> strata_;
};

WallTimeRatioModel fit_ratio_model(std::span<const JobRecord> train);

// Deterministic inverse-transform sample for a job of `nodes` nodes, u in [0, 1).
double sample_ratio(const WallTimeRatioModel& model, int nodes, double u);

struct StochasticStateSet {
  QueueSnapshot base;
  std::vector<QueueSnapshot> states;
  std::uint64_t seed = 0;
};

// S copies of `snap` whose queued and running runtimes are sampled as
// ratio * req_wtime. The variate for (state s, member m) depends only on
// (seed, s, m); queued members are indexed first, then running ones.
StochasticStateSet generate_states(const QueueSnapshot& snap, const WallTimeRatioModel& model,
                                   int states, std::uint64_t seed);

// Applies the sampling of one state in place (used by generate_states).
void sample_state(QueueSnapshot& snap, const WallTimeRatioModel& model, std::uint64_t seed,
                  std::uint64_t state_index);

}  // namespace qwait
