#pragma once

#include <memory>
#include <string>

#include "qwait/pipeline.hpp"
#include "qwait/simworld.hpp"
#include "qwait/trace.hpp"

namespace qwait::testing {

inline JobRecord rec(std::string id, Instant submit, Instant start, Instant end, int nodes = 1,
                     Seconds req = 3600) {
  return {std::move(id), submit, start, end, nodes, req, "standard"};
}

// A few thousand jobs on a 64-node machine over ten days.
inline WorkloadSpec small_world(std::uint64_t seed = 5) {
  WorkloadSpec w;
  w.machine = "small";
  w.duration_days = 10;
  w.node_capacity = 64;
  w.jobs_per_day = 1000;
  w.array_mean_size = 1;
  w.size_classes = {{1, 1, 0.5}, {2, 4, 0.3}, {5, 16, 0.2}};
  w.wtime_min = 600;
  w.wtime_max = 6 * 3600;
  w.seed = seed;
  return w;
}

inline PipelineConfig small_config() {
  PipelineConfig c;
  c.states = 16;
  c.gbt.n_trees = 25;
  c.gbt.max_depth = 4;
  c.min_category_jobs = 30;
  return c;
}

struct SmallModel {
  Trace trace;
  SplitTrace split;
  std::shared_ptr<const TrainedBundle> bundle;
};

// Trained once per test binary.
inline const SmallModel& small_model() {
  static const SmallModel model = [] {
    SmallModel m;
    m.trace = simulate(small_world());
    m.split = split_every_fifth_day(m.trace);
    m.bundle = std::make_shared<const TrainedBundle>(train_bundle(m.split, m.trace, small_config()));
    return m;
  }();
  return model;
}

}  // namespace qwait::testing
