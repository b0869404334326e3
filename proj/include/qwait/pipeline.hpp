#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qwait/models/category.hpp"
#include "qwait/models/gbt.hpp"
#include "qwait/models/knn.hpp"
#include "qwait/models/normalizer.hpp"
#include "qwait/rng.hpp"
#include "qwait/snapshot.hpp"
#include "qwait/trace.hpp"
#include "qwait/walldist.hpp"

namespace qwait {

struct PipelineConfig {
  int states = 100;
  std::uint64_t seed = kDefaultSeed;
  int knn_k = 10;
  double knn_p = 2.0;
  GbtConfig gbt;
  // Widened per-category training sets smaller than this fall back to the
  // global regressor.
  int min_category_jobs = 50;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// Everything needed to predict for one machine.
struct TrainedBundle {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  std::string machine;
  Instant train_begin = 0;
  Instant train_end = 0;
  std::uint64_t train_jobs = 0;
  int node_capacity = 1;
  PipelineConfig config;

  Normalizer normalizer;
  BinBoundaries bins;
  WallTimeRatioModel ratio_model;

  KnnModel knn_basic;     // nodes_req, req_wtime
  KnnModel knn_temporal;  // + day, hour
  KnnModel knn_queue;     // all queue-state features

  // Binary immediate-starter model. Its positive label is the training
  // majority class; `immediate_is_positive` says which one that is.
  GbtEnsemble immediate_model;
  bool immediate_is_positive = false;
  // 7-way waiting-category model over non-immediate jobs.
  GbtEnsemble category_model;
  // regressors[c] was trained on waiting categories {c-1, c, c+1}.
  // regressor_route[c] names the regressor used for category c:
  // c itself, a neighbour standing in for an absent category, or -1 for
  // global_regressor.
  std::array<GbtEnsemble, kWaitingCategories> regressors;
  std::array<int, kWaitingCategories> regressor_route{};
  GbtEnsemble global_regressor;

  std::vector<std::string> warnings;
  // Content hash, assigned after training and checked on load.
  std::string model_version;

  const GbtEnsemble& regressor_for(StartCategory c) const;
  double immediate_probability(std::span<const double> features) const;
};

// Trains all models. Training features use actual runtimes in every
// snapshot; the immediate model sees all training jobs, the category model
// and regressors only non-immediate ones.
TrainedBundle train_bundle(const SplitTrace& split, const Trace& trace, const PipelineConfig& config);

struct StatePrediction {
  StartCategory category = StartCategory::immediate;
  double wait = 0.0;  // seconds

  friend bool operator==(const StatePrediction&, const StatePrediction&) = default;
};

struct PredictionResult {
  double mean_wait = 0.0;
  double std_wait = 0.0;  // population standard deviation over per_state
  double predicted_start = 0.0;
  std::vector<StatePrediction> per_state;
  double immediate_vote_fraction = 0.0;
  bool immediate = false;
  // IMMEDIATE on the immediate path, otherwise the most frequent per-state
  // category (ties to the shorter wait).
  StartCategory category = StartCategory::immediate;
  std::string model_version;

  // Nearest-rank quantile of the per-state waits.
  double quantile(double q) const;

  friend bool operator==(const PredictionResult&, const PredictionResult&) = default;
};

// Feature vectors of `states` sampled copies of `snap` (seeded as in generate_states()).
std::vector<FeatureVector> stochastic_features(const TrainedBundle& bundle, const JobRequest& job,
                                               const QueueSnapshot& snap, int states, std::uint64_t seed);

// The classification -> regression cascade over precomputed state features.
PredictionResult predict_combined_features(const TrainedBundle& bundle, const JobRequest& job,
                                           std::span<const FeatureVector> states);

// Samples bundle.config.states queue states and runs the cascade.
PredictionResult predict_combined(const TrainedBundle& bundle, const JobRequest& job,
                                  const QueueSnapshot& snap, std::uint64_t seed);

enum class BaselineModel { basic, temporal, queue_knn };

std::string_view baseline_name(BaselineModel m);

// basic and temporal ignore the snapshot; queue_knn runs the sampled states
// through the queue-state KNN and throws when `snap` is null.
PredictionResult predict_baseline(const TrainedBundle& bundle, BaselineModel which, const JobRequest& job,
                                  const QueueSnapshot* snap, std::uint64_t seed);
PredictionResult predict_queue_knn_features(const TrainedBundle& bundle, const JobRequest& job,
                                            std::span<const FeatureVector> states);

struct HeatmapCell {
  double mean_wait = 0.0;
  double std_wait = 0.0;

  friend bool operator==(const HeatmapCell&, const HeatmapCell&) = default;
};

struct Heatmap {
  std::vector<int> nodes_grid;
  std::vector<double> wtime_grid;  // seconds
  std::vector<HeatmapCell> cells;  // row-major, nodes x wtime

  const HeatmapCell& cell(std::size_t node_row, std::size_t wtime_col) const {
    return cells[node_row * wtime_grid.size() + wtime_col];
  }
};

// One predict_combined per (nodes, wall time) pair, all with the same seed.
Heatmap heatmap(const TrainedBundle& bundle, const QueueSnapshot& snap, std::span<const int> nodes_grid,
                std::span<const double> wtime_grid, Instant submit, std::uint64_t seed);

}  // namespace qwait
