#include "qwait/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parallel.hpp"
#include "qwait/bundle_io.hpp"
#include "qwait/error.hpp"

namespace qwait {
namespace {

constexpr std::size_t kBasicFeatures = 2;
constexpr std::size_t kTemporalFeatures = 4;

GbtEnsemble fit_or_constant(const Matrix& x, std::span<const double> y, GbtLoss loss, GbtConfig cfg) {
  if (x.rows() < 2 * static_cast<std::size_t>(std::max(cfg.min_leaf, 1))) cfg.n_trees = 0;
  return gbt_fit(x, y, loss, cfg);
}

// Uniform softmax over the waiting categories, for training sets without
// any non-immediate job.
GbtEnsemble uniform_category_model(const GbtConfig& cfg) {
  GbtEnsemble m;
  m.loss = GbtLoss::softmax;
  m.num_outputs = kWaitingCategories;
  m.learning_rate = cfg.learning_rate;
  m.max_depth = cfg.max_depth;
  m.min_leaf = cfg.min_leaf;
  m.reg_lambda = cfg.reg_lambda;
  m.base_score.assign(kWaitingCategories, 0.0);
  return m;
}

GbtEnsemble zero_regressor(const GbtConfig& cfg) {
  GbtEnsemble m;
  m.learning_rate = cfg.learning_rate;
  m.max_depth = cfg.max_depth;
  m.min_leaf = cfg.min_leaf;
  m.reg_lambda = cfg.reg_lambda;
  return m;
}

void summarize(PredictionResult& r) {
  const double n = static_cast<double>(r.per_state.size());
  double sum = 0.0;
  for (const auto& s : r.per_state) sum += s.wait;
  r.mean_wait = sum / n;
  double ss = 0.0;
  for (const auto& s : r.per_state) ss += (s.wait - r.mean_wait) * (s.wait - r.mean_wait);
  r.std_wait = std::sqrt(ss / n);
}

StartCategory modal_category(std::span<const StatePrediction> states) {
  std::array<int, kCategoryCount> counts{};
  for (const auto& s : states) ++counts[static_cast<std::size_t>(s.category)];
  return static_cast<StartCategory>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

const GbtEnsemble& TrainedBundle::regressor_for(StartCategory c) const {
  const int route = regressor_route.at(static_cast<std::size_t>(waiting_index(c)));
  return route < 0 ? global_regressor : regressors.at(static_cast<std::size_t>(route));
}

double TrainedBundle::immediate_probability(std::span<const double> features) const {
  const double p = immediate_model.predict_probability(features);
  return immediate_is_positive ? p : 1.0 - p;
}

TrainedBundle train_bundle(const SplitTrace& split, const Trace& trace, const PipelineConfig& config) {
  if (split.train.empty()) throw Error("training split is empty");
  if (config.states < 1) throw Error("state count must be at least 1");

  TrainedBundle b;
  b.machine = trace.machine_name;
  b.node_capacity = trace.node_capacity;
  b.config = config;
  b.train_jobs = split.train.size();
  b.train_begin = split.train.front().submit;
  b.train_end = split.train.front().submit;
  for (const auto& r : split.train) {
    b.train_begin = std::min(b.train_begin, r.submit);
    b.train_end = std::max(b.train_end, r.submit);
  }

  b.ratio_model = fit_ratio_model(split.train);
  b.bins = calibrate_bins(split.train, trace);

  std::vector<const JobRecord*> order;
  for (const auto& r : split.train) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const JobRecord* a, const JobRecord* c) { return a->submit < c->submit; });

  const std::size_t n = order.size();
  Matrix features(n, feature::count);
  std::vector<double> waits(n);
  SnapshotCursor cursor(trace);
  for (std::size_t i = 0; i < n; ++i) {
    const JobRecord& r = *order[i];
    const auto snap = cursor.advance_to(r.submit, r.job_id);
    const JobRequest req{r.nodes_req, static_cast<double>(r.req_wtime), r.submit};
    const auto f = featurize(req, snap, b.bins);
    std::copy(f.begin(), f.end(), features.row(i).begin());
    waits[i] = static_cast<double>(r.wait());
  }

  b.normalizer = fit_normalizer(features);
  const Matrix normalized = b.normalizer.transform(features);
  b.knn_basic = KnnModel(normalized.leading_cols(kBasicFeatures), waits, config.knn_k, config.knn_p);
  b.knn_temporal = KnnModel(normalized.leading_cols(kTemporalFeatures), waits, config.knn_k, config.knn_p);
  b.knn_queue = KnnModel(normalized, waits, config.knn_k, config.knn_p);

  // Immediate starters, with the majority class as the positive label.
  std::vector<StartCategory> cats(n);
  std::size_t immediate_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cats[i] = categorize(waits[i]);
    immediate_count += cats[i] == StartCategory::immediate;
  }
  b.immediate_is_positive = 2 * immediate_count > n;
  std::vector<double> binary(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool imm = cats[i] == StartCategory::immediate;
    binary[i] = (imm == b.immediate_is_positive) ? 1.0 : 0.0;
  }
  b.immediate_model = fit_or_constant(features, binary, GbtLoss::logistic, config.gbt);

  // Waiting jobs only from here on.
  std::vector<std::size_t> waiting;
  for (std::size_t i = 0; i < n; ++i) {
    if (cats[i] != StartCategory::immediate) waiting.push_back(i);
  }
  const Matrix wx = features.select_rows(waiting);
  std::vector<double> wy, wlabel;
  std::vector<int> widx;
  for (std::size_t i : waiting) {
    wy.push_back(waits[i]);
    widx.push_back(waiting_index(cats[i]));
    wlabel.push_back(widx.back());
  }

  GbtConfig cat_cfg = config.gbt;
  cat_cfg.num_class = kWaitingCategories;
  b.category_model = waiting.empty() ? uniform_category_model(cat_cfg)
                                     : fit_or_constant(wx, wlabel, GbtLoss::softmax, cat_cfg);
  b.global_regressor = waiting.empty() ? zero_regressor(config.gbt)
                                       : fit_or_constant(wx, wy, GbtLoss::squared_error, config.gbt);

  std::array<std::size_t, kWaitingCategories> home{};
  for (int c : widx) ++home[static_cast<std::size_t>(c)];
  for (int c = 0; c < kWaitingCategories; ++c) {
    const auto cs = static_cast<std::size_t>(c);
    b.regressors[cs] = zero_regressor(config.gbt);
    if (home[cs] == 0) {
      b.regressor_route[cs] = -2;  // resolved below
      continue;
    }
    std::vector<std::size_t> rows;
    for (std::size_t j = 0; j < widx.size(); ++j) {
      if (std::abs(widx[j] - c) <= 1) rows.push_back(j);
    }
    const auto code = std::string(category_code(from_waiting_index(c)));
    if (rows.size() < static_cast<std::size_t>(config.min_category_jobs)) {
      b.regressor_route[cs] = -1;
      b.warnings.push_back("category " + code + ": " + std::to_string(rows.size()) +
                           " training jobs after widening, using the global regressor");
      continue;
    }
    const Matrix cx = wx.select_rows(rows);
    std::vector<double> cy;
    for (std::size_t j : rows) cy.push_back(wy[j]);
    b.regressors[cs] = fit_or_constant(cx, cy, GbtLoss::squared_error, config.gbt);
    b.regressor_route[cs] = c;
  }
  for (int c = 0; c < kWaitingCategories; ++c) {
    auto& route = b.regressor_route[static_cast<std::size_t>(c)];
    if (route != -2) continue;
    route = -1;
    for (int d = 1; d < kWaitingCategories && route == -1; ++d) {
      for (int nb : {c - d, c + d}) {
        if (nb >= 0 && nb < kWaitingCategories && b.regressor_route[static_cast<std::size_t>(nb)] == nb) {
          route = nb;
          break;
        }
      }
    }
    b.warnings.push_back("category " + std::string(category_code(from_waiting_index(c))) +
                         ": no training jobs, routed to " +
                         (route < 0 ? std::string("the global regressor")
                                    : std::string(category_code(from_waiting_index(route)))));
  }

  b.model_version = compute_model_version(b);
  return b;
}

double PredictionResult::quantile(double q) const {
  if (per_state.empty()) return 0.0;
  std::vector<double> w;
  w.reserve(per_state.size());
  for (const auto& s : per_state) w.push_back(s.wait);
  std::sort(w.begin(), w.end());
  const auto rank = static_cast<std::size_t>(std::ceil(std::clamp(q, 0.0, 1.0) * static_cast<double>(w.size())));
  return w[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<FeatureVector> stochastic_features(const TrainedBundle& bundle, const JobRequest& job,
                                               const QueueSnapshot& snap, int states, std::uint64_t seed) {
  if (states < 1) throw Error("state count must be at least 1");
  std::vector<FeatureVector> out;
  out.reserve(static_cast<std::size_t>(states));
  QueueSnapshot scratch = snap;
  for (int s = 0; s < states; ++s) {
    sample_state(scratch, bundle.ratio_model, seed, static_cast<std::uint64_t>(s));
    out.push_back(featurize(job, scratch, bundle.bins));
  }
  return out;
}

PredictionResult predict_combined_features(const TrainedBundle& bundle, const JobRequest& job,
                                           std::span<const FeatureVector> states) {
  if (states.empty()) throw Error("prediction needs at least one queue state");
  PredictionResult r;
  r.model_version = bundle.model_version;

  std::size_t votes = 0;
  for (const auto& f : states) votes += bundle.immediate_probability(f) > 0.5;
  r.immediate_vote_fraction = static_cast<double>(votes) / static_cast<double>(states.size());
  // A tie goes to the regression path.
  r.immediate = 2 * votes > states.size();

  r.per_state.reserve(states.size());
  if (r.immediate) {
    r.per_state.assign(states.size(), {StartCategory::immediate, kImmediateStartDelay});
    r.mean_wait = kImmediateStartDelay;
    r.std_wait = 0.0;
    r.category = StartCategory::immediate;
    r.predicted_start = static_cast<double>(job.submit) + kImmediateStartDelay;
    return r;
  }
  for (const auto& f : states) {
    const auto cat = from_waiting_index(bundle.category_model.predict_class(f));
    const double wait = std::max(0.0, bundle.regressor_for(cat).predict_value(f));
    r.per_state.push_back({cat, wait});
  }
  summarize(r);
  r.category = modal_category(r.per_state);
  r.predicted_start = static_cast<double>(job.submit) + r.mean_wait;
  return r;
}

PredictionResult predict_combined(const TrainedBundle& bundle, const JobRequest& job,
                                  const QueueSnapshot& snap, std::uint64_t seed) {
  const auto feats = stochastic_features(bundle, job, snap, bundle.config.states, seed);
  return predict_combined_features(bundle, job, feats);
}

std::string_view baseline_name(BaselineModel m) {
  switch (m) {
    case BaselineModel::basic: return "basic";
    case BaselineModel::temporal: return "temporal";
    case BaselineModel::queue_knn: return "queue_knn";
  }
  return "?";
}

PredictionResult predict_queue_knn_features(const TrainedBundle& bundle, const JobRequest& job,
                                            std::span<const FeatureVector> states) {
  if (states.empty()) throw Error("prediction needs at least one queue state");
  PredictionResult r;
  r.model_version = bundle.model_version;
  std::vector<double> z(feature::count);
  for (const auto& f : states) {
    bundle.normalizer.transform(f, z);
    const double wait = bundle.knn_queue.predict(z);
    r.per_state.push_back({categorize(wait), wait});
  }
  summarize(r);
  r.category = modal_category(r.per_state);
  r.predicted_start = static_cast<double>(job.submit) + r.mean_wait;
  return r;
}

PredictionResult predict_baseline(const TrainedBundle& bundle, BaselineModel which, const JobRequest& job,
                                  const QueueSnapshot* snap, std::uint64_t seed) {
  if (which == BaselineModel::queue_knn) {
    if (snap == nullptr) throw Error("queue_knn prediction needs a queue snapshot");
    return predict_queue_knn_features(bundle, job,
                                      stochastic_features(bundle, job, *snap, bundle.config.states, seed));
  }
  // nodes/wall time (and day/hour) are the leading features; the queue part
  // of the vector is irrelevant here.
  const FeatureVector f = featurize(job, QueueSnapshot{job.submit, {}, {}}, bundle.bins);
  const KnnModel& knn = which == BaselineModel::basic ? bundle.knn_basic : bundle.knn_temporal;
  std::vector<double> z(knn.dim());
  bundle.normalizer.transform(f, z);
  PredictionResult r;
  r.model_version = bundle.model_version;
  const double wait = knn.predict(z);
  r.per_state.push_back({categorize(wait), wait});
  summarize(r);
  r.category = r.per_state.front().category;
  r.predicted_start = static_cast<double>(job.submit) + r.mean_wait;
  return r;
}

Heatmap heatmap(const TrainedBundle& bundle, const QueueSnapshot& snap, std::span<const int> nodes_grid,
                std::span<const double> wtime_grid, Instant submit, std::uint64_t seed) {
  if (nodes_grid.empty() || wtime_grid.empty()) throw Error("heatmap grids must be non-empty");
  Heatmap h;
  h.nodes_grid.assign(nodes_grid.begin(), nodes_grid.end());
  h.wtime_grid.assign(wtime_grid.begin(), wtime_grid.end());
  h.cells.resize(nodes_grid.size() * wtime_grid.size());
  detail::parallel_for(h.cells.size(), [&](std::size_t idx) {
    const JobRequest job{nodes_grid[idx / wtime_grid.size()], wtime_grid[idx % wtime_grid.size()], submit};
    const auto r = predict_combined(bundle, job, snap, seed);
    h.cells[idx] = {r.mean_wait, r.std_wait};
  });
  return h;
}

}  // namespace qwait
