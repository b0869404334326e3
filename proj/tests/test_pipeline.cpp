#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "qwait/bundle_io.hpp"
#include "qwait/error.hpp"
#include "qwait/pipeline.hpp"

using namespace qwait;
using qwait::testing::small_model;

namespace {

// One-split tree: x[feature] <= threshold ? left : right.
RegressionTree stump(int feature, double threshold, double left, double right) {
  RegressionTree t;
  t.nodes = {{feature, threshold, 1, 2, 0}, {-1, 0, -1, -1, left}, {-1, 0, -1, -1, right}};
  return t;
}

GbtEnsemble constant_regressor(double value) {
  GbtEnsemble m;
  m.base_score = {value};
  return m;
}

// Votes immediate when s_r_work <= threshold.
GbtEnsemble immediate_below(double threshold) {
  GbtEnsemble m;
  m.loss = GbtLoss::logistic;
  m.learning_rate = 1.0;
  m.base_score = {0.0};
  m.trees = {stump(static_cast<int>(feature::s_r_work), threshold, 8.0, -8.0)};
  return m;
}

// Predicts the waiting category index stored in feature s_q_jobs.
GbtEnsemble category_from_queue_length() {
  GbtEnsemble m;
  m.loss = GbtLoss::softmax;
  m.num_outputs = kWaitingCategories;
  m.learning_rate = 1.0;
  m.base_score.assign(kWaitingCategories, 0.0);
  for (int c = 0; c < kWaitingCategories; ++c) {
    RegressionTree t;
    t.nodes = {{static_cast<int>(feature::s_q_jobs), c - 0.5, 1, 2, 0},
               {-1, 0, -1, -1, 0.0},
               {static_cast<int>(feature::s_q_jobs), c + 0.5, 3, 4, 0},
               {-1, 0, -1, -1, 10.0},
               {-1, 0, -1, -1, 0.0}};
    m.trees.push_back(t);
  }
  return m;
}

TrainedBundle mock_bundle() {
  TrainedBundle b;
  b.machine = "mock";
  b.immediate_model = immediate_below(59.5);
  b.immediate_is_positive = true;
  b.category_model = category_from_queue_length();
  for (int c = 0; c < kWaitingCategories; ++c) {
    b.regressors[c] = constant_regressor(1000.0 * (c + 1));
    b.regressor_route[c] = c;
  }
  b.global_regressor = constant_regressor(-1);
  b.model_version = "mock";
  return b;
}

std::vector<FeatureVector> states_with_work(std::size_t n, std::size_t immediate_votes) {
  std::vector<FeatureVector> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].fill(0);
    out[i][feature::s_r_work] = i < immediate_votes ? 1.0 : 100.0;
    out[i][feature::s_q_jobs] = static_cast<double>(i % kWaitingCategories);
  }
  return out;
}

}  // namespace

TEST(Cascade, MajorityImmediate) {
  const auto b = mock_bundle();
  const JobRequest job{4, 3600, 1'700'000'000};
  const auto r = predict_combined_features(b, job, states_with_work(100, 60));
  EXPECT_TRUE(r.immediate);
  EXPECT_DOUBLE_EQ(r.immediate_vote_fraction, 0.6);
  EXPECT_EQ(r.predicted_start, 1'700'000'010.0);
  EXPECT_EQ(r.category, StartCategory::immediate);
  EXPECT_EQ(r.mean_wait, 10.0);
  EXPECT_EQ(r.model_version, "mock");
}

TEST(Cascade, TieTakesRegressionPath) {
  const auto b = mock_bundle();
  const auto r = predict_combined_features(b, {1, 60, 0}, states_with_work(100, 50));
  EXPECT_FALSE(r.immediate);
  EXPECT_DOUBLE_EQ(r.immediate_vote_fraction, 0.5);
  ASSERT_EQ(r.per_state.size(), 100u);
}

TEST(Cascade, PerStateRoutingMatchesCategory) {
  const auto b = mock_bundle();
  const auto states = states_with_work(70, 0);
  const auto r = predict_combined_features(b, {1, 60, 500}, states);
  ASSERT_FALSE(r.immediate);
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const int c = static_cast<int>(i % kWaitingCategories);
    EXPECT_EQ(r.per_state[i].category, from_waiting_index(c));
    EXPECT_EQ(r.per_state[i].wait, 1000.0 * (c + 1));
    sum += r.per_state[i].wait;
  }
  const double mean = sum / states.size();
  for (const auto& s : r.per_state) sq += (s.wait - mean) * (s.wait - mean);
  EXPECT_DOUBLE_EQ(r.mean_wait, mean);
  EXPECT_NEAR(r.std_wait, std::sqrt(sq / states.size()), 1e-9);
  EXPECT_DOUBLE_EQ(r.predicted_start, 500 + mean);
}

TEST(Cascade, ConstantRegressorGivesConstantMean) {
  auto b = mock_bundle();
  for (auto& reg : b.regressors) reg = constant_regressor(600);
  b.immediate_model = immediate_below(-1);
  const auto& m = small_model();
  b.bins = m.bundle->bins;
  b.ratio_model = m.bundle->ratio_model;
  for (std::size_t i = 0; i < m.trace.records.size(); i += 997) {
    const auto snap = reconstruct(m.trace, m.trace.records[i].submit);
    const auto r = predict_combined(b, {2, 3600, snap.at}, snap, 7);
    EXPECT_EQ(r.mean_wait, 600);
    EXPECT_EQ(r.std_wait, 0);
  }
}

TEST(Cascade, RoutesThroughGlobalAndNeighbour) {
  auto b = mock_bundle();
  b.regressor_route[0] = -1;
  b.regressor_route[1] = 2;
  std::vector<FeatureVector> states(2);
  for (auto& f : states) f.fill(0);
  states[0][feature::s_r_work] = states[1][feature::s_r_work] = 100;
  states[1][feature::s_q_jobs] = 1;
  const auto r = predict_combined_features(b, {1, 60, 0}, states);
  // The global mock predicts -1, floored at 0.
  EXPECT_EQ(r.per_state[0].wait, 0.0);
  EXPECT_EQ(r.per_state[1].wait, 3000.0);
}

TEST(Cascade, QuantilesAreNearestRank) {
  PredictionResult r;
  for (double w : {50, 10, 40, 20, 30}) r.per_state.push_back({StartCategory::le_1m, w});
  EXPECT_EQ(r.quantile(0.1), 10);
  EXPECT_EQ(r.quantile(0.5), 30);
  EXPECT_EQ(r.quantile(0.9), 50);
  EXPECT_EQ(r.quantile(0.0), 10);
}

TEST(TrainBundle, WidenedRegressorsAndImmediateMajority) {
  const auto& m = small_model();
  const TrainedBundle& b = *m.bundle;
  std::size_t n = m.split.train.size(), immediate = 0;
  for (const auto& r : m.split.train) immediate += categorize(r.wait()) == StartCategory::immediate;
  EXPECT_EQ(b.immediate_is_positive, 2 * immediate > n);
  EXPECT_EQ(b.train_jobs, n);
  EXPECT_EQ(b.knn_queue.size(), n);
  EXPECT_EQ(b.knn_basic.dim(), 2u);
  EXPECT_EQ(b.knn_temporal.dim(), 4u);
  EXPECT_EQ(b.knn_queue.dim(), feature::count);
  EXPECT_FALSE(b.model_version.empty());

  // With no boosting rounds each regressor is the mean wait of its widened set.
  PipelineConfig cfg = qwait::testing::small_config();
  cfg.gbt.n_trees = 0;
  const auto flat = train_bundle(m.split, m.trace, cfg);
  for (int c = 0; c < kWaitingCategories; ++c) {
    double sum = 0;
    std::size_t count = 0;
    for (const auto& r : m.split.train) {
      const auto cat = categorize(r.wait());
      if (cat == StartCategory::immediate || std::abs(waiting_index(cat) - c) > 1) continue;
      sum += r.wait();
      ++count;
    }
    if (flat.regressor_route[c] == c) {
      ASSERT_GE(count, static_cast<std::size_t>(cfg.min_category_jobs));
      EXPECT_NEAR(flat.regressors[c].base_score[0], sum / count, 1e-6 * sum / count) << c;
    }
  }
}

TEST(TrainBundle, NoImmediateStartersDegenerates) {
  // One job at a time, back-to-back 10-minute jobs submitted in bursts.
  std::vector<JobRecord> rs;
  Instant free_at = 1672617600;
  for (int i = 0; i < 600; ++i) {
    const Instant submit = 1672617600 + (i / 6) * 7200 + (i % 6) * (11 + (i / 6) % 13);
    const Instant start = std::max(free_at, submit + 20);
    const Seconds run = 500 + (i * 37) % 100;
    rs.push_back(qwait::testing::rec("j" + std::to_string(i), submit, start, start + run, 1 + (i * 5) % 16, 600 + 60 * (i % 11)));
    free_at = start + run;
  }
  const Trace t = make_trace("flat", rs, 16);
  const auto split = split_every_fifth_day(t);
  ASSERT_FALSE(split.test.empty());
  auto cfg = qwait::testing::small_config();
  cfg.min_category_jobs = 5;
  const auto b = train_bundle(split, t, cfg);
  EXPECT_FALSE(b.immediate_is_positive);
  for (const auto& r : split.test) {
    const auto snap = reconstruct(t, r.submit, r.job_id);
    const auto p = predict_combined(b, {r.nodes_req, double(r.req_wtime), r.submit}, snap, 1);
    EXPECT_FALSE(p.immediate);
    EXPECT_EQ(p.immediate_vote_fraction, 0.0);
  }
}

TEST(TrainBundle, EmptySplitIsAnError) {
  const auto& m = small_model();
  SplitTrace empty;
  EXPECT_THROW(train_bundle(empty, m.trace, qwait::testing::small_config()), Error);
}

TEST(Predict, DeterministicForFixedSeed) {
  const auto& m = small_model();
  const auto& r = m.split.test[m.split.test.size() / 3];
  const auto snap = reconstruct(m.trace, r.submit, r.job_id);
  const JobRequest job{r.nodes_req, double(r.req_wtime), r.submit};
  const auto a = predict_combined(*m.bundle, job, snap, 99);
  const auto b = predict_combined(*m.bundle, job, snap, 99);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.per_state.size(), static_cast<std::size_t>(m.bundle->config.states));
  double sum = 0;
  for (const auto& s : a.per_state) sum += s.wait;
  if (!a.immediate) EXPECT_NEAR(a.mean_wait, sum / a.per_state.size(), 1e-9);
}

TEST(Predict, BasicIgnoresSubmitTime) {
  const auto& b = *small_model().bundle;
  const auto a = predict_baseline(b, BaselineModel::basic, {4, 7200, 1672617600}, nullptr, 1);
  const auto c = predict_baseline(b, BaselineModel::basic, {4, 7200, 1672617600 + 3 * 86400 + 13 * 3600}, nullptr, 1);
  EXPECT_EQ(a.mean_wait, c.mean_wait);
}

TEST(Predict, TemporalVariesWithSubmitHour) {
  const auto& b = *small_model().bundle;
  std::set<double> seen;
  for (int h = 0; h < 24; ++h) {
    seen.insert(predict_baseline(b, BaselineModel::temporal, {8, 7200, 1672617600 + h * 3600}, nullptr, 1).mean_wait);
  }
  EXPECT_GT(seen.size(), 1u);
}

TEST(Predict, QueueKnnNeedsSnapshot) {
  EXPECT_THROW(predict_baseline(*small_model().bundle, BaselineModel::queue_knn, {1, 60, 0}, nullptr, 1), Error);
}

TEST(Predict, QueueKnnSingleStatePointMassIsSingleShot) {
  const auto& m = small_model();
  TrainedBundle b = *m.bundle;
  b.config.states = 1;
  b.ratio_model = WallTimeRatioModel::constant(1.0);
  const auto& r = m.split.test[m.split.test.size() / 2];
  auto snap = reconstruct(m.trace, r.submit, r.job_id);
  for (auto& q : snap.queued) q.runtime_for_features = q.req_wtime;
  for (auto& x : snap.running) x.runtime_for_features = x.req_wtime;
  const JobRequest job{r.nodes_req, double(r.req_wtime), r.submit};
  const auto p = predict_baseline(b, BaselineModel::queue_knn, job, &snap, 3);
  const auto z = b.normalizer.transform(featurize(job, snap, b.bins));
  EXPECT_EQ(p.mean_wait, b.knn_queue.predict(z));
}

TEST(Heatmap, SingleCellMatchesPredictAndIsDeterministic) {
  const auto& m = small_model();
  const auto snap = reconstruct(m.trace, m.split.test.front().submit);
  const std::vector<int> nodes = {8};
  const std::vector<double> wtimes = {5400};
  const auto h = heatmap(*m.bundle, snap, nodes, wtimes, snap.at, 5);
  const auto p = predict_combined(*m.bundle, {8, 5400, snap.at}, snap, 5);
  ASSERT_EQ(h.cells.size(), 1u);
  EXPECT_EQ(h.cell(0, 0).mean_wait, p.mean_wait);
  EXPECT_EQ(h.cell(0, 0).std_wait, p.std_wait);

  const std::vector<int> ng = {1, 4, 16};
  const std::vector<double> wg = {600, 3600};
  const auto a = heatmap(*m.bundle, snap, ng, wg, snap.at, 5);
  const auto c = heatmap(*m.bundle, snap, ng, wg, snap.at, 5);
  EXPECT_EQ(a.cells, c.cells);
  EXPECT_EQ(a.cell(2, 1).mean_wait, predict_combined(*m.bundle, {16, 3600, snap.at}, snap, 5).mean_wait);
  EXPECT_THROW(heatmap(*m.bundle, snap, {}, wg, snap.at, 5), Error);
}

TEST(Bundle, RoundTripPredictsIdentically) {
  const auto& m = small_model();
  const std::string bytes = serialize_bundle(*m.bundle);
  const TrainedBundle back = deserialize_bundle(bytes);
  EXPECT_EQ(back.model_version, m.bundle->model_version);
  EXPECT_EQ(serialize_bundle(back), bytes);
  for (std::size_t i = 0; i < m.split.test.size() && i < 100 * 7; i += 7) {
    const auto& r = m.split.test[i];
    const auto snap = reconstruct(m.trace, r.submit, r.job_id);
    const JobRequest job{r.nodes_req, double(r.req_wtime), r.submit};
    EXPECT_EQ(predict_combined(back, job, snap, i), predict_combined(*m.bundle, job, snap, i));
  }
}

TEST(Bundle, NewerVersionAndCorruption) {
  TrainedBundle b = *small_model().bundle;
  std::string bytes = serialize_bundle(b);
  std::string newer = bytes;
  newer[8] = 2;
  try {
    deserialize_bundle(newer);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "bundle format version 2 is newer than supported version 1");
  }
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  EXPECT_THROW(deserialize_bundle(flipped), Error);
  EXPECT_THROW(deserialize_bundle(bytes.substr(0, bytes.size() - 9)), Error);
  EXPECT_THROW(deserialize_bundle("QWAITBN"), Error);
  EXPECT_THROW(deserialize_bundle(std::string("NOTABNDL") + bytes.substr(8)), Error);
}
