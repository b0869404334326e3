#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "metric_fuzz.hpp"
#include "qwait/error.hpp"
#include "qwait/eval.hpp"

using namespace qwait;
using qwait::testing::small_model;

namespace {

std::vector<StartPair> pairs_with_errors(std::initializer_list<double> errors) {
  std::vector<StartPair> out;
  double t = 1000;
  for (double e : errors) {
    out.push_back({t + e, t});
    t += 77;
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(WindowAccuracy, HandCount) {
  const auto w = window_accuracy(pairs_with_errors({30, -90, 600}));
  EXPECT_EQ(w.count, 3u);
  EXPECT_DOUBLE_EQ(w.fraction[0], 1.0 / 3);
  EXPECT_DOUBLE_EQ(w.fraction[1], 2.0 / 3);
  EXPECT_DOUBLE_EQ(w.fraction[2], 1.0);
}

TEST(WindowAccuracy, ExactAndEmpty) {
  const auto w = window_accuracy(pairs_with_errors({0, 0}));
  for (double f : w.fraction) EXPECT_EQ(f, 1.0);
  EXPECT_THROW(window_accuracy({}), Error);
}

TEST(WindowAccuracy, Labels) {
  EXPECT_EQ(window_label(0), "1 minute");
  EXPECT_EQ(window_label(1), "5 minutes");
  EXPECT_EQ(window_label(4), "1 hour");
  EXPECT_EQ(window_label(8), "24 hours");
}

TEST(CategoryAccuracy, ExactAndRelaxed) {
  using C = StartCategory;
  const std::vector<CategoryPair> pairs = {{C::le_5m, C::le_10m}, {C::le_1m, C::le_30m}, {C::le_10m, C::le_10m},
                                           {C::immediate, C::immediate}, {C::immediate, C::le_1m}};
  const auto t = category_accuracy(pairs);
  const auto& row = t.waiting[waiting_index(C::le_10m)];
  EXPECT_EQ(row.count, 2u);
  EXPECT_DOUBLE_EQ(row.exact, 0.5);
  EXPECT_DOUBLE_EQ(row.relaxed, 1.0);
  const auto& far = t.waiting[waiting_index(C::le_30m)];
  EXPECT_EQ(far.count, 1u);
  EXPECT_EQ(far.exact, 0.0);
  EXPECT_EQ(far.relaxed, 0.0);
  // An immediate prediction is never a near miss for a waiting job.
  const auto& short_wait = t.waiting[waiting_index(C::le_1m)];
  EXPECT_EQ(short_wait.relaxed, 0.0);
  EXPECT_EQ(t.binary.count, 5u);
  EXPECT_DOUBLE_EQ(t.binary.exact, 0.8);
  EXPECT_EQ(t.binary.relaxed, t.binary.exact);
  EXPECT_EQ(t.waiting[waiting_index(C::gt_4h)].count, 0u);
}

TEST(CategoryAccuracy, AllExact) {
  std::vector<CategoryPair> pairs;
  for (int i = 0; i < kCategoryCount; ++i) pairs.push_back({static_cast<StartCategory>(i), static_cast<StartCategory>(i)});
  const auto t = category_accuracy(pairs);
  EXPECT_EQ(t.binary.exact, 1.0);
  for (const auto& row : t.waiting) {
    EXPECT_EQ(row.exact, 1.0);
    EXPECT_EQ(row.relaxed, 1.0);
  }
  EXPECT_THROW(category_accuracy({}), Error);
}

TEST(ExternalEstimates, InitialAndBest) {
  const Trace t = make_trace("m", {qwait::testing::rec("a", 0, 10'000, 10'060), qwait::testing::rec("b", 5, 500, 560)});
  const std::vector<EstimateRow> est = {
      {"a", 100, 10'000 + 7200}, {"a", 200, 10'000 - 30}, {"b", 6, 500}, {"ghost", 1, 2}};
  const auto s = score_external_estimates(t, est);
  EXPECT_EQ(s.jobs, 2u);
  EXPECT_EQ(s.skipped_rows, 1u);
  // Job a: initial error 7200 s, best 30 s. Job b is exact.
  EXPECT_DOUBLE_EQ(s.initial.fraction[0], 0.5);
  EXPECT_DOUBLE_EQ(s.initial.fraction[4], 0.5);
  EXPECT_DOUBLE_EQ(s.initial.fraction[5], 1.0);
  EXPECT_DOUBLE_EQ(s.best.fraction[0], 1.0);
}

TEST(ExternalEstimates, SingleEstimateMeansInitialEqualsBest) {
  const Trace t = make_trace("m", {qwait::testing::rec("a", 0, 100, 160), qwait::testing::rec("b", 0, 900, 960)});
  const auto s = score_external_estimates(t, std::vector<EstimateRow>{{"a", 0, 400}, {"b", 0, 100}});
  EXPECT_EQ(s.initial.fraction, s.best.fraction);
}

TEST(ExternalEstimates, Errors) {
  const Trace t = make_trace("m", {qwait::testing::rec("a", 0, 100, 160)});
  try {
    score_external_estimates(t, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "no scorable estimates");
  }
  EXPECT_THROW(score_external_estimates(t, std::vector<EstimateRow>{{"zz", 0, 1}}), Error);
  std::istringstream good("job_id,estimate_made_at,estimated_start\na,5,100\na,6,1672617600\n");
  const auto rows = parse_estimates(good);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].estimated_start, 1672617600);
  std::istringstream bad("job_id,estimate_made_at,estimated_start\na,soon,100\n");
  EXPECT_THROW(parse_estimates(bad), ParseError);
  std::istringstream header("id,when\n");
  EXPECT_THROW(parse_estimates(header), ParseError);
}

TEST(MetricProperties, FuzzedInvariants) {
  const auto v = qwait::testing::fuzz_metrics(300, 5);
  EXPECT_EQ(v.window_monotonicity, 0u);
  EXPECT_EQ(v.relaxed_below_exact, 0u);
  EXPECT_EQ(v.best_below_initial, 0u);
}

TEST(EvaluateBundle, ReportStructureAndImmediatePath) {
  const auto& m = small_model();
  EvalOptions opt;
  opt.max_test_jobs = 120;
  const auto rep = evaluate_bundle(*m.bundle, m.trace, m.split.test, opt);
  EXPECT_EQ(rep.test_jobs, m.split.test.size());
  EXPECT_EQ(rep.evaluated_jobs, 120u);
  EXPECT_EQ(rep.states, m.bundle->config.states);
  EXPECT_EQ(rep.machine, "small");
  ASSERT_EQ(rep.models.size(), 4u);
  for (const auto& me : rep.models) {
    EXPECT_EQ(me.windows.count, 120u);
    for (std::size_t i = 1; i < kWindows.size(); ++i) EXPECT_GE(me.windows.fraction[i], me.windows.fraction[i - 1]);
  }
  const auto& c = rep.get(EvalModel::combined);
  EXPECT_EQ(c.immediate_start_mismatches, 0u);
  EXPECT_THROW(rep.get(static_cast<EvalModel>(9)), Error);

  std::ostringstream text;
  render_report(text, rep);
  for (const char* row : {"1 minute", "24 hours", "combined", "queue_knn", "temporal", "basic", "Immediately"}) {
    EXPECT_NE(text.str().find(row), std::string::npos) << row;
  }
  std::ostringstream csv;
  render_windows_csv(csv, rep);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "window,window_s,combined,queue_knn,temporal,basic");
}

TEST(EvaluateBundle, DeterministicAcrossThreadCounts) {
  const auto& m = small_model();
  EvalOptions a;
  a.max_test_jobs = 40;
  a.threads = 1;
  EvalOptions b = a;
  b.threads = 4;
  const auto dir = std::filesystem::temp_directory_path() / "qwait_eval_test";
  std::filesystem::remove_all(dir);
  write_report_files(dir / "one", evaluate_bundle(*m.bundle, m.trace, m.split.test, a));
  write_report_files(dir / "four", evaluate_bundle(*m.bundle, m.trace, m.split.test, b));
  for (const char* f : {"report.txt", "windows.csv", "categories.csv"}) {
    const auto x = slurp(dir / "one" / f);
    EXPECT_FALSE(x.empty());
    EXPECT_EQ(x, slurp(dir / "four" / f)) << f;
  }
  std::filesystem::remove_all(dir);
}

TEST(EvaluateBundle, ModelSelectionAndNames) {
  const auto& m = small_model();
  EvalOptions opt;
  opt.models = {EvalModel::basic};
  opt.max_test_jobs = 10;
  opt.actual_runtimes = true;
  const auto rep = evaluate_bundle(*m.bundle, m.trace, m.split.test, opt);
  ASSERT_EQ(rep.models.size(), 1u);
  EXPECT_TRUE(rep.actual_runtimes);
  EXPECT_EQ(eval_model_from_name("queue_knn"), EvalModel::queue_knn);
  EXPECT_EQ(eval_model_name(EvalModel::combined), "combined");
  EXPECT_THROW(eval_model_from_name("oracle"), Error);
}
