#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qwait/models/category.hpp"
#include "qwait/pipeline.hpp"
#include "qwait/trace.hpp"

namespace qwait {

inline constexpr std::array<Seconds, 9> kWindows = {60, 300, 600, 1800, 3600, 7200, 21600, 43200, 86400};

// "1 minute", "5 minutes", ... "24 hours".
std::string_view window_label(std::size_t index);

struct StartPair {
  double predicted = 0;
  double actual = 0;
};

struct WindowAccuracyTable {
  std::size_t count = 0;
  // Fraction of pairs with |predicted - actual| <= kWindows[i].
  std::array<double, kWindows.size()> fraction{};
};

// Throws Error on an empty input.
WindowAccuracyTable window_accuracy(std::span<const StartPair> pairs);

struct CategoryPair {
  StartCategory predicted = StartCategory::immediate;
  StartCategory actual = StartCategory::immediate;
};

struct CategoryAccuracyRow {
  std::size_t count = 0;
  double exact = 0;
  double relaxed = 0;
};

struct CategoryAccuracyTable {
  // Immediate versus waiting, over every pair. Relaxed equals exact.
  CategoryAccuracyRow binary;
  // One row per waiting category over the pairs whose actual category it is.
  // Relaxed also accepts a waiting prediction one category away. Rows with
  // no pairs have count 0 and zero fractions.
  std::array<CategoryAccuracyRow, kWaitingCategories> waiting;
};

CategoryAccuracyTable category_accuracy(std::span<const CategoryPair> pairs);

struct EstimateRow {
  std::string job_id;
  Instant made_at = 0;
  Instant estimated_start = 0;
};

// CSV with header job_id,estimate_made_at,estimated_start. Throws ParseError.
std::vector<EstimateRow> parse_estimates(std::istream& in);
std::vector<EstimateRow> parse_estimates(const std::filesystem::path& path);

struct ExternalScore {
  WindowAccuracyTable initial;  // earliest estimate per job
  WindowAccuracyTable best;     // smallest absolute error per job
  std::size_t jobs = 0;
  std::size_t skipped_rows = 0;  // rows naming a job absent from the trace
};

// Throws Error("no scorable estimates") when no row names a trace job.
ExternalScore score_external_estimates(const Trace& trace, std::span<const EstimateRow> estimates);

enum class EvalModel { combined, queue_knn, temporal, basic };
inline constexpr std::array<EvalModel, 4> kAllEvalModels = {EvalModel::combined, EvalModel::queue_knn,
                                                            EvalModel::temporal, EvalModel::basic};

std::string_view eval_model_name(EvalModel m);
EvalModel eval_model_from_name(std::string_view name);

struct EvalOptions {
  std::vector<EvalModel> models{kAllEvalModels.begin(), kAllEvalModels.end()};
  // Evaluate an evenly strided subset of at most this many test jobs; 0 = all.
  std::size_t max_test_jobs = 0;
  // Featurize the reconstructed snapshot with its actual runtimes (one state)
  // instead of sampling queue states.
  bool actual_runtimes = false;
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct ModelEvaluation {
  EvalModel model = EvalModel::combined;
  WindowAccuracyTable windows;
  CategoryAccuracyTable categories;
  // Combined model only.
  std::size_t immediate_routed = 0;
  std::size_t immediate_start_mismatches = 0;  // routed jobs not predicted at submit + 10 s
};

struct EvaluationReport {
  std::string machine;
  std::string model_version;
  std::size_t test_jobs = 0;
  std::size_t evaluated_jobs = 0;
  int states = 0;
  bool actual_runtimes = false;
  std::vector<ModelEvaluation> models;

  const ModelEvaluation& get(EvalModel m) const;
};

// Predicts every selected test job against the snapshot reconstructed from
// `trace` at its submit instant (the job itself excluded). Test job i (in
// submit order) uses seed derive_seed(options.seed, i).
EvaluationReport evaluate_bundle(const TrainedBundle& bundle, const Trace& trace, std::span<const JobRecord> test,
                                 const EvalOptions& options = {});

// Aligned text tables; percentages with two decimals.
void render_report(std::ostream& out, const EvaluationReport& report);
void render_windows_csv(std::ostream& out, const EvaluationReport& report);
void render_categories_csv(std::ostream& out, const EvaluationReport& report);
// report.txt, windows.csv and categories.csv.
void write_report_files(const std::filesystem::path& dir, const EvaluationReport& report);

void render_external_score(std::ostream& out, const ExternalScore& score);
void render_external_score_csv(std::ostream& out, const ExternalScore& score);

}  // namespace qwait
