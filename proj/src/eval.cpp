#include "qwait/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "parallel.hpp"
#include "qwait/error.hpp"
#include "text.hpp"

namespace qwait {

std::string_view window_label(std::size_t index) {
  static constexpr std::array<std::string_view, kWindows.size()> labels = {
      "1 minute", "5 minutes", "10 minutes", "30 minutes", "1 hour", "2 hours", "6 hours", "12 hours", "24 hours"};
  return labels.at(index);
}

WindowAccuracyTable window_accuracy(std::span<const StartPair> pairs) {
  if (pairs.empty()) throw Error("window accuracy needs at least one prediction");
  WindowAccuracyTable t;
  t.count = pairs.size();
  std::array<std::size_t, kWindows.size()> hits{};
  for (const auto& p : pairs) {
    const double err = std::abs(p.predicted - p.actual);
    for (std::size_t w = 0; w < kWindows.size(); ++w) hits[w] += err <= static_cast<double>(kWindows[w]);
  }
  for (std::size_t w = 0; w < kWindows.size(); ++w) {
    t.fraction[w] = static_cast<double>(hits[w]) / static_cast<double>(pairs.size());
  }
  return t;
}

CategoryAccuracyTable category_accuracy(std::span<const CategoryPair> pairs) {
  if (pairs.empty()) throw Error("category accuracy needs at least one prediction");
  CategoryAccuracyTable t;
  std::size_t binary_hits = 0;
  std::array<std::size_t, kWaitingCategories> exact{}, relaxed{};
  for (const auto& p : pairs) {
    const bool pi = p.predicted == StartCategory::immediate;
    const bool ai = p.actual == StartCategory::immediate;
    binary_hits += pi == ai;
    if (ai) continue;
    const auto a = static_cast<std::size_t>(waiting_index(p.actual));
    ++t.waiting[a].count;
    exact[a] += p.predicted == p.actual;
    if (!pi) relaxed[a] += std::abs(waiting_index(p.predicted) - waiting_index(p.actual)) <= 1;
  }
  t.binary.count = pairs.size();
  t.binary.exact = t.binary.relaxed = static_cast<double>(binary_hits) / static_cast<double>(pairs.size());
  for (std::size_t c = 0; c < kWaitingCategories; ++c) {
    if (t.waiting[c].count == 0) continue;
    const auto n = static_cast<double>(t.waiting[c].count);
    t.waiting[c].exact = static_cast<double>(exact[c]) / n;
    t.waiting[c].relaxed = static_cast<double>(relaxed[c]) / n;
  }
  return t;
}

std::vector<EstimateRow> parse_estimates(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) return {};
  ++line_no;
  const auto header = detail::split_fields(line, ',');
  if (header.size() != 3 || header[0] != "job_id" || header[1] != "estimate_made_at" ||
      header[2] != "estimated_start") {
    throw ParseError("unknown estimates header; expected columns job_id,estimate_made_at,estimated_start", 1);
  }
  std::vector<EstimateRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_fields(line, ',');
    if (f.size() != 3) {
      throw ParseError("expected 3 fields at line " + std::to_string(line_no), line_no);
    }
    if (f[0].empty()) throw ParseError("empty job_id at line " + std::to_string(line_no), line_no, "job_id");
    rows.push_back({std::string(f[0]), detail::parse_int_field(f[1], line_no, "estimate_made_at"),
                    detail::parse_int_field(f[2], line_no, "estimated_start")});
  }
  return rows;
}

std::vector<EstimateRow> parse_estimates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open estimates file " + path.string());
  return parse_estimates(in);
}

ExternalScore score_external_estimates(const Trace& trace, std::span<const EstimateRow> estimates) {
  std::unordered_map<std::string_view, const JobRecord*> by_id;
  for (const auto& r : trace.records) by_id.emplace(r.job_id, &r);

  struct Acc {
    const JobRecord* job;
    Instant first_made;
    Instant first_estimate;
    double best_error;
  };
  std::unordered_map<std::string_view, std::size_t> slot;
  std::vector<Acc> acc;
  ExternalScore score;
  for (const auto& e : estimates) {
    const auto it = by_id.find(e.job_id);
    if (it == by_id.end()) {
      ++score.skipped_rows;
      continue;
    }
    const double err = std::abs(static_cast<double>(e.estimated_start - it->second->start));
    auto [pos, inserted] = slot.emplace(it->first, acc.size());
    if (inserted) {
      acc.push_back({it->second, e.made_at, e.estimated_start, err});
      continue;
    }
    Acc& a = acc[pos->second];
    if (e.made_at < a.first_made) {
      a.first_made = e.made_at;
      a.first_estimate = e.estimated_start;
    }
    a.best_error = std::min(a.best_error, err);
  }
  if (acc.empty()) throw Error("no scorable estimates");
  std::vector<StartPair> initial, best;
  for (const auto& a : acc) {
    const auto actual = static_cast<double>(a.job->start);
    initial.push_back({static_cast<double>(a.first_estimate), actual});
    best.push_back({actual + a.best_error, actual});
  }
  score.initial = window_accuracy(initial);
  score.best = window_accuracy(best);
  score.jobs = acc.size();
  return score;
}

std::string_view eval_model_name(EvalModel m) {
  switch (m) {
    case EvalModel::combined: return "combined";
    case EvalModel::queue_knn: return "queue_knn";
    case EvalModel::temporal: return "temporal";
    case EvalModel::basic: return "basic";
  }
  return "?";
}

EvalModel eval_model_from_name(std::string_view name) {
  for (auto m : kAllEvalModels) {
    if (eval_model_name(m) == name) return m;
  }
  throw Error("unknown model '" + std::string(name) + "' (expected combined, queue_knn, temporal or basic)");
}

const ModelEvaluation& EvaluationReport::get(EvalModel m) const {
  for (const auto& e : models) {
    if (e.model == m) return e;
  }
  throw Error("report has no results for model " + std::string(eval_model_name(m)));
}

EvaluationReport evaluate_bundle(const TrainedBundle& bundle, const Trace& trace, std::span<const JobRecord> test,
                                 const EvalOptions& options) {
  if (test.empty()) throw Error("no test jobs to evaluate");
  if (options.models.empty()) throw Error("no models selected for evaluation");

  std::vector<std::size_t> order(test.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return test[a].submit < test[b].submit; });
  std::vector<std::size_t> picked;
  if (options.max_test_jobs == 0 || options.max_test_jobs >= order.size()) {
    picked = order;
  } else {
    for (std::size_t i = 0; i < options.max_test_jobs; ++i) {
      picked.push_back(order[i * order.size() / options.max_test_jobs]);
    }
  }

  const auto wants = [&](EvalModel m) {
    return std::find(options.models.begin(), options.models.end(), m) != options.models.end();
  };
  const bool need_states = wants(EvalModel::combined) || wants(EvalModel::queue_knn);
  const int states = options.actual_runtimes ? 1 : bundle.config.states;

  std::vector<QueueSnapshot> snaps;
  if (need_states) {
    snaps.reserve(picked.size());
    SnapshotCursor cursor(trace);
    for (std::size_t idx : picked) snaps.push_back(cursor.advance_to(test[idx].submit, test[idx].job_id));
  }

  const std::size_t n = picked.size();
  std::vector<std::array<PredictionResult, 4>> results(n);
  detail::parallel_for(
      n,
      [&](std::size_t i) {
        const JobRecord& r = test[picked[i]];
        const JobRequest job{r.nodes_req, static_cast<double>(r.req_wtime), r.submit};
        std::vector<FeatureVector> feats;
        if (need_states) {
          if (options.actual_runtimes) {
            feats.push_back(featurize(job, snaps[i], bundle.bins));
          } else {
            feats = stochastic_features(bundle, job, snaps[i], states, derive_seed(options.seed, picked[i]));
          }
        }
        for (EvalModel m : options.models) {
          auto& slot = results[i][static_cast<std::size_t>(m)];
          switch (m) {
            case EvalModel::combined: slot = predict_combined_features(bundle, job, feats); break;
            case EvalModel::queue_knn: slot = predict_queue_knn_features(bundle, job, feats); break;
            case EvalModel::temporal:
              slot = predict_baseline(bundle, BaselineModel::temporal, job, nullptr, 0);
              break;
            case EvalModel::basic: slot = predict_baseline(bundle, BaselineModel::basic, job, nullptr, 0); break;
          }
        }
      },
      options.threads);

  EvaluationReport report;
  report.machine = bundle.machine;
  report.model_version = bundle.model_version;
  report.test_jobs = test.size();
  report.evaluated_jobs = n;
  report.states = states;
  report.actual_runtimes = options.actual_runtimes;
  for (EvalModel m : options.models) {
    ModelEvaluation e;
    e.model = m;
    std::vector<StartPair> starts;
    std::vector<CategoryPair> cats;
    starts.reserve(n);
    cats.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const JobRecord& r = test[picked[i]];
      const auto& p = results[i][static_cast<std::size_t>(m)];
      starts.push_back({p.predicted_start, static_cast<double>(r.start)});
      cats.push_back({p.category, categorize(r.wait())});
      if (m == EvalModel::combined && p.immediate) {
        ++e.immediate_routed;
        e.immediate_start_mismatches += p.predicted_start != static_cast<double>(r.submit) + kImmediateStartDelay;
      }
    }
    e.windows = window_accuracy(starts);
    e.categories = category_accuracy(cats);
    report.models.push_back(std::move(e));
  }
  return report;
}

namespace {

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

std::string pad_left(std::string_view s, std::size_t width) {
  return std::string(width > s.size() ? width - s.size() : 0, ' ') + std::string(s);
}

std::string pad_right(std::string_view s, std::size_t width) {
  return std::string(s) + std::string(width > s.size() ? width - s.size() : 0, ' ');
}

void render_category_table(std::ostream& out, const ModelEvaluation& e) {
  out << "Start-category accuracy, " << eval_model_name(e.model) << " (%)\n";
  out << pad_right("Category", 26) << pad_left("Jobs", 8) << pad_left("Exact", 9) << pad_left("Relaxed", 9) << "\n";
  const auto row = [&](std::string_view label, const CategoryAccuracyRow& r) {
    out << pad_right(label, 26) << pad_left(std::to_string(r.count), 8);
    if (r.count == 0) {
      out << pad_left("-", 9) << pad_left("-", 9) << "\n";
    } else {
      out << pad_left(pct(r.exact), 9) << pad_left(pct(r.relaxed), 9) << "\n";
    }
  };
  row(category_label(StartCategory::immediate), e.categories.binary);
  for (int c = 0; c < kWaitingCategories; ++c) {
    row(category_label(from_waiting_index(c)), e.categories.waiting[static_cast<std::size_t>(c)]);
  }
}

}  // namespace

void render_report(std::ostream& out, const EvaluationReport& report) {
  out << "Machine: " << report.machine << "\n";
  out << "Model version: " << report.model_version << "\n";
  out << "Test jobs: " << report.test_jobs << " (evaluated " << report.evaluated_jobs << ")\n";
  out << "Queue states: "
      << (report.actual_runtimes ? std::string("1 (actual runtimes)") : std::to_string(report.states) + " sampled")
      << "\n\n";

  out << "Start-time accuracy (% of jobs within window)\n";
  out << pad_right("Window", 12);
  for (const auto& e : report.models) out << pad_left(eval_model_name(e.model), 11);
  out << "\n";
  for (std::size_t w = 0; w < kWindows.size(); ++w) {
    out << pad_right(window_label(w), 12);
    for (const auto& e : report.models) out << pad_left(pct(e.windows.fraction[w]), 11);
    out << "\n";
  }
  for (const auto& e : report.models) {
    out << "\n";
    render_category_table(out, e);
    if (e.model == EvalModel::combined) {
      out << "Routed to immediate path: " << e.immediate_routed << " (start != submit + 10 s: "
          << e.immediate_start_mismatches << ")\n";
    }
  }
}

void render_windows_csv(std::ostream& out, const EvaluationReport& report) {
  out << "window,window_s";
  for (const auto& e : report.models) out << ',' << eval_model_name(e.model);
  out << "\n";
  for (std::size_t w = 0; w < kWindows.size(); ++w) {
    out << window_label(w) << ',' << kWindows[w];
    for (const auto& e : report.models) out << ',' << pct(e.windows.fraction[w]);
    out << "\n";
  }
}

void render_categories_csv(std::ostream& out, const EvaluationReport& report) {
  out << "model,category,jobs,exact,relaxed\n";
  for (const auto& e : report.models) {
    const auto row = [&](StartCategory c, const CategoryAccuracyRow& r) {
      out << eval_model_name(e.model) << ',' << category_code(c) << ',' << r.count << ',';
      if (r.count == 0) {
        out << ",\n";
      } else {
        out << pct(r.exact) << ',' << pct(r.relaxed) << "\n";
      }
    };
    row(StartCategory::immediate, e.categories.binary);
    for (int c = 0; c < kWaitingCategories; ++c) {
      row(from_waiting_index(c), e.categories.waiting[static_cast<std::size_t>(c)]);
    }
  }
}

void write_report_files(const std::filesystem::path& dir, const EvaluationReport& report) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const char* name, auto&& fn) {
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write " + (dir / name).string());
    fn(out);
  };
  write("report.txt", [&](std::ostream& o) { render_report(o, report); });
  write("windows.csv", [&](std::ostream& o) { render_windows_csv(o, report); });
  write("categories.csv", [&](std::ostream& o) { render_categories_csv(o, report); });
}

void render_external_score(std::ostream& out, const ExternalScore& score) {
  out << "Scored jobs: " << score.jobs << " (skipped rows: " << score.skipped_rows << ")\n\n";
  out << pad_right("Window", 12) << pad_left("initial", 11) << pad_left("best", 11) << "\n";
  for (std::size_t w = 0; w < kWindows.size(); ++w) {
    out << pad_right(window_label(w), 12) << pad_left(pct(score.initial.fraction[w]), 11)
        << pad_left(pct(score.best.fraction[w]), 11) << "\n";
  }
}

void render_external_score_csv(std::ostream& out, const ExternalScore& score) {
  out << "window,window_s,initial,best\n";
  for (std::size_t w = 0; w < kWindows.size(); ++w) {
    out << window_label(w) << ',' << kWindows[w] << ',' << pct(score.initial.fraction[w]) << ','
        << pct(score.best.fraction[w]) << "\n";
  }
}

}  // namespace qwait
