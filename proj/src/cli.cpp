#include "qwait/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "qwait/api.hpp"
#include "qwait/bundle_io.hpp"
#include "qwait/eval.hpp"
#include "qwait/service.hpp"
#include "qwait/simworld.hpp"
#include "qwait/snapshot_io.hpp"

namespace qwait {
namespace {

using nlohmann::json;

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json seed_value(const std::string& s) {
  if (s == "random") return "random";
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw Error("--seed must be a non-negative integer or \"random\"");
  }
  return v;
}

QueueSnapshot load_queue_state(const std::string& path, Instant at) {
  if (path.empty()) return QueueSnapshot{at, {}, {}};
  if (std::filesystem::path(path).extension() == ".json") {
    std::ifstream in(path);
    if (!in) throw Error("cannot open snapshot file " + path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error&) {
      throw Error("snapshot file " + path + " is not valid JSON");
    }
    return snapshot_from_json(j, at);
  }
  return load_snapshot_csv(path, at);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::ostream& emit(std::ostream& out, const json& j) { return out << j.dump() << "\n"; }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Batch-queue wait-time prediction toolkit", "qwait"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // ingest
  std::string in_path, partition, machine, out_path;
  auto* ingest = app.add_subcommand("ingest", "Clean an accounting export into a canonical trace CSV");
  ingest->add_option("--input", in_path, "Canonical or sacct CSV")->required();
  ingest->add_option("--partition", partition, "Keep only this partition");
  ingest->add_option("--machine", machine, "Machine name");
  ingest->add_option("--out", out_path, "Output trace CSV")->required();

  // simulate
  std::string spec_path;
  std::uint64_t sim_seed = 0;
  bool print_spec = false;
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic workload and schedule it");
  simulate_cmd->add_option("--spec", spec_path, "Workload spec (key = value lines)");
  simulate_cmd->add_option("--seed", sim_seed, "Override the workload seed");
  simulate_cmd->add_option("--out", out_path, "Output trace CSV");
  simulate_cmd->add_flag("--print-default-spec", print_spec, "Print the default spec and exit");

  // train
  std::string trace_path, bundle_path;
  PipelineConfig cfg;
  auto* train = app.add_subcommand("train", "Train a model bundle on the training days of a trace");
  train->add_option("--trace", trace_path, "Trace CSV")->required();
  train->add_option("--out", bundle_path, "Output bundle file")->required();
  train->add_option("--states", cfg.states, "Sampled queue states per prediction")->check(CLI::PositiveNumber);
  train->add_option("--seed", cfg.seed, "Default prediction seed stored in the bundle");
  train->add_option("--knn-k", cfg.knn_k, "Neighbours for the KNN models")->check(CLI::PositiveNumber);
  train->add_option("--knn-p", cfg.knn_p, "Minkowski order for the KNN models")->check(CLI::PositiveNumber);
  train->add_option("--gbt-trees", cfg.gbt.n_trees, "Boosting rounds")->check(CLI::NonNegativeNumber);
  train->add_option("--gbt-depth", cfg.gbt.max_depth, "Maximum tree depth")->check(CLI::PositiveNumber);
  train->add_option("--gbt-lr", cfg.gbt.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  train->add_option("--gbt-min-leaf", cfg.gbt.min_leaf, "Minimum rows per leaf")->check(CLI::PositiveNumber);
  train->add_option("--gbt-lambda", cfg.gbt.reg_lambda, "L2 leaf regularisation")->check(CLI::NonNegativeNumber);
  train->add_option("--min-category-jobs", cfg.min_category_jobs, "Smallest widened regressor training set");

  // predict
  int nodes = 0;
  std::string wtime, at, queue_state, seed = std::to_string(kDefaultSeed);
  bool text = false;
  auto* predict = app.add_subcommand("predict", "Predict the wait of one job request");
  predict->add_option("--bundle", bundle_path, "Bundle file")->required();
  predict->add_option("--nodes", nodes, "Requested nodes")->required();
  predict->add_option("--wtime", wtime, "Requested wall time (seconds or 30m, 2h, ...)")->required();
  predict->add_option("--at", at, "Submit instant (epoch seconds or ISO-8601)")->required();
  predict->add_option("--queue-state", queue_state, "Snapshot CSV or JSON; empty queue when omitted");
  predict->add_option("--seed", seed, "Seed or \"random\"");
  predict->add_flag("--text", text, "Human-readable output");

  // snapshot
  auto* snapshot_cmd = app.add_subcommand("snapshot", "Extract the queue snapshot of a trace at an instant");
  snapshot_cmd->add_option("--trace", trace_path, "Trace CSV")->required();
  snapshot_cmd->add_option("--at", at, "Instant (epoch seconds or ISO-8601)")->required();
  snapshot_cmd->add_option("--out", out_path, "Output snapshot CSV")->required();

  // evaluate
  std::vector<std::string> models;
  EvalOptions eval_opts;
  std::string report_dir;
  auto* evaluate = app.add_subcommand("evaluate", "Score a bundle on the test days of a trace");
  evaluate->add_option("--bundle", bundle_path, "Bundle file")->required();
  evaluate->add_option("--trace", trace_path, "Trace CSV the bundle was trained on")->required();
  evaluate->add_option("--model", models, "combined, queue_knn, temporal or basic (repeatable)");
  evaluate->add_option("--max-test-jobs", eval_opts.max_test_jobs, "Evaluate an evenly spaced subset");
  evaluate->add_flag("--actual-runtimes", eval_opts.actual_runtimes, "Use actual runtimes instead of sampling");
  evaluate->add_option("--seed", eval_opts.seed, "Base seed for the sampled states");
  evaluate->add_option("--threads", eval_opts.threads, "Worker threads (0 = all cores)");
  evaluate->add_option("--out-dir", report_dir, "Also write report.txt, windows.csv, categories.csv here");

  // score-estimates
  std::string estimates_path;
  bool csv = false;
  auto* score = app.add_subcommand("score-estimates", "Score recorded start-time estimates against a trace");
  score->add_option("--trace", trace_path, "Trace CSV")->required();
  score->add_option("--estimates", estimates_path, "CSV job_id,estimate_made_at,estimated_start")->required();
  score->add_flag("--csv", csv, "CSV output");

  // heatmap
  std::string nodes_list, wtime_list;
  auto* heat = app.add_subcommand("heatmap", "Predict over a grid of node counts and wall times");
  heat->add_option("--bundle", bundle_path, "Bundle file")->required();
  heat->add_option("--nodes", nodes_list, "Comma-separated node counts")->required();
  heat->add_option("--wtimes", wtime_list, "Comma-separated wall times (1h,2h,...)")->required();
  heat->add_option("--at", at, "Submit instant")->required();
  heat->add_option("--queue-state", queue_state, "Snapshot CSV or JSON");
  heat->add_option("--seed", seed, "Seed or \"random\"");
  heat->add_option("--out", out_path, "Output grid CSV")->required();

  // serve
  std::string listen = "127.0.0.1:8080";
  auto* serve = app.add_subcommand("serve", "Serve predictions over HTTP");
  serve->add_option("--bundle", bundle_path, "Bundle file")->required();
  serve->add_option("--listen", listen, "HOST:PORT");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    emit(err, {{"error", e.what()}, {"kind", "usage"}});
    return 2;
  }

  try {
    if (ingest->parsed()) {
      const auto p = partition.empty() ? std::nullopt : std::optional<std::string>(partition);
      Trace t = parse_trace(std::filesystem::path(in_path), p);
      if (!machine.empty()) t.machine_name = machine;
      write_trace(std::filesystem::path(out_path), t);
      emit(out, {{"records", t.records.size()}, {"dropped", t.dropped_rows}, {"node_capacity", t.node_capacity}});
    } else if (simulate_cmd->parsed()) {
      WorkloadSpec spec = spec_path.empty() ? WorkloadSpec{} : load_workload_spec(spec_path);
      if (print_spec) {
        write_workload_spec(out, spec);
        return 0;
      }
      if (out_path.empty()) throw Error("simulate needs --out");
      if (simulate_cmd->count("--seed") > 0) spec.seed = sim_seed;
      const Trace t = simulate(spec);
      write_trace(std::filesystem::path(out_path), t);
      std::size_t immediate = 0;
      for (const auto& r : t.records) immediate += categorize(r.wait()) == StartCategory::immediate;
      emit(out, {{"records", t.records.size()},
                 {"node_capacity", t.node_capacity},
                 {"immediate_fraction", t.records.empty() ? 0.0 : double(immediate) / double(t.records.size())}});
    } else if (train->parsed()) {
      const Trace t = parse_trace(std::filesystem::path(trace_path));
      const auto split = split_every_fifth_day(t);
      const TrainedBundle b = train_bundle(split, t, cfg);
      save_bundle(b, bundle_path);
      emit(out, {{"model_version", b.model_version},
                 {"train_jobs", b.train_jobs},
                 {"test_jobs", split.test.size()},
                 {"warnings", b.warnings}});
    } else if (predict->parsed()) {
      const TrainedBundle b = load_bundle(bundle_path);
      const Instant submit = parse_instant(at);
      const QueueSnapshot snap = load_queue_state(queue_state, submit);
      const json body = {{"nodes", nodes},
                         {"req_wtime_s", parse_duration(wtime)},
                         {"submit_epoch_s", submit},
                         {"queue_state", snapshot_to_json(snap)},
                         {"seed", seed_value(seed)}};
      const json r = handle_predict(b, body);
      if (!text) {
        emit(out, r);
      } else {
        const auto q = r.at("quantiles");
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "mean wait   %.1f s\nstd wait    %.1f s\nstart       %s\ncategory    %s\n"
                      "p10/p50/p90 %.1f / %.1f / %.1f s\n",
                      r.at("mean_wait_s").get<double>(), r.at("std_wait_s").get<double>(),
                      format_iso8601(static_cast<Instant>(r.at("predicted_start_epoch_s").get<double>())).c_str(),
                      r.at("category").get<std::string>().c_str(), q.at("p10").get<double>(),
                      q.at("p50").get<double>(), q.at("p90").get<double>());
        out << buf;
      }
    } else if (snapshot_cmd->parsed()) {
      const Trace t = parse_trace(std::filesystem::path(trace_path));
      const QueueSnapshot snap = reconstruct(t, parse_instant(at));
      write_snapshot_csv(std::filesystem::path(out_path), snap);
      emit(out, {{"queued", snap.queued.size()}, {"running", snap.running.size()}});
    } else if (evaluate->parsed()) {
      const TrainedBundle b = load_bundle(bundle_path);
      const Trace t = parse_trace(std::filesystem::path(trace_path));
      const auto split = split_every_fifth_day(t);
      if (!models.empty()) {
        eval_opts.models.clear();
        for (const auto& m : models) {
          for (const auto& name : split_commas(m)) eval_opts.models.push_back(eval_model_from_name(name));
        }
      }
      const auto report = evaluate_bundle(b, t, split.test, eval_opts);
      render_report(out, report);
      if (!report_dir.empty()) write_report_files(report_dir, report);
    } else if (score->parsed()) {
      const Trace t = parse_trace(std::filesystem::path(trace_path));
      const auto rows = parse_estimates(std::filesystem::path(estimates_path));
      const auto s = score_external_estimates(t, rows);
      if (csv) {
        render_external_score_csv(out, s);
      } else {
        render_external_score(out, s);
      }
    } else if (heat->parsed()) {
      const TrainedBundle b = load_bundle(bundle_path);
      const Instant submit = parse_instant(at);
      json ngrid = json::array(), wgrid = json::array();
      for (const auto& n : split_commas(nodes_list)) {
        std::size_t used = 0;
        const int v = std::stoi(n, &used);
        if (used != n.size()) throw Error("--nodes has a malformed entry '" + n + "'");
        ngrid.push_back(v);
      }
      for (const auto& w : split_commas(wtime_list)) wgrid.push_back(parse_duration(w));
      const json body = {{"nodes_grid", ngrid},
                         {"wtime_grid_s", wgrid},
                         {"submit_epoch_s", submit},
                         {"queue_state", snapshot_to_json(load_queue_state(queue_state, submit))},
                         {"seed", seed_value(seed)}};
      const json r = handle_heatmap(b, body);
      std::ostringstream csv_out;
      csv_out << "nodes,req_wtime_s,mean_wait_s,std_wait_s\n";
      char buf[128];
      for (std::size_t i = 0; i < ngrid.size(); ++i) {
        for (std::size_t k = 0; k < wgrid.size(); ++k) {
          const auto& c = r.at("cells").at(i).at(k);
          std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g\n", ngrid[i].get<int>(),
                        static_cast<long long>(wgrid[k].get<Seconds>()), c.at("mean_wait_s").get<double>(),
                        c.at("std_wait_s").get<double>());
          csv_out << buf;
        }
      }
      write_file(out_path, csv_out.str());
      emit(out, {{"cells", ngrid.size() * wgrid.size()}});
    } else if (serve->parsed()) {
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw Error("--listen must be HOST:PORT");
      const std::string host = listen.substr(0, colon);
      int port = 0;
      const std::string port_text = listen.substr(colon + 1);
      const auto r = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
      if (r.ec != std::errc() || r.ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
        throw Error("--listen has an invalid port");
      }
      auto b = std::make_shared<const TrainedBundle>(load_bundle(bundle_path));
      PredictionService service(b);
      emit(out, {{"listening", listen}, {"model_version", b->model_version}}) << std::flush;
      if (!service.listen(host, port)) throw Error("cannot listen on " + listen);
    }
  } catch (const RequestError& e) {
    emit(err, {{"error", e.what()}, {"field", e.field()}});
    return 1;
  } catch (const ParseError& e) {
    json j = {{"error", e.what()}, {"line", e.line()}};
    if (!e.column().empty()) j["column"] = e.column();
    emit(err, j);
    return 1;
  } catch (const std::exception& e) {
    emit(err, {{"error", e.what()}});
    return 1;
  }
  return 0;
}

}  // namespace qwait
