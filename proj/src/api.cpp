#include "qwait/api.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace qwait {
namespace {

using nlohmann::json;

[[noreturn]] void schema(const std::string& field, const std::string& what) {
  throw RequestError(400, field, field + ": " + what);
}

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw RequestError(422, field, field + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) schema(path + key, "is required");
  return *it;
}

std::int64_t get_int(const json& v, const std::string& field) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  schema(field, "must be an integer");
}

double get_number(const json& v, const std::string& field) {
  if (!v.is_number()) schema(field, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) invalid(field, "must be finite");
  return d;
}

int positive_nodes(const json& v, const std::string& field) {
  const auto n = get_int(v, field);
  if (n <= 0) invalid(field, "must be positive");
  if (n > std::numeric_limits<int>::max()) invalid(field, "is too large");
  return static_cast<int>(n);
}

double positive_seconds(const json& v, const std::string& field) {
  const double d = get_number(v, field);
  if (d <= 0) invalid(field, "must be positive");
  return d;
}

Instant instant_field(const json& v, const std::string& field) {
  if (v.is_string()) {
    try {
      return parse_instant(v.get<std::string>());
    } catch (const Error&) {
      schema(field, "must be epoch seconds or an ISO-8601 timestamp");
    }
  }
  return get_int(v, field);
}

void require_object(const json& body) {
  if (!body.is_object()) schema("body", "must be a JSON object");
}

}  // namespace

QueueSnapshot snapshot_from_json(const json& j, Instant at, const std::string& path) {
  QueueSnapshot snap;
  snap.at = at;
  if (j.is_null()) return snap;
  if (!j.is_object()) schema(path, "must be an object with queued and running lists");
  const auto list = [&](const char* key) -> const json* {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return nullptr;
    if (!it->is_array()) schema(path + "." + key, "must be an array");
    return &*it;
  };
  if (const json* q = list("queued")) {
    for (std::size_t i = 0; i < q->size(); ++i) {
      const auto base = path + ".queued[" + std::to_string(i) + "].";
      const json& e = (*q)[i];
      if (!e.is_object()) schema(base.substr(0, base.size() - 1), "must be an object");
      QueuedJob job;
      job.nodes_req = positive_nodes(require(e, "nodes_req", base), base + "nodes_req");
      job.req_wtime = positive_seconds(require(e, "req_wtime", base), base + "req_wtime");
      job.queued_since = instant_field(require(e, "queued_since", base), base + "queued_since");
      if (job.queued_since > at) invalid(base + "queued_since", "is after the submit instant");
      job.runtime_for_features = job.req_wtime;
      snap.queued.push_back(job);
    }
  }
  if (const json* r = list("running")) {
    for (std::size_t i = 0; i < r->size(); ++i) {
      const auto base = path + ".running[" + std::to_string(i) + "].";
      const json& e = (*r)[i];
      if (!e.is_object()) schema(base.substr(0, base.size() - 1), "must be an object");
      RunningJob job;
      job.nodes_req = positive_nodes(require(e, "nodes_req", base), base + "nodes_req");
      job.req_wtime = positive_seconds(require(e, "req_wtime", base), base + "req_wtime");
      job.started_at = instant_field(require(e, "started_at", base), base + "started_at");
      if (job.started_at > at) invalid(base + "started_at", "is after the submit instant");
      job.runtime_for_features = job.req_wtime;
      snap.running.push_back(job);
    }
  }
  return snap;
}

json snapshot_to_json(const QueueSnapshot& snap) {
  json q = json::array(), r = json::array();
  for (const auto& j : snap.queued) {
    q.push_back({{"nodes_req", j.nodes_req}, {"req_wtime", j.req_wtime}, {"queued_since", j.queued_since}});
  }
  for (const auto& j : snap.running) {
    r.push_back({{"nodes_req", j.nodes_req}, {"req_wtime", j.req_wtime}, {"started_at", j.started_at}});
  }
  return {{"queued", q}, {"running", r}};
}

std::uint64_t seed_from_json(const json& body) {
  const auto it = body.find("seed");
  if (it == body.end() || it->is_null()) return kDefaultSeed;
  if (it->is_string()) {
    if (it->get<std::string>() != "random") schema("seed", "must be an integer or \"random\"");
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  if (it->is_number_unsigned()) return it->get<std::uint64_t>();
  if (it->is_number_integer()) {
    const auto v = it->get<std::int64_t>();
    if (v < 0) invalid("seed", "must be non-negative");
    return static_cast<std::uint64_t>(v);
  }
  schema("seed", "must be an integer or \"random\"");
}

PredictRequest parse_predict_request(const json& body) {
  require_object(body);
  PredictRequest req;
  req.job.nodes_req = positive_nodes(require(body, "nodes", ""), "nodes");
  req.job.req_wtime = positive_seconds(require(body, "req_wtime_s", ""), "req_wtime_s");
  req.job.submit = instant_field(require(body, "submit_epoch_s", ""), "submit_epoch_s");
  const auto qs = body.find("queue_state");
  req.snapshot = snapshot_from_json(qs == body.end() ? json() : *qs, req.job.submit);
  req.seed = seed_from_json(body);
  return req;
}

HeatmapRequest parse_heatmap_request(const json& body) {
  require_object(body);
  HeatmapRequest req;
  const json& nodes = require(body, "nodes_grid", "");
  const json& wtimes = require(body, "wtime_grid_s", "");
  if (!nodes.is_array()) schema("nodes_grid", "must be an array");
  if (!wtimes.is_array()) schema("wtime_grid_s", "must be an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    req.nodes_grid.push_back(positive_nodes(nodes[i], "nodes_grid[" + std::to_string(i) + "]"));
  }
  for (std::size_t i = 0; i < wtimes.size(); ++i) {
    req.wtime_grid.push_back(positive_seconds(wtimes[i], "wtime_grid_s[" + std::to_string(i) + "]"));
  }
  if (req.nodes_grid.empty()) invalid("nodes_grid", "must not be empty");
  if (req.wtime_grid.empty()) invalid("wtime_grid_s", "must not be empty");
  if (req.nodes_grid.size() * req.wtime_grid.size() > kMaxHeatmapCells) {
    invalid("nodes_grid", "grid exceeds " + std::to_string(kMaxHeatmapCells) + " cells");
  }
  req.submit = instant_field(require(body, "submit_epoch_s", ""), "submit_epoch_s");
  const auto qs = body.find("queue_state");
  req.snapshot = snapshot_from_json(qs == body.end() ? json() : *qs, req.submit);
  req.seed = seed_from_json(body);
  return req;
}

json predict_response(const PredictionResult& r) {
  return {{"mean_wait_s", r.mean_wait},
          {"std_wait_s", r.std_wait},
          {"predicted_start_epoch_s", r.predicted_start},
          {"category", category_code(r.category)},
          {"immediate_vote", r.immediate_vote_fraction},
          {"quantiles", {{"p10", r.quantile(0.1)}, {"p50", r.quantile(0.5)}, {"p90", r.quantile(0.9)}}},
          {"model_version", r.model_version}};
}

json heatmap_response(const Heatmap& h) {
  json rows = json::array();
  for (std::size_t i = 0; i < h.nodes_grid.size(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < h.wtime_grid.size(); ++k) {
      const auto& c = h.cell(i, k);
      row.push_back({{"mean_wait_s", c.mean_wait}, {"std_wait_s", c.std_wait}});
    }
    rows.push_back(std::move(row));
  }
  return {{"nodes_grid", h.nodes_grid}, {"wtime_grid_s", h.wtime_grid}, {"cells", std::move(rows)}};
}

json health_response(const TrainedBundle& bundle) {
  return {{"status", "ok"}, {"model_version", bundle.model_version}, {"machine", bundle.machine}};
}

json handle_predict(const TrainedBundle& bundle, const json& body) {
  const auto req = parse_predict_request(body);
  return predict_response(predict_combined(bundle, req.job, req.snapshot, req.seed));
}

json handle_heatmap(const TrainedBundle& bundle, const json& body) {
  const auto req = parse_heatmap_request(body);
  return heatmap_response(heatmap(bundle, req.snapshot, req.nodes_grid, req.wtime_grid, req.submit, req.seed));
}

}  // namespace qwait
