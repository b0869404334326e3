#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "qwait/api.hpp"

using nlohmann::json;
using namespace qwait;
using qwait::testing::small_model;

namespace {

constexpr Instant kAt = 1673000000;

json body_for(int nodes, double wtime, json queue_state = json()) {
  json b = {{"nodes", nodes}, {"req_wtime_s", wtime}, {"submit_epoch_s", kAt}};
  if (!queue_state.is_null()) b["queue_state"] = std::move(queue_state);
  return b;
}

json busy_queue() {
  json q = json::array(), r = json::array();
  for (int i = 0; i < 20; ++i) q.push_back({{"nodes_req", 8}, {"req_wtime", 7200}, {"queued_since", kAt - 60 * i}});
  for (int i = 0; i < 8; ++i) r.push_back({{"nodes_req", 8}, {"req_wtime", 14400}, {"started_at", kAt - 300 * i}});
  return {{"queued", q}, {"running", r}};
}

void expect_rejected(const json& body, int status, const std::string& field) {
  try {
    parse_predict_request(body);
    ADD_FAILURE() << "accepted " << body.dump();
  } catch (const RequestError& e) {
    EXPECT_EQ(e.status(), status) << e.what();
    EXPECT_EQ(e.field(), field) << e.what();
  }
}

}  // namespace

TEST(ApiParse, MinimalRequest) {
  const auto req = parse_predict_request(body_for(4, 3600));
  EXPECT_EQ(req.job.nodes_req, 4);
  EXPECT_DOUBLE_EQ(req.job.req_wtime, 3600);
  EXPECT_EQ(req.job.submit, kAt);
  EXPECT_TRUE(req.snapshot.queued.empty());
  EXPECT_TRUE(req.snapshot.running.empty());
  EXPECT_EQ(req.seed, kDefaultSeed);
}

TEST(ApiParse, IsoSubmitInstant) {
  json b = body_for(1, 60);
  b["submit_epoch_s"] = "2023-01-06T10:13:20Z";
  EXPECT_EQ(parse_predict_request(b).job.submit, kAt);
}

TEST(ApiParse, SchemaErrorsAre400WithFieldPath) {
  expect_rejected(json::array(), 400, "body");
  expect_rejected({{"req_wtime_s", 60}, {"submit_epoch_s", kAt}}, 400, "nodes");
  expect_rejected({{"nodes", "four"}, {"req_wtime_s", 60}, {"submit_epoch_s", kAt}}, 400, "nodes");
  expect_rejected({{"nodes", 1.5}, {"req_wtime_s", 60}, {"submit_epoch_s", kAt}}, 400, "nodes");
  expect_rejected({{"nodes", 1}, {"req_wtime_s", "1h"}, {"submit_epoch_s", kAt}}, 400, "req_wtime_s");
  expect_rejected({{"nodes", 1}, {"req_wtime_s", 60}, {"submit_epoch_s", "yesterday"}}, 400, "submit_epoch_s");
  expect_rejected(body_for(1, 60, json::array()), 400, "queue_state");
  expect_rejected(body_for(1, 60, {{"queued", 3}}), 400, "queue_state.queued");
  expect_rejected(body_for(1, 60, {{"queued", {{{"nodes_req", 2}, {"req_wtime", 60}}}}}), 400,
                  "queue_state.queued[0].queued_since");
  expect_rejected(body_for(1, 60, {{"running", {1}}}), 400, "queue_state.running[0]");
}

TEST(ApiParse, SemanticErrorsAre422) {
  expect_rejected(body_for(0, 60), 422, "nodes");
  expect_rejected(body_for(-3, 60), 422, "nodes");
  expect_rejected(body_for(1, 0), 422, "req_wtime_s");
  expect_rejected(body_for(1, -5), 422, "req_wtime_s");
  expect_rejected(body_for(1, 60, {{"running", {{{"nodes_req", 0}, {"req_wtime", 60}, {"started_at", kAt}}}}}), 422,
                  "queue_state.running[0].nodes_req");
  expect_rejected(body_for(1, 60, {{"queued", {{{"nodes_req", 1}, {"req_wtime", 60}, {"queued_since", kAt + 1}}}}}),
                  422, "queue_state.queued[0].queued_since");
}

TEST(ApiParse, Seeds) {
  json b = body_for(1, 60);
  b["seed"] = 42;
  EXPECT_EQ(parse_predict_request(b).seed, 42u);
  b["seed"] = -1;
  expect_rejected(b, 422, "seed");
  b["seed"] = "lucky";
  expect_rejected(b, 400, "seed");
  b["seed"] = 1.5;
  expect_rejected(b, 400, "seed");
  b["seed"] = "random";
  const auto a = parse_predict_request(b).seed;
  const auto c = parse_predict_request(b).seed;
  const auto d = parse_predict_request(b).seed;
  EXPECT_FALSE(a == c && c == d);
}

TEST(ApiParse, SnapshotJsonRoundTrip) {
  const auto snap = snapshot_from_json(busy_queue(), kAt);
  ASSERT_EQ(snap.queued.size(), 20u);
  ASSERT_EQ(snap.running.size(), 8u);
  EXPECT_EQ(snap.queued[3].queued_since, kAt - 180);
  EXPECT_EQ(snap.running[2].started_at, kAt - 600);
  const auto again = snapshot_from_json(snapshot_to_json(snap), kAt);
  ASSERT_EQ(again.queued.size(), snap.queued.size());
  for (std::size_t i = 0; i < snap.queued.size(); ++i) {
    EXPECT_EQ(again.queued[i].nodes_req, snap.queued[i].nodes_req);
    EXPECT_EQ(again.queued[i].req_wtime, snap.queued[i].req_wtime);
    EXPECT_EQ(again.queued[i].queued_since, snap.queued[i].queued_since);
  }
  EXPECT_EQ(snapshot_to_json(again), snapshot_to_json(snap));
}

TEST(ApiParse, HeatmapGridLimits) {
  json b = {{"nodes_grid", {1, 2}}, {"wtime_grid_s", {60, 600}}, {"submit_epoch_s", kAt}};
  EXPECT_EQ(parse_heatmap_request(b).nodes_grid.size(), 2u);
  b["nodes_grid"] = json::array();
  EXPECT_THROW(parse_heatmap_request(b), RequestError);
  json big_n = json::array(), big_w = json::array();
  for (int i = 1; i <= 64; ++i) big_n.push_back(i);
  for (int i = 1; i <= 64; ++i) big_w.push_back(60 * i);
  b["nodes_grid"] = big_n;
  b["wtime_grid_s"] = big_w;
  EXPECT_NO_THROW(parse_heatmap_request(b));
  big_w.push_back(99999);
  b["wtime_grid_s"] = big_w;
  try {
    parse_heatmap_request(b);
    ADD_FAILURE();
  } catch (const RequestError& e) {
    EXPECT_EQ(e.status(), 422);
  }
  b["wtime_grid_s"] = {60, "x"};
  try {
    parse_heatmap_request(b);
    ADD_FAILURE();
  } catch (const RequestError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_EQ(e.field(), "wtime_grid_s[1]");
  }
}

TEST(ApiHandle, PredictResponseShape) {
  const auto& m = small_model();
  const json r = handle_predict(*m.bundle, body_for(4, 3600, busy_queue()));
  for (const char* k : {"mean_wait_s", "std_wait_s", "predicted_start_epoch_s", "category", "immediate_vote",
                        "quantiles", "model_version"}) {
    EXPECT_TRUE(r.contains(k)) << k;
  }
  EXPECT_GE(r["mean_wait_s"].get<double>(), 0.0);
  EXPECT_EQ(r["model_version"], m.bundle->model_version);
  EXPECT_NEAR(r["predicted_start_epoch_s"].get<double>(), double(kAt) + r["mean_wait_s"].get<double>(), 1e-6);
  const auto q = r["quantiles"];
  EXPECT_LE(q["p10"].get<double>(), q["p50"].get<double>());
  EXPECT_LE(q["p50"].get<double>(), q["p90"].get<double>());
}

TEST(ApiHandle, SameSeedSameAnswer) {
  const auto& m = small_model();
  json b = body_for(4, 3600, busy_queue());
  b["seed"] = 7;
  EXPECT_EQ(handle_predict(*m.bundle, b).dump(), handle_predict(*m.bundle, b).dump());
}

TEST(ApiHandle, EmptyQueueIsImmediate) {
  const auto& m = small_model();
  const json r = handle_predict(*m.bundle, body_for(1, 600));
  EXPECT_EQ(r["category"], "IMMEDIATE");
  EXPECT_DOUBLE_EQ(r["mean_wait_s"].get<double>(), 10.0);
}

TEST(ApiHandle, SingleCellHeatmapMatchesPredict) {
  const auto& m = small_model();
  json p = body_for(4, 3600, busy_queue());
  p["seed"] = 11;
  const json h = {{"nodes_grid", {4}},
                  {"wtime_grid_s", {3600}},
                  {"submit_epoch_s", kAt},
                  {"queue_state", busy_queue()},
                  {"seed", 11}};
  const json pr = handle_predict(*m.bundle, p);
  const json hr = handle_heatmap(*m.bundle, h);
  ASSERT_EQ(hr["cells"].size(), 1u);
  ASSERT_EQ(hr["cells"][0].size(), 1u);
  EXPECT_EQ(hr["cells"][0][0]["mean_wait_s"].get<double>(), pr["mean_wait_s"].get<double>());
  EXPECT_EQ(hr["cells"][0][0]["std_wait_s"].get<double>(), pr["std_wait_s"].get<double>());
}

TEST(ApiHandle, Health) {
  const auto& m = small_model();
  const json h = health_response(*m.bundle);
  EXPECT_EQ(h["status"], "ok");
  EXPECT_EQ(h["machine"], "small");
  EXPECT_EQ(h["model_version"], m.bundle->model_version);
}
