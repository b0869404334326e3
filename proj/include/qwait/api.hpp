#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qwait/error.hpp"
#include "qwait/pipeline.hpp"

namespace qwait {

// A rejected request. status is 400 for schema violations and 422 for
// well-formed but invalid values; field is the offending JSON path.
class RequestError : public Error {
 public:
  RequestError(int status, std::string field, const std::string& message)
      : Error(message), status_(status), field_(std::move(field)) {}

  int status() const { return status_; }
  const std::string& field() const { return field_; }

 private:
  int status_;
  std::string field_;
};

struct PredictRequest {
  JobRequest job;
  QueueSnapshot snapshot;
  std::uint64_t seed = kDefaultSeed;
};

struct HeatmapRequest {
  std::vector<int> nodes_grid;
  std::vector<double> wtime_grid;
  Instant submit = 0;
  QueueSnapshot snapshot;
  std::uint64_t seed = kDefaultSeed;
};

inline constexpr std::size_t kMaxHeatmapCells = 4096;

// {"queued": [{nodes_req, req_wtime, queued_since}], "running": [{nodes_req,
// req_wtime, started_at}]}; either list may be omitted.
QueueSnapshot snapshot_from_json(const nlohmann::json& j, Instant at, const std::string& path = "queue_state");
nlohmann::json snapshot_to_json(const QueueSnapshot& snap);

// Absent -> kDefaultSeed, a non-negative integer, or "random".
std::uint64_t seed_from_json(const nlohmann::json& body);

PredictRequest parse_predict_request(const nlohmann::json& body);
HeatmapRequest parse_heatmap_request(const nlohmann::json& body);

nlohmann::json predict_response(const PredictionResult& r);
nlohmann::json heatmap_response(const Heatmap& h);
nlohmann::json health_response(const TrainedBundle& bundle);

// Parse, predict, format: the path shared by the CLI and the service.
nlohmann::json handle_predict(const TrainedBundle& bundle, const nlohmann::json& body);
nlohmann::json handle_heatmap(const TrainedBundle& bundle, const nlohmann::json& body);

}  // namespace qwait
