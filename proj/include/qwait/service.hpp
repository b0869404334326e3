#pragma once

#include <memory>
#include <string>

#include "qwait/pipeline.hpp"

namespace qwait {

// Read-only HTTP/JSON front end over one immutable bundle:
//   GET /health, POST /predict, POST /heatmap.
// Responses carry permissive CORS headers so a browser client on another
// origin can call them.
class PredictionService {
 public:
  explicit PredictionService(std::shared_ptr<const TrainedBundle> bundle);
  ~PredictionService();
  PredictionService(const PredictionService&) = delete;
  PredictionService& operator=(const PredictionService&) = delete;

  // Blocks until stop(). Returns false when the address cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it (-1 on failure); follow with serve().
  int bind_any_port(const std::string& host);
  bool serve();
  void stop();
  bool is_running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qwait
