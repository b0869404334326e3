#include "qwait/service.hpp"

#include <httplib.h>

#include "qwait/api.hpp"

namespace qwait {

struct PredictionService::Impl {
  std::shared_ptr<const TrainedBundle> bundle;
  httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& field = {}) {
  nlohmann::json err = {{"status", status}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  send_json(res, status, {{"error", err}});
}

template <class Handler>
httplib::Server::Handler json_endpoint(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
      send_error(res, 400, "body: not valid JSON", "body");
      return;
    }
    try {
      send_json(res, 200, handler(body));
    } catch (const RequestError& e) {
      send_error(res, e.status(), e.what(), e.field());
    } catch (...) {
      send_error(res, 500, "internal error");
    }
  };
}

}  // namespace

PredictionService::PredictionService(std::shared_ptr<const TrainedBundle> bundle) : impl_(std::make_unique<Impl>()) {
  if (!bundle) throw Error("service needs a bundle");
  impl_->bundle = std::move(bundle);
  auto& srv = impl_->server;
  const TrainedBundle* b = impl_->bundle.get();

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Get("/health", [b](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, health_response(*b));
  });
  srv.Post("/predict", json_endpoint([b](const nlohmann::json& body) { return handle_predict(*b, body); }));
  srv.Post("/heatmap", json_endpoint([b](const nlohmann::json& body) { return handle_heatmap(*b, body); }));
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    send_error(res, 500, "internal error");
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not found" : "request failed");
  });
}

PredictionService::~PredictionService() { stop(); }

bool PredictionService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int PredictionService::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool PredictionService::serve() { return impl_->server.listen_after_bind(); }

void PredictionService::stop() {
  if (impl_) impl_->server.stop();
}

bool PredictionService::is_running() const { return impl_->server.is_running(); }

}  // namespace qwait
