#include "vcd/service.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "vcd/error.hpp"
#include "vcd/eval.hpp"
#include "vcd/features.hpp"
#include "vcd/session.hpp"

namespace vcd {
namespace {

using ordered_json = nlohmann::ordered_json;
constexpr const char* kJson = "application/json";

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(ms));
  return buf;
}

}  // namespace

std::string score_response_to_json(const ScoreResponse& r) {
  ordered_json j;
  j["score"] = r.score;
  j["decision"] = r.reject ? "reject" : "accept";
  j["operating_point_name"] = r.operating_point_name;
  j["model_version"] = r.model_version;
  j["schema_version"] = r.schema_version;
  return j.dump();
}

std::string error_body(std::string_view code, std::string_view message) {
  ordered_json j;
  j["error"] = {{"code", code}, {"message", message}};
  return j.dump();
}

void apply_env_overrides(ServiceConfig& config) {
  if (const char* v = std::getenv("VCD_LISTEN"); v && *v) config.listen = v;
  if (const char* v = std::getenv("VCD_MODEL"); v && *v) config.model_path = v;
}

std::pair<std::string, int> parse_listen_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == address.size()) {
    throw ConfigError("listen address must look like host:port, got '" + std::string(address) + "'");
  }
  const std::string port_text(address.substr(colon + 1));
  char* end = nullptr;
  const long port = std::strtol(port_text.c_str(), &end, 10);
  if (*end != '\0' || port < 0 || port > 65535) {
    throw ConfigError("bad port in listen address '" + std::string(address) + "'");
  }
  return {std::string(address.substr(0, colon)), static_cast<int>(port)};
}

ScoringService::ScoringService(gbdt::EnsembleModel model, double threshold,
                               std::string operating_point_name, std::size_t max_body_bytes)
    : model_(std::move(model)),
      threshold_(threshold),
      op_name_(std::move(operating_point_name)),
      max_body_(max_body_bytes) {
  if (std::isnan(threshold_)) throw ConfigError("threshold must not be NaN");
  if (model_.forests.empty()) throw ConfigError("service needs a trained model");
}

std::unique_ptr<ScoringService> ScoringService::from_config(const ServiceConfig& config) {
  if (config.model_path.empty()) throw ConfigError("no model path configured");
  auto model = gbdt::load_model_file(config.model_path);
  if (config.threshold) {
    return std::make_unique<ScoringService>(std::move(model), *config.threshold, "custom",
                                            config.max_body_bytes);
  }
  if (config.report_path.empty()) {
    throw ConfigError("either a report with operating points or an explicit threshold is required");
  }
  const auto report = read_report_file(config.report_path);
  if (report.model_version != model.model_version) {
    throw ConfigError("report was produced for model " + report.model_version + ", not " +
                      model.model_version);
  }
  for (const auto& op : report.operating_points) {
    if (op.name == config.operating_point) {
      return std::make_unique<ScoringService>(std::move(model), op.threshold, op.name,
                                              config.max_body_bytes);
    }
  }
  throw ConfigError("operating point '" + config.operating_point + "' not found in report");
}

ScoreResponse ScoringService::decide(const SessionRecord& record) const {
  ScoreResponse r;
  r.score = model_.predict_proba(extract_features(record, model_.layout));
  r.reject = r.score >= threshold_;
  r.operating_point_name = op_name_;
  r.model_version = model_.model_version;
  r.schema_version = kSessionSchemaVersion;
  return r;
}

HttpReply ScoringService::score(std::string_view body) const {
  n_requests_.fetch_add(1, std::memory_order_relaxed);
  auto client_error = [this](int status, std::string_view code, std::string_view msg) {
    n_client_errors_.fetch_add(1, std::memory_order_relaxed);
    return HttpReply{status, error_body(code, msg)};
  };
  if (body.size() > max_body_) return client_error(413, "payload_too_large", "request body too large");
  SessionRecord record;
  try {
    record = parse_session(body);
  } catch (const VersionError& e) {
    return client_error(422, "schema_version_mismatch", e.what());
  } catch (const ParseError& e) {
    return client_error(400, "malformed_session", e.what());
  } catch (const ValidationError& e) {
    return client_error(400, "invalid_session", e.what());
  }
  const auto response = decide(record);
  n_ok_.fetch_add(1, std::memory_order_relaxed);
  if (response.reject) n_rejects_.fetch_add(1, std::memory_order_relaxed);
  return {200, score_response_to_json(response)};
}

HttpReply ScoringService::health() const {
  ordered_json j;
  j["status"] = "ok";
  j["model_version"] = model_.model_version;
  j["schema_version"] = kSessionSchemaVersion;
  j["operating_point_name"] = op_name_;
  return {200, j.dump()};
}

HttpReply ScoringService::metrics() const {
  ordered_json j;
  j["requests"] = n_requests_.load();
  j["scored"] = n_ok_.load();
  j["rejected"] = n_rejects_.load();
  j["client_errors"] = n_client_errors_.load();
  return {200, j.dump()};
}

struct HttpServer::Impl {
  const ScoringService& service;
  std::ostream* log;
  std::mutex log_mutex;
  httplib::Server server;
  std::thread thread;

  Impl(const ScoringService& s, std::ostream* l) : service(s), log(l) {
    server.set_payload_max_length(service.max_body_bytes());
    server.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.score(req.body));
    });
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, service.health());
    });
    server.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, service.metrics());
    });
    // Errors raised by the transport itself (404, 413 from the size limit).
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const char* code = res.status == 413 ? "payload_too_large"
                         : res.status == 404 ? "not_found"
                                             : "http_error";
      res.set_content(error_body(code, httplib::status_message(res.status)), kJson);
    });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
          res.status = 500;
          res.set_content(error_body("internal_error", "internal error"), kJson);
        });
    if (log) {
      server.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
        ordered_json j;
        j["ts"] = utc_timestamp();
        j["level"] = res.status >= 500 ? "error" : res.status >= 400 ? "warn" : "info";
        j["event"] = "request";
        j["method"] = req.method;
        j["path"] = req.path;
        j["status"] = res.status;
        j["request_bytes"] = req.body.size();
        std::lock_guard lock(log_mutex);
        *log << j.dump() << '\n' << std::flush;
      });
    }
  }

  static void reply(httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, kJson);
  }
};

HttpServer::HttpServer(const ScoringService& service, std::ostream* log)
    : impl_(std::make_unique<Impl>(service, log)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::run(const std::string& host, int port) {
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  if (impl_->log) {
    ordered_json j;
    j["ts"] = utc_timestamp();
    j["level"] = "info";
    j["event"] = "listening";
    j["address"] = host + ":" + std::to_string(port);
    j["model_version"] = impl_->service.model().model_version;
    j["operating_point_name"] = impl_->service.operating_point_name();
    std::lock_guard lock(impl_->log_mutex);
    *impl_->log << j.dump() << '\n' << std::flush;
  }
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace vcd
