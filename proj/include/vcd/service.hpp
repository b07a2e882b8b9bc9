#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "vcd/gbdt/ensemble.hpp"

namespace vcd {

struct ScoreResponse {
  double score = 0.0;
  bool reject = false;  // score >= threshold
  std::string operating_point_name;
  std::string model_version;
  int schema_version = 1;
};

std::string score_response_to_json(const ScoreResponse& r);

struct ServiceConfig {
  std::string model_path;
  // Operating point looked up by name in an eval report; `threshold`
  // overrides both when set.
  std::string report_path;
  std::string operating_point = "apcer_0.1";
  std::optional<double> threshold;
  std::string listen = "127.0.0.1:8080";
  std::size_t max_body_bytes = 64 * 1024;
  bool log_requests = true;
};

// Applies VCD_LISTEN and VCD_MODEL when set.
void apply_env_overrides(ServiceConfig& config);

struct HttpReply {
  int status = 200;
  std::string body;
};

// Request handling independent of the transport. Safe for concurrent use:
// the model and threshold are immutable and the counters are atomic.
class ScoringService {
 public:
  ScoringService(gbdt::EnsembleModel model, double threshold, std::string operating_point_name,
                 std::size_t max_body_bytes = 64 * 1024);

  // Loads the model and resolves the operating point. Throws ConfigError when
  // the named operating point is absent or the report belongs to another model.
  static std::unique_ptr<ScoringService> from_config(const ServiceConfig& config);

  HttpReply score(std::string_view body) const;
  HttpReply health() const;
  HttpReply metrics() const;

  double threshold() const { return threshold_; }
  const std::string& operating_point_name() const { return op_name_; }
  const gbdt::EnsembleModel& model() const { return model_; }
  std::size_t max_body_bytes() const { return max_body_; }

  // Decision for an already parsed session.
  ScoreResponse decide(const SessionRecord& record) const;

 private:
  gbdt::EnsembleModel model_;
  double threshold_;
  std::string op_name_;
  std::size_t max_body_;
  mutable std::atomic<std::uint64_t> n_requests_{0};
  mutable std::atomic<std::uint64_t> n_ok_{0};
  mutable std::atomic<std::uint64_t> n_rejects_{0};
  mutable std::atomic<std::uint64_t> n_client_errors_{0};
};

std::string error_body(std::string_view code, std::string_view message);

// HTTP front end. `start` binds and serves on a background thread; port 0
// picks a free port.
class HttpServer {
 public:
  HttpServer(const ScoringService& service, std::ostream* log);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  int start(const std::string& host, int port);
  // Binds and blocks until stop() is called from another thread.
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// "host:port" split; throws ConfigError.
std::pair<std::string, int> parse_listen_address(std::string_view address);

}  // namespace vcd
