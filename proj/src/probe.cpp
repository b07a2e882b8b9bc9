#include "vcd/probe.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vcd/error.hpp"

namespace vcd {
namespace {

void validate_list(const std::vector<int>& values, const char* name) {
  if (values.empty()) throw ConfigError(std::string(name) + " must not be empty");
  std::set<int> seen;
  for (int v : values) {
    if (v <= 0) throw ConfigError(std::string(name) + " values must be positive");
    if (!seen.insert(v).second) {
      throw ConfigError(std::string(name) + " has duplicate value " + std::to_string(v));
    }
  }
}

HeightChallengeResult missing_height(int requested) {
  HeightChallengeResult r;
  r.requested_height = requested;
  return r;
}

FpsChallengeResult missing_fps(int requested) {
  FpsChallengeResult r;
  r.requested_fps = requested;
  return r;
}

}  // namespace

void validate(const ChallengePlan& plan) {
  validate_list(plan.height_requests, "height_requests");
  validate_list(plan.fps_requests, "fps_requests");
  if (!(plan.per_challenge_timeout_ms > 0.0)) {
    throw ConfigError("per_challenge_timeout_ms must be positive");
  }
}

std::string plan_to_json(const ChallengePlan& plan) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSessionSchemaVersion;
  j["height_requests"] = plan.height_requests;
  j["fps_requests"] = plan.fps_requests;
  j["per_challenge_timeout_ms"] = plan.per_challenge_timeout_ms;
  return j.dump();
}

ChallengePlan plan_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed plan JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("plan: expected object");
  ChallengePlan plan;
  try {
    for (const auto& item : j.items()) {
      const auto& key = item.key();
      if (key == "schema_version") {
        if (item.value() != kSessionSchemaVersion) throw VersionError("plan schema_version mismatch");
      } else if (key == "height_requests") {
        plan.height_requests = item.value().get<std::vector<int>>();
      } else if (key == "fps_requests") {
        plan.fps_requests = item.value().get<std::vector<int>>();
      } else if (key == "per_challenge_timeout_ms") {
        plan.per_challenge_timeout_ms = item.value().get<double>();
      } else {
        throw ConfigError("plan: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  validate(plan);
  return plan;
}

ChallengePlan load_plan_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open plan '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return plan_from_json(ss.str());
}

SessionRecord run_protocol(Camera& camera, const ChallengePlan& plan,
                           const SessionContext& context) {
  validate(plan);
  SessionRecord record;
  record.session_id = context.session_id;
  record.platform = context.platform;
  record.browser = context.browser;
  record.camera_label = context.camera_label;
  record.label = context.label;
  record.height_tests.reserve(plan.height_requests.size());
  record.fps_tests.reserve(plan.fps_requests.size());

  const bool usable = camera.available();

  for (int requested : plan.height_requests) {
    auto entry = missing_height(requested);
    if (usable) {
      auto response = camera.apply_height(requested);
      if (response && response->elapsed_ms <= plan.per_challenge_timeout_ms) {
        entry.reported_width = response->reported_width;
        entry.reported_height = response->reported_height;
        entry.actual_width = response->actual_width;
        entry.actual_height = response->actual_height;
        entry.apply_time_ms = std::max(0.0, response->elapsed_ms);
      }
    }
    record.height_tests.push_back(entry);
  }

  for (int requested : plan.fps_requests) {
    auto entry = missing_fps(requested);
    if (usable) {
      auto response = camera.apply_fps(requested);
      if (response && response->elapsed_ms <= plan.per_challenge_timeout_ms) {
        entry.reported_fps = response->reported_fps;
        entry.actual_fps = response->actual_fps;
        entry.apply_time_ms = std::max(0.0, response->elapsed_ms);
      }
    }
    record.fps_tests.push_back(entry);
  }
  return record;
}

}  // namespace vcd
