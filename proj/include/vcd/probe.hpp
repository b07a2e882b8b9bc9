#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vcd/session.hpp"

namespace vcd {

// Ordered challenge sequences run against a camera. Heights run first, then
// FPS, strictly sequentially.
struct ChallengePlan {
  std::vector<int> height_requests{11, 22, 240, 640, 1001, 3001};
  std::vector<int> fps_requests{1, 5, 30, 60, 120, 200};
  double per_challenge_timeout_ms = 5000.0;

  bool operator==(const ChallengePlan&) const = default;
};

// Throws ConfigError on empty lists, non-positive values, duplicates or a
// non-positive timeout.
void validate(const ChallengePlan& plan);

std::string plan_to_json(const ChallengePlan& plan);
ChallengePlan plan_from_json(std::string_view text);
ChallengePlan load_plan_file(const std::string& path);

struct HeightResponse {
  std::optional<int> reported_width;
  std::optional<int> reported_height;
  std::optional<int> actual_width;
  std::optional<int> actual_height;
  double elapsed_ms = 0.0;
};

struct FpsResponse {
  std::optional<double> reported_fps;
  std::optional<double> actual_fps;
  double elapsed_ms = 0.0;
};

// Camera seen by the probe. A nullopt response is a failed challenge.
// Implementations must be deterministic given their seed/state.
class Camera {
 public:
  virtual ~Camera() = default;
  virtual bool available() = 0;
  virtual std::optional<HeightResponse> apply_height(int requested_height) = 0;
  virtual std::optional<FpsResponse> apply_fps(int requested_fps) = 0;
};

struct SessionContext {
  std::string session_id;
  Platform platform = Platform::Other;
  Browser browser = Browser::Other;
  std::optional<std::string> camera_label;
  std::optional<SessionLabel> label;
};

// Runs every challenge in plan order and never aborts early. Failed or
// timed-out challenges keep their requested value and leave every other field
// missing. An unavailable camera yields an all-missing session.
SessionRecord run_protocol(Camera& camera, const ChallengePlan& plan,
                           const SessionContext& context);

}  // namespace vcd
