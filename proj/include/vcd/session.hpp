#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vcd {

inline constexpr int kSessionSchemaVersion = 1;

enum class Platform { Android, iOS, Linux, MacIntel, Win32, Other };
enum class Browser { Chrome, Firefox, Safari, Other };
enum class SessionLabel { Bonafide, AttackStatic, AttackFaceswap };
enum class BinaryLabel : int { Bonafide = 0, Attack = 1 };

inline constexpr int kPlatformCount = 6;
inline constexpr int kBrowserCount = 4;

std::string_view to_string(Platform p);
std::string_view to_string(Browser b);
std::string_view to_string(SessionLabel l);
std::string_view to_string(BinaryLabel l);

// Closed-enum lookups: unknown strings map to Other.
Platform platform_from_string(std::string_view s);
Browser browser_from_string(std::string_view s);
// Labels have no fallback; returns nullopt for unknown strings.
std::optional<SessionLabel> session_label_from_string(std::string_view s);

constexpr BinaryLabel coarsen(SessionLabel l) {
  return l == SessionLabel::Bonafide ? BinaryLabel::Bonafide : BinaryLabel::Attack;
}

struct HeightChallengeResult {
  int requested_height = 0;
  std::optional<int> reported_height;
  std::optional<int> actual_height;
  std::optional<int> reported_width;
  std::optional<int> actual_width;
  std::optional<double> apply_time_ms;

  bool operator==(const HeightChallengeResult&) const = default;
};

struct FpsChallengeResult {
  int requested_fps = 0;
  std::optional<double> reported_fps;
  std::optional<double> actual_fps;
  std::optional<double> apply_time_ms;

  bool operator==(const FpsChallengeResult&) const = default;
};

struct SessionRecord {
  std::string session_id;
  Platform platform = Platform::Other;
  Browser browser = Browser::Other;
  // Metadata only; never used as a feature.
  std::optional<std::string> camera_label;
  std::vector<HeightChallengeResult> height_tests;
  std::vector<FpsChallengeResult> fps_tests;
  std::optional<SessionLabel> label;

  bool operator==(const SessionRecord&) const = default;
};

// Throws ValidationError when a type invariant is violated.
void validate(const SessionRecord& record);

// Canonical single-line JSON. Keys are emitted in this fixed order:
//   schema_version, session_id, platform, browser, camera_label, label,
//   height_tests[{requested_height, reported_width, reported_height,
//                 actual_width, actual_height, apply_time_ms}],
//   fps_tests[{requested_fps, reported_fps, actual_fps, apply_time_ms}]
// Missing values are explicit nulls.
std::string serialize_session(const SessionRecord& record);

// Accepts exactly schema_version 1 with every key present. Throws ParseError
// (bad JSON / wrong JSON types / unknown keys / missing schema_version),
// VersionError (schema_version != 1) or ValidationError (invariants).
SessionRecord parse_session(std::string_view text);

// Newline-delimited JSON, one canonical session per line.
void write_dataset(std::ostream& out, const std::vector<SessionRecord>& records);
void write_dataset_file(const std::string& path, const std::vector<SessionRecord>& records);
std::vector<SessionRecord> read_dataset(std::istream& in);
std::vector<SessionRecord> read_dataset_file(const std::string& path);

}  // namespace vcd
