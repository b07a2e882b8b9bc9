#include "vcd/session.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <utility>

#include <json.hpp>

#include "vcd/error.hpp"

namespace vcd {
namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

constexpr std::array<std::pair<Platform, std::string_view>, 6> kPlatformNames{{
    {Platform::Android, "Android"},
    {Platform::iOS, "iOS"},
    {Platform::Linux, "Linux"},
    {Platform::MacIntel, "MacIntel"},
    {Platform::Win32, "Win32"},
    {Platform::Other, "Other"},
}};

constexpr std::array<std::pair<Browser, std::string_view>, 4> kBrowserNames{{
    {Browser::Chrome, "Chrome"},
    {Browser::Firefox, "Firefox"},
    {Browser::Safari, "Safari"},
    {Browser::Other, "Other"},
}};

constexpr std::array<std::pair<SessionLabel, std::string_view>, 3> kLabelNames{{
    {SessionLabel::Bonafide, "bonafide"},
    {SessionLabel::AttackStatic, "attack_static"},
    {SessionLabel::AttackFaceswap, "attack_faceswap"},
}};

constexpr std::array<std::string_view, 8> kTopLevelKeys{
    "schema_version", "session_id", "platform",     "browser",
    "camera_label",   "label",      "height_tests", "fps_tests"};
constexpr std::array<std::string_view, 6> kHeightKeys{
    "requested_height", "reported_width", "reported_height",
    "actual_width",     "actual_height",  "apply_time_ms"};
constexpr std::array<std::string_view, 4> kFpsKeys{
    "requested_fps", "reported_fps", "actual_fps", "apply_time_ms"};

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <std::size_t N>
void check_keys(const json& obj, const std::array<std::string_view, N>& allowed,
                std::string_view where) {
  if (!obj.is_object()) throw ParseError(std::string(where) + ": expected object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto k : allowed) known = known || item.key() == k;
    if (!known) throw ParseError(std::string(where) + ": unknown key '" + item.key() + "'");
  }
  for (auto k : allowed) {
    if (!obj.contains(std::string(k))) {
      throw ParseError(std::string(where) + ": missing key '" + std::string(k) + "'");
    }
  }
}

const json& at(const json& obj, std::string_view key) { return obj.at(std::string(key)); }

int read_int(const json& v, std::string_view field) {
  if (!v.is_number_integer()) {
    throw ParseError(std::string(field) + ": expected integer");
  }
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
      throw ValidationError(std::string(field) + ": out of range");
    }
    return static_cast<int>(u);
  }
  const auto i = v.get<std::int64_t>();
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
    throw ValidationError(std::string(field) + ": out of range");
  }
  return static_cast<int>(i);
}

std::optional<int> read_opt_int(const json& v, std::string_view field) {
  if (v.is_null()) return std::nullopt;
  return read_int(v, field);
}

std::optional<double> read_opt_real(const json& v, std::string_view field) {
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw ParseError(std::string(field) + ": expected number");
  return v.get<double>();
}

void require_positive(const std::optional<int>& v, const char* field) {
  if (v && *v <= 0) throw ValidationError(std::string(field) + " must be positive");
}

void require_non_negative(const std::optional<double>& v, const char* field) {
  if (v && (!std::isfinite(*v) || *v < 0.0)) {
    throw ValidationError(std::string(field) + " must be finite and non-negative");
  }
}

}  // namespace

std::string_view to_string(Platform p) {
  for (auto [value, name] : kPlatformNames) {
    if (value == p) return name;
  }
  return "Other";
}

std::string_view to_string(Browser b) {
  for (auto [value, name] : kBrowserNames) {
    if (value == b) return name;
  }
  return "Other";
}

std::string_view to_string(SessionLabel l) {
  for (auto [value, name] : kLabelNames) {
    if (value == l) return name;
  }
  return "bonafide";
}

std::string_view to_string(BinaryLabel l) {
  return l == BinaryLabel::Attack ? "attack" : "bonafide";
}

Platform platform_from_string(std::string_view s) {
  for (auto [value, name] : kPlatformNames) {
    if (name == s) return value;
  }
  return Platform::Other;
}

Browser browser_from_string(std::string_view s) {
  for (auto [value, name] : kBrowserNames) {
    if (name == s) return value;
  }
  return Browser::Other;
}

std::optional<SessionLabel> session_label_from_string(std::string_view s) {
  for (auto [value, name] : kLabelNames) {
    if (name == s) return value;
  }
  return std::nullopt;
}

void validate(const SessionRecord& record) {
  for (const auto& t : record.height_tests) {
    if (t.requested_height <= 0) throw ValidationError("requested_height must be positive");
    require_positive(t.reported_height, "reported_height");
    require_positive(t.actual_height, "actual_height");
    require_positive(t.reported_width, "reported_width");
    require_positive(t.actual_width, "actual_width");
    require_non_negative(t.apply_time_ms, "apply_time_ms");
  }
  for (const auto& t : record.fps_tests) {
    if (t.requested_fps <= 0) throw ValidationError("requested_fps must be positive");
    require_non_negative(t.reported_fps, "reported_fps");
    require_non_negative(t.actual_fps, "actual_fps");
    require_non_negative(t.apply_time_ms, "apply_time_ms");
  }
}

std::string serialize_session(const SessionRecord& record) {
  ordered_json out;
  out["schema_version"] = kSessionSchemaVersion;
  out["session_id"] = record.session_id;
  out["platform"] = to_string(record.platform);
  out["browser"] = to_string(record.browser);
  out["camera_label"] = opt(record.camera_label);
  out["label"] = record.label ? ordered_json(to_string(*record.label)) : ordered_json(nullptr);

  auto heights = ordered_json::array();
  for (const auto& t : record.height_tests) {
    ordered_json e;
    e["requested_height"] = t.requested_height;
    e["reported_width"] = opt(t.reported_width);
    e["reported_height"] = opt(t.reported_height);
    e["actual_width"] = opt(t.actual_width);
    e["actual_height"] = opt(t.actual_height);
    e["apply_time_ms"] = opt(t.apply_time_ms);
    heights.push_back(std::move(e));
  }
  out["height_tests"] = std::move(heights);

  auto fps = ordered_json::array();
  for (const auto& t : record.fps_tests) {
    ordered_json e;
    e["requested_fps"] = t.requested_fps;
    e["reported_fps"] = opt(t.reported_fps);
    e["actual_fps"] = opt(t.actual_fps);
    e["apply_time_ms"] = opt(t.apply_time_ms);
    fps.push_back(std::move(e));
  }
  out["fps_tests"] = std::move(fps);
  return out.dump();
}

SessionRecord parse_session(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed session JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("session: expected object");
  if (!doc.contains("schema_version")) throw ParseError("session: missing schema_version");
  const auto& version = doc["schema_version"];
  if (!version.is_number_integer() || version.get<std::int64_t>() != kSessionSchemaVersion) {
    throw VersionError("unsupported session schema_version " + version.dump());
  }
  check_keys(doc, kTopLevelKeys, "session");

  SessionRecord r;
  const auto& id = doc["session_id"];
  if (!id.is_string()) throw ParseError("session_id: expected string");
  r.session_id = id.get<std::string>();

  const auto& platform = doc["platform"];
  const auto& browser = doc["browser"];
  if (!platform.is_string()) throw ParseError("platform: expected string");
  if (!browser.is_string()) throw ParseError("browser: expected string");
  r.platform = platform_from_string(platform.get<std::string>());
  r.browser = browser_from_string(browser.get<std::string>());

  const auto& cam = doc["camera_label"];
  if (!cam.is_null()) {
    if (!cam.is_string()) throw ParseError("camera_label: expected string or null");
    r.camera_label = cam.get<std::string>();
  }
  const auto& label = doc["label"];
  if (!label.is_null()) {
    if (!label.is_string()) throw ParseError("label: expected string or null");
    r.label = session_label_from_string(label.get<std::string>());
    if (!r.label) throw ValidationError("label: unknown value '" + label.get<std::string>() + "'");
  }

  const auto& heights = doc["height_tests"];
  if (!heights.is_array()) throw ParseError("height_tests: expected array");
  for (const auto& e : heights) {
    check_keys(e, kHeightKeys, "height_tests[]");
    HeightChallengeResult t;
    t.requested_height = read_int(at(e, "requested_height"), "requested_height");
    t.reported_width = read_opt_int(at(e, "reported_width"), "reported_width");
    t.reported_height = read_opt_int(at(e, "reported_height"), "reported_height");
    t.actual_width = read_opt_int(at(e, "actual_width"), "actual_width");
    t.actual_height = read_opt_int(at(e, "actual_height"), "actual_height");
    t.apply_time_ms = read_opt_real(at(e, "apply_time_ms"), "apply_time_ms");
    r.height_tests.push_back(t);
  }

  const auto& fps = doc["fps_tests"];
  if (!fps.is_array()) throw ParseError("fps_tests: expected array");
  for (const auto& e : fps) {
    check_keys(e, kFpsKeys, "fps_tests[]");
    FpsChallengeResult t;
    t.requested_fps = read_int(at(e, "requested_fps"), "requested_fps");
    t.reported_fps = read_opt_real(at(e, "reported_fps"), "reported_fps");
    t.actual_fps = read_opt_real(at(e, "actual_fps"), "actual_fps");
    t.apply_time_ms = read_opt_real(at(e, "apply_time_ms"), "apply_time_ms");
    r.fps_tests.push_back(t);
  }

  validate(r);
  return r;
}

void write_dataset(std::ostream& out, const std::vector<SessionRecord>& records) {
  for (const auto& r : records) out << serialize_session(r) << '\n';
}

void write_dataset_file(const std::string& path, const std::vector<SessionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(out, records);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<SessionRecord> read_dataset(std::istream& in) {
  std::vector<SessionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(parse_session(line));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const VersionError& e) {
      throw VersionError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<SessionRecord> read_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_dataset(in);
}

}  // namespace vcd
