#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vcd/camera_sim.hpp"
#include "vcd/error.hpp"

namespace vcd {
namespace {

struct PopulationRow {
  Platform platform;
  Browser browser;
  int attacks;
  int bonafide;
};

// Platform/browser distribution of the reference dataset.
constexpr PopulationRow kPopulationRows[] = {
    {Platform::Android, Browser::Chrome, 923, 20819},
    {Platform::Android, Browser::Firefox, 131, 301},
    {Platform::Android, Browser::Other, 12, 1949},
    {Platform::iOS, Browser::Safari, 155, 3815},
    {Platform::iOS, Browser::Chrome, 0, 103},
    {Platform::iOS, Browser::Other, 0, 140},
    {Platform::Linux, Browser::Chrome, 116, 3},
    {Platform::Linux, Browser::Firefox, 94, 6},
    {Platform::Linux, Browser::Other, 15, 0},
    {Platform::MacIntel, Browser::Chrome, 125, 368},
    {Platform::MacIntel, Browser::Safari, 32, 124},
    {Platform::MacIntel, Browser::Firefox, 23, 6},
    {Platform::MacIntel, Browser::Other, 1, 125},
    {Platform::Win32, Browser::Chrome, 883, 1994},
    {Platform::Win32, Browser::Firefox, 264, 95},
    {Platform::Win32, Browser::Other, 38, 152},
};

// Generic labels seen when the device name is hidden or obfuscated.
const std::vector<std::optional<std::string>> kObfuscatedLabels{
    std::nullopt, "front", "back", "USB Camera", "Integrated Webcam"};

std::optional<std::string> draw_camera_label(const ProfileSource& source, Rng& rng) {
  if (source.camera_label && rng.bernoulli(source.label_reveal_prob)) return source.camera_label;
  const auto i = static_cast<std::size_t>(rng.uniform_int(0, kObfuscatedLabels.size() - 1));
  return kObfuscatedLabels[i];
}

std::string session_id_for(std::uint64_t seed, std::uint64_t index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "sim-%016llx-%08llu", static_cast<unsigned long long>(seed),
                static_cast<unsigned long long>(index));
  return buf;
}

}  // namespace

PopulationSpec reference_population(std::uint64_t seed, double faceswap_share) {
  PopulationSpec spec;
  spec.seed = seed;
  for (const auto& row : kPopulationRows) {
    spec.cells.push_back({row.platform, row.browser, SessionLabel::Bonafide,
                          static_cast<double>(row.bonafide)});
    spec.cells.push_back({row.platform, row.browser, SessionLabel::AttackStatic,
                          row.attacks * (1.0 - faceswap_share)});
    spec.cells.push_back({row.platform, row.browser, SessionLabel::AttackFaceswap,
                          row.attacks * faceswap_share});
  }
  spec.pools[SessionLabel::Bonafide] = {
      {"table4_physical", 0.05, std::nullopt, 0.0},
      {"physical_random", 0.95, std::nullopt, 0.0},
  };
  // Static-attack software mix follows the identified virtual camera counts.
  spec.pools[SessionLabel::AttackStatic] = {
      {"table5_obs", 0.10, "OBS Virtual Camera", 0.26},
      {"virtual_static_random", 0.25, "OBS Virtual Camera", 0.26},
      {"virtual_static_random", 0.30, "SplitCam Video Driver", 0.26},
      {"virtual_static_random", 0.26, "ManyCam Virtual Webcam", 0.26},
      {"virtual_static_random", 0.09, "Iriun Webcam", 0.26},
  };
  spec.pools[SessionLabel::AttackFaceswap] = {
      {"virtual_faceswap_random", 1.0, "ManyCam Virtual Webcam", 0.26},
  };
  return spec;
}

void validate(const PopulationSpec& spec) {
  if (spec.cells.empty()) throw ConfigError("population has no cells");
  std::map<SessionLabel, double> label_mass;
  for (const auto& cell : spec.cells) {
    if (!(cell.weight >= 0.0) || !std::isfinite(cell.weight)) {
      throw ConfigError("cell weights must be finite and non-negative");
    }
    label_mass[cell.label] += cell.weight;
  }
  bool any_positive = false;
  for (const auto& [label, mass] : label_mass) {
    if (mass <= 0.0) continue;
    any_positive = true;
    auto pool = spec.pools.find(label);
    if (pool == spec.pools.end() || pool->second.empty()) {
      throw ConfigError("no profile pool for label '" + std::string(to_string(label)) + "'");
    }
    double pool_mass = 0.0;
    for (const auto& source : pool->second) {
      if (!is_known_template(source.template_name)) {
        throw ConfigError("unknown camera profile template '" + source.template_name + "'");
      }
      if (!(source.weight >= 0.0)) throw ConfigError("profile weights must be non-negative");
      if (!(source.label_reveal_prob >= 0.0 && source.label_reveal_prob <= 1.0)) {
        throw ConfigError("label_reveal_prob must lie in [0,1]");
      }
      pool_mass += source.weight;
    }
    if (pool_mass <= 0.0) throw ConfigError("profile pool has no positive weight");
  }
  if (!any_positive) throw ConfigError("population has no positive cell");
  validate(spec.plan);
}

std::string population_to_json(const PopulationSpec& spec) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSessionSchemaVersion;
  j["seed"] = spec.seed;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : spec.cells) {
    nlohmann::ordered_json e;
    e["platform"] = to_string(c.platform);
    e["browser"] = to_string(c.browser);
    e["label"] = to_string(c.label);
    e["weight"] = c.weight;
    cells.push_back(std::move(e));
  }
  j["cells"] = std::move(cells);
  nlohmann::ordered_json pools;
  for (const auto& [label, sources] : spec.pools) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : sources) {
      nlohmann::ordered_json e;
      e["template"] = s.template_name;
      e["weight"] = s.weight;
      e["camera_label"] = s.camera_label ? nlohmann::ordered_json(*s.camera_label)
                                         : nlohmann::ordered_json(nullptr);
      e["label_reveal_prob"] = s.label_reveal_prob;
      arr.push_back(std::move(e));
    }
    pools[std::string(to_string(label))] = std::move(arr);
  }
  j["pools"] = std::move(pools);
  nlohmann::ordered_json plan;
  plan["height_requests"] = spec.plan.height_requests;
  plan["fps_requests"] = spec.plan.fps_requests;
  plan["per_challenge_timeout_ms"] = spec.plan.per_challenge_timeout_ms;
  j["plan"] = std::move(plan);
  return j.dump(2);
}

PopulationSpec population_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed population JSON: ") + e.what());
  }
  PopulationSpec spec;
  try {
    if (j.value("schema_version", kSessionSchemaVersion) != kSessionSchemaVersion) {
      throw VersionError("population schema_version mismatch");
    }
    spec.seed = j.value("seed", std::uint64_t{0});
    for (const auto& c : j.at("cells")) {
      PopulationCell cell;
      cell.platform = platform_from_string(c.at("platform").get<std::string>());
      cell.browser = browser_from_string(c.at("browser").get<std::string>());
      const auto label = session_label_from_string(c.at("label").get<std::string>());
      if (!label) throw ConfigError("unknown label in population cell");
      cell.label = *label;
      cell.weight = c.at("weight").get<double>();
      spec.cells.push_back(cell);
    }
    for (const auto& item : j.at("pools").items()) {
      const auto label = session_label_from_string(item.key());
      if (!label) throw ConfigError("unknown pool label '" + item.key() + "'");
      auto& pool = spec.pools[*label];
      for (const auto& s : item.value()) {
        ProfileSource source;
        source.template_name = s.at("template").get<std::string>();
        source.weight = s.value("weight", 1.0);
        if (s.contains("camera_label") && !s["camera_label"].is_null()) {
          source.camera_label = s["camera_label"].get<std::string>();
        }
        source.label_reveal_prob = s.value("label_reveal_prob", 0.0);
        pool.push_back(std::move(source));
      }
    }
    if (j.contains("plan")) {
      const auto& p = j["plan"];
      spec.plan.height_requests = p.value("height_requests", spec.plan.height_requests);
      spec.plan.fps_requests = p.value("fps_requests", spec.plan.fps_requests);
      spec.plan.per_challenge_timeout_ms =
          p.value("per_challenge_timeout_ms", spec.plan.per_challenge_timeout_ms);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("population: ") + e.what());
  }
  validate(spec);
  return spec;
}

PopulationSpec load_population_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open population spec '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return population_from_json(ss.str());
}

SessionRecord generate_session(const PopulationSpec& spec, std::uint64_t index) {
  Rng rng(derive_seed(spec.seed, index));

  std::vector<double> cell_weights;
  cell_weights.reserve(spec.cells.size());
  for (const auto& c : spec.cells) cell_weights.push_back(c.weight);
  const auto& cell = spec.cells[rng.categorical(cell_weights)];

  const auto& pool = spec.pools.at(cell.label);
  std::vector<double> source_weights;
  for (const auto& s : pool) source_weights.push_back(s.weight);
  const auto& source = pool[rng.categorical(source_weights)];

  CameraProfile profile = profile_from_template(source.template_name, rng);
  materialize_tables(profile, spec.plan);

  SessionContext ctx;
  ctx.session_id = session_id_for(spec.seed, index);
  ctx.platform = cell.platform;
  ctx.browser = cell.browser;
  ctx.camera_label = draw_camera_label(source, rng);
  ctx.label = cell.label;

  SimulatedCamera camera(std::move(profile), rng.next_u64());
  return run_protocol(camera, spec.plan, ctx);
}

std::vector<SessionRecord> generate_dataset(const PopulationSpec& spec, std::size_t n_sessions) {
  if (n_sessions == 0) throw ConfigError("n_sessions must be positive");
  validate(spec);
  std::vector<SessionRecord> out(n_sessions);
  const auto n = static_cast<std::int64_t>(n_sessions);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = generate_session(spec, static_cast<std::uint64_t>(i));
  }
  return out;
}

}  // namespace vcd
