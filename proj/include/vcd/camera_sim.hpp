#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vcd/probe.hpp"
#include "vcd/rng.hpp"
#include "vcd/session.hpp"

namespace vcd {

struct Resolution {
  int width = 0;
  int height = 0;
  bool operator==(const Resolution&) const = default;
};

enum class CameraKind { Physical, VirtualStatic, VirtualFaceswap };

// How a camera ended up answering one challenge. Timing is drawn per class.
enum class OutcomeClass : int {
  HonoredStandard = 0,
  HonoredNonstandard = 1,
  Capped = 2,
  ImplicitModification = 3,
};
inline constexpr int kOutcomeClassCount = 4;

struct Latency {
  double median_ms = 1.0;
  double dispersion = 0.3;  // sigma of log(latency)
};

struct TimingModel {
  std::array<Latency, kOutcomeClassCount> height{};
  std::array<Latency, kOutcomeClassCount> fps{};
};

// Answers to height requests that are not listed in the mode table.
// Requests above `cap.height` deliver `cap`; heights matching a standard mode
// deliver that mode; everything else is scaled to `aspect`.
struct ResolutionRule {
  Resolution cap;
  double aspect = 16.0 / 9.0;
  std::vector<Resolution> standard_modes;
};

// Rates up to `cap_fps` are honored (listed ones natively, the rest by frame
// decimation); higher rates deliver `cap_fps`.
struct FpsRule {
  double cap_fps = 30.0;
  std::vector<int> standard_rates;
};

struct ModeEntry {
  Resolution reported;
  Resolution actual;
  // What the camera claims instead of `reported` on an implicit modification.
  Resolution claimed;
  OutcomeClass outcome = OutcomeClass::HonoredStandard;
  std::optional<double> pinned_median_ms;
};

struct FpsEntry {
  double reported = 0.0;
  double actual = 0.0;
  double claimed = 0.0;
  OutcomeClass outcome = OutcomeClass::HonoredStandard;
  std::optional<double> pinned_median_ms;
};

struct CameraProfile {
  std::string name;
  CameraKind kind = CameraKind::Physical;
  ResolutionRule resolution;
  FpsRule fps;
  std::map<int, ModeEntry> mode_table;
  std::map<int, FpsEntry> fps_table;
  TimingModel timing;
  // Probability that a capped challenge reports the claimed value while
  // delivering the cap.
  double implicit_mod_prob = 0.0;
  double failure_prob = 0.0;
  // Relative noise of the frame-count FPS measurement.
  double fps_noise = 0.0;
  // Probability that delivered FPS falls short of the configured rate
  // (low light, processing load) and the factor applied when it does.
  double fps_shortfall_prob = 0.0;
  double fps_shortfall_factor = 1.0;
};

ModeEntry resolve_height(const ResolutionRule& rule, int requested_height);
FpsEntry resolve_fps(const FpsRule& rule, int requested_fps);

// Fills mode_table / fps_table for every request of `plan` not already
// present, using the profile's rules.
void materialize_tables(CameraProfile& profile, const ChallengePlan& plan);

// Throws ConfigError if probabilities leave [0,1], a median is not positive,
// or the tables do not cover the default plan.
void validate(const CameraProfile& profile);

// Reference profiles calibrated to the two example sessions: a physical
// 1080p camera and an OBS virtual camera capped at 640x360.
CameraProfile reference_physical_profile();
CameraProfile reference_obs_profile();

// Randomized profile families; draw all parameters from `rng`.
CameraProfile random_physical_profile(Rng& rng);
CameraProfile random_virtual_static_profile(Rng& rng);
CameraProfile random_faceswap_profile(Rng& rng);

// Looks up "table4_physical", "table5_obs", "physical_random",
// "virtual_static_random" or "virtual_faceswap_random".
CameraProfile profile_from_template(std::string_view name, Rng& rng);
bool is_known_template(std::string_view name);

// Deterministic simulated camera for (profile, seed).
class SimulatedCamera final : public Camera {
 public:
  SimulatedCamera(CameraProfile profile, std::uint64_t seed);

  bool available() override { return true; }
  std::optional<HeightResponse> apply_height(int requested_height) override;
  std::optional<FpsResponse> apply_fps(int requested_fps) override;

  const CameraProfile& profile() const { return profile_; }

 private:
  double draw_latency(const Latency& latency, const std::optional<double>& pinned);

  CameraProfile profile_;
  Rng rng_;
};

std::unique_ptr<Camera> sample_camera(const CameraProfile& profile, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Population sampling

struct PopulationCell {
  Platform platform = Platform::Other;
  Browser browser = Browser::Other;
  SessionLabel label = SessionLabel::Bonafide;
  double weight = 0.0;
};

struct ProfileSource {
  std::string template_name;
  double weight = 1.0;
  // Device label reported by the browser when not obfuscated.
  std::optional<std::string> camera_label;
  double label_reveal_prob = 0.0;
};

struct PopulationSpec {
  std::vector<PopulationCell> cells;
  std::map<SessionLabel, std::vector<ProfileSource>> pools;
  std::uint64_t seed = 0;
  ChallengePlan plan;
};

// Cell weights from the platform/browser/label counts of the reference
// dataset (30,000 bonafide, 2,812 attacks). Attack cells are divided between
// static and face-swap attacks by `faceswap_share`.
PopulationSpec reference_population(std::uint64_t seed, double faceswap_share = 0.25);

void validate(const PopulationSpec& spec);
std::string population_to_json(const PopulationSpec& spec);
PopulationSpec population_from_json(std::string_view text);
PopulationSpec load_population_file(const std::string& path);

// Session `index` of the population; depends only on (spec, index).
SessionRecord generate_session(const PopulationSpec& spec, std::uint64_t index);

// Exactly n labeled sessions, ordered by index. Parallel over sessions; the
// output does not depend on the thread count.
std::vector<SessionRecord> generate_dataset(const PopulationSpec& spec, std::size_t n_sessions);

}  // namespace vcd
