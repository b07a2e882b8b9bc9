#include "vcd/camera_sim.hpp"

#include <algorithm>
#include <cmath>

#include "vcd/error.hpp"

namespace vcd {
namespace {

int scaled_width(int height, double aspect) {
  return std::max(1, static_cast<int>(std::lround(height * aspect)));
}

// Browser timers are exposed at 0.1 ms resolution.
double quantize_ms(double ms) { return std::round(ms * 10.0) / 10.0; }

Latency latency(Rng& rng, double median_lo, double median_hi, double disp_lo, double disp_hi) {
  return Latency{rng.uniform(median_lo, median_hi), rng.uniform(disp_lo, disp_hi)};
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& values, const std::vector<double>& weights) {
  return values[rng.categorical(weights)];
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0,1]");
}

void check_latencies(const std::array<Latency, kOutcomeClassCount>& classes) {
  for (const auto& l : classes) {
    if (!(l.median_ms > 0.0)) throw ConfigError("timing medians must be positive");
    if (!(l.dispersion >= 0.0)) throw ConfigError("timing dispersion must be non-negative");
  }
}

}  // namespace

ModeEntry resolve_height(const ResolutionRule& rule, int requested_height) {
  ModeEntry e;
  e.claimed = Resolution{scaled_width(requested_height, rule.aspect), requested_height};
  if (requested_height > rule.cap.height) {
    e.actual = rule.cap;
    e.outcome = OutcomeClass::Capped;
  } else if (requested_height == rule.cap.height) {
    e.actual = rule.cap;
    e.outcome = OutcomeClass::HonoredStandard;
  } else {
    auto mode = std::find_if(rule.standard_modes.begin(), rule.standard_modes.end(),
                             [&](const Resolution& r) { return r.height == requested_height; });
    if (mode != rule.standard_modes.end()) {
      e.actual = *mode;
      e.outcome = OutcomeClass::HonoredStandard;
    } else {
      e.actual = e.claimed;
      e.outcome = OutcomeClass::HonoredNonstandard;
    }
  }
  e.reported = e.actual;
  return e;
}

FpsEntry resolve_fps(const FpsRule& rule, int requested_fps) {
  FpsEntry e;
  e.claimed = requested_fps;
  if (requested_fps > rule.cap_fps) {
    e.actual = rule.cap_fps;
    e.outcome = OutcomeClass::Capped;
  } else {
    e.actual = requested_fps;
    const bool native = std::find(rule.standard_rates.begin(), rule.standard_rates.end(),
                                  requested_fps) != rule.standard_rates.end();
    e.outcome = native ? OutcomeClass::HonoredStandard : OutcomeClass::HonoredNonstandard;
  }
  e.reported = e.actual;
  return e;
}

void materialize_tables(CameraProfile& profile, const ChallengePlan& plan) {
  for (int h : plan.height_requests) {
    if (!profile.mode_table.contains(h)) profile.mode_table[h] = resolve_height(profile.resolution, h);
  }
  for (int f : plan.fps_requests) {
    if (!profile.fps_table.contains(f)) profile.fps_table[f] = resolve_fps(profile.fps, f);
  }
}

void validate(const CameraProfile& profile) {
  check_probability(profile.implicit_mod_prob, "implicit_mod_prob");
  check_probability(profile.failure_prob, "failure_prob");
  check_probability(profile.fps_shortfall_prob, "fps_shortfall_prob");
  check_latencies(profile.timing.height);
  check_latencies(profile.timing.fps);
  if (profile.resolution.cap.width <= 0 || profile.resolution.cap.height <= 0) {
    throw ConfigError("resolution cap must be positive");
  }
  if (!(profile.fps.cap_fps > 0.0)) throw ConfigError("fps cap must be positive");
  if (!(profile.fps_noise >= 0.0)) throw ConfigError("fps_noise must be non-negative");
  if (!(profile.fps_shortfall_factor > 0.0 && profile.fps_shortfall_factor <= 1.0)) {
    throw ConfigError("fps_shortfall_factor must lie in (0,1]");
  }
  const ChallengePlan defaults;
  for (int h : defaults.height_requests) {
    if (!profile.mode_table.contains(h)) {
      throw ConfigError("mode_table does not cover height " + std::to_string(h));
    }
  }
  for (int f : defaults.fps_requests) {
    if (!profile.fps_table.contains(f)) {
      throw ConfigError("fps_table does not cover rate " + std::to_string(f));
    }
  }
  for (const auto& [h, e] : profile.mode_table) {
    if (e.pinned_median_ms && !(*e.pinned_median_ms > 0.0)) {
      throw ConfigError("pinned medians must be positive");
    }
  }
}

CameraProfile reference_physical_profile() {
  CameraProfile p;
  p.name = "table4_physical";
  p.kind = CameraKind::Physical;
  p.resolution = ResolutionRule{{1920, 1080}, 16.0 / 9.0, {{320, 240}, {640, 480}, {1280, 720}}};
  p.fps = FpsRule{30.0, {15, 24, 30}};
  p.timing.height = {Latency{93.0, 0.1}, Latency{60.0, 0.1}, Latency{1.7, 0.1}, Latency{1.7, 0.1}};
  p.timing.fps = {Latency{40.0, 0.1}, Latency{3.0, 0.1}, Latency{25.0, 0.1}, Latency{25.0, 0.1}};
  p.fps_noise = 0.02;
  materialize_tables(p, ChallengePlan{});
  const std::array<std::pair<int, double>, 6> pins{
      {{11, 210.0}, {22, 1.9}, {240, 94.5}, {640, 91.7}, {1001, 92.2}, {3001, 1.7}}};
  for (auto [h, ms] : pins) p.mode_table[h].pinned_median_ms = ms;
  return p;
}

CameraProfile reference_obs_profile() {
  CameraProfile p;
  p.name = "table5_obs";
  p.kind = CameraKind::VirtualStatic;
  p.resolution = ResolutionRule{{640, 360}, 16.0 / 9.0, {}};
  p.fps = FpsRule{30.0, {}};
  p.timing.height.fill(Latency{1.3, 0.1});
  p.timing.fps.fill(Latency{1.2, 0.1});
  p.fps_noise = 0.005;
  materialize_tables(p, ChallengePlan{});
  const std::array<std::pair<int, double>, 6> pins{
      {{11, 0.8}, {22, 1.3}, {240, 1.6}, {640, 1.6}, {1001, 1.2}, {3001, 1.3}}};
  for (auto [h, ms] : pins) p.mode_table[h].pinned_median_ms = ms;
  return p;
}

CameraProfile random_physical_profile(Rng& rng) {
  CameraProfile p;
  p.name = "physical_random";
  p.kind = CameraKind::Physical;
  const double aspect = rng.bernoulli(0.7) ? 16.0 / 9.0 : 4.0 / 3.0;
  const int cap_h = pick(rng, std::vector<int>{480, 720, 1080, 1440, 2160},
                         {0.10, 0.35, 0.45, 0.05, 0.05});
  p.resolution.cap = Resolution{scaled_width(cap_h, aspect), cap_h};
  p.resolution.aspect = aspect;
  for (Resolution mode : {Resolution{320, 240}, Resolution{640, 480}, Resolution{640, 360},
                          Resolution{1280, 720}}) {
    if (mode.height < cap_h && rng.bernoulli(0.8)) p.resolution.standard_modes.push_back(mode);
  }
  const double cap_fps = rng.bernoulli(0.75) ? 30.0 : 60.0;
  p.fps.cap_fps = cap_fps;
  p.fps.standard_rates = {15, 24, 30};
  if (cap_fps >= 60.0) p.fps.standard_rates.push_back(60);

  auto& h = p.timing.height;
  h[0] = latency(rng, 50.0, 130.0, 0.2, 0.5);
  h[1] = latency(rng, 20.0, 120.0, 0.8, 1.4);
  h[2] = latency(rng, 1.5, 8.0, 0.4, 0.9);
  h[3] = h[2];
  auto& f = p.timing.fps;
  f[0] = latency(rng, 20.0, 80.0, 0.3, 0.6);
  f[1] = latency(rng, 1.0, 6.0, 0.5, 0.9);
  f[2] = latency(rng, 10.0, 50.0, 0.4, 0.8);
  f[3] = f[2];

  p.implicit_mod_prob = rng.uniform(0.0, 0.05);
  p.failure_prob = rng.uniform(0.0, 0.02);
  p.fps_noise = rng.uniform(0.01, 0.04);
  p.fps_shortfall_prob = rng.uniform(0.0, 0.3);
  p.fps_shortfall_factor = rng.uniform(0.5, 0.8);
  materialize_tables(p, ChallengePlan{});
  return p;
}

CameraProfile random_virtual_static_profile(Rng& rng) {
  CameraProfile p;
  p.name = "virtual_static_random";
  p.kind = CameraKind::VirtualStatic;
  const Resolution cap = pick(rng,
                              std::vector<Resolution>{{640, 360}, {640, 480}, {1280, 720},
                                                      {1920, 1080}},
                              {0.25, 0.15, 0.4, 0.2});
  p.resolution.cap = cap;
  p.resolution.aspect = static_cast<double>(cap.width) / cap.height;
  p.fps.cap_fps = pick(rng, std::vector<double>{30.0, 60.0, 25.0}, {0.7, 0.2, 0.1});

  // Most virtual drivers reconfigure in about a millisecond; some software
  // pipelines add a few tens of milliseconds.
  const bool slow = rng.bernoulli(0.2);
  const double base = slow ? rng.uniform(4.0, 25.0) : rng.uniform(0.6, 2.5);
  const double disp_hi = slow ? 0.7 : 0.5;
  for (auto* classes : {&p.timing.height, &p.timing.fps}) {
    for (auto& l : *classes) {
      l = Latency{base * rng.uniform(0.8, 1.25), rng.uniform(0.15, disp_hi)};
    }
  }

  p.implicit_mod_prob = rng.uniform(0.0, 0.8);
  p.failure_prob = rng.uniform(0.0, 0.02);
  p.fps_noise = rng.uniform(0.005, 0.02);
  p.fps_shortfall_prob = rng.uniform(0.0, 0.1);
  p.fps_shortfall_factor = rng.uniform(0.7, 0.95);
  materialize_tables(p, ChallengePlan{});
  return p;
}

CameraProfile random_faceswap_profile(Rng& rng) {
  CameraProfile p;
  p.name = "virtual_faceswap_random";
  p.kind = CameraKind::VirtualFaceswap;
  const Resolution cap =
      pick(rng, std::vector<Resolution>{{640, 480}, {1280, 720}}, {0.4, 0.6});
  p.resolution.cap = cap;
  p.resolution.aspect = static_cast<double>(cap.width) / cap.height;
  p.fps.cap_fps = pick(rng, std::vector<double>{15.0, 20.0, 25.0, 30.0}, {0.2, 0.3, 0.2, 0.3});

  // Frames come from a real camera, so honored reconfigurations inherit
  // hardware latency; capped requests never reach the hardware.
  auto& h = p.timing.height;
  h[0] = latency(rng, 25.0, 90.0, 0.5, 0.9);
  h[1] = latency(rng, 25.0, 90.0, 0.5, 0.9);
  h[2] = latency(rng, 0.8, 3.0, 0.2, 0.4);
  h[3] = h[2];
  auto& f = p.timing.fps;
  f[0] = latency(rng, 15.0, 60.0, 0.4, 0.8);
  f[1] = latency(rng, 15.0, 60.0, 0.4, 0.8);
  f[2] = latency(rng, 1.0, 3.0, 0.2, 0.4);
  f[3] = f[2];

  p.implicit_mod_prob = rng.uniform(0.0, 0.5);
  p.failure_prob = rng.uniform(0.0, 0.03);
  p.fps_noise = rng.uniform(0.02, 0.06);
  p.fps_shortfall_prob = rng.uniform(0.3, 0.8);
  p.fps_shortfall_factor = rng.uniform(0.6, 0.9);
  materialize_tables(p, ChallengePlan{});
  return p;
}

bool is_known_template(std::string_view name) {
  return name == "table4_physical" || name == "table5_obs" || name == "physical_random" ||
         name == "virtual_static_random" || name == "virtual_faceswap_random";
}

CameraProfile profile_from_template(std::string_view name, Rng& rng) {
  if (name == "table4_physical") return reference_physical_profile();
  if (name == "table5_obs") return reference_obs_profile();
  if (name == "physical_random") return random_physical_profile(rng);
  if (name == "virtual_static_random") return random_virtual_static_profile(rng);
  if (name == "virtual_faceswap_random") return random_faceswap_profile(rng);
  throw ConfigError("unknown camera profile template '" + std::string(name) + "'");
}

SimulatedCamera::SimulatedCamera(CameraProfile profile, std::uint64_t seed)
    : profile_(std::move(profile)), rng_(seed) {}

double SimulatedCamera::draw_latency(const Latency& latency, const std::optional<double>& pinned) {
  const double median = pinned.value_or(latency.median_ms);
  return quantize_ms(rng_.lognormal(median, latency.dispersion));
}

std::optional<HeightResponse> SimulatedCamera::apply_height(int requested_height) {
  // The failure draw happens first and unconditionally so the stream of
  // random numbers does not depend on earlier outcomes.
  const bool failed = rng_.bernoulli(profile_.failure_prob);
  const bool implicit = rng_.bernoulli(profile_.implicit_mod_prob);
  auto it = profile_.mode_table.find(requested_height);
  const ModeEntry entry = it != profile_.mode_table.end()
                              ? it->second
                              : resolve_height(profile_.resolution, requested_height);
  OutcomeClass outcome = entry.outcome;
  Resolution reported = entry.reported;
  if (outcome == OutcomeClass::Capped && implicit) {
    outcome = OutcomeClass::ImplicitModification;
    reported = entry.claimed;
  }
  const double elapsed =
      draw_latency(profile_.timing.height[static_cast<int>(outcome)], entry.pinned_median_ms);
  if (failed) return std::nullopt;
  HeightResponse r;
  r.reported_width = reported.width;
  r.reported_height = reported.height;
  r.actual_width = entry.actual.width;
  r.actual_height = entry.actual.height;
  r.elapsed_ms = elapsed;
  return r;
}

std::optional<FpsResponse> SimulatedCamera::apply_fps(int requested_fps) {
  const bool failed = rng_.bernoulli(profile_.failure_prob);
  const bool implicit = rng_.bernoulli(profile_.implicit_mod_prob);
  const bool shortfall = rng_.bernoulli(profile_.fps_shortfall_prob);
  const double noise = rng_.normal();
  auto it = profile_.fps_table.find(requested_fps);
  const FpsEntry entry =
      it != profile_.fps_table.end() ? it->second : resolve_fps(profile_.fps, requested_fps);
  OutcomeClass outcome = entry.outcome;
  double reported = entry.reported;
  if (outcome == OutcomeClass::Capped && implicit) {
    outcome = OutcomeClass::ImplicitModification;
    reported = entry.claimed;
  }
  const double elapsed =
      draw_latency(profile_.timing.fps[static_cast<int>(outcome)], entry.pinned_median_ms);
  if (failed) return std::nullopt;

  // Delivered frames counted over a one-second window.
  double delivered = entry.actual;
  if (shortfall && delivered >= 15.0) delivered *= profile_.fps_shortfall_factor;
  delivered = std::max(0.0, std::round(delivered * (1.0 + profile_.fps_noise * noise)));

  FpsResponse r;
  r.reported_fps = reported;
  r.actual_fps = delivered;
  r.elapsed_ms = elapsed;
  return r;
}

std::unique_ptr<Camera> sample_camera(const CameraProfile& profile, std::uint64_t seed) {
  validate(profile);
  return std::make_unique<SimulatedCamera>(profile, seed);
}

}  // namespace vcd
