#include "vcd/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <utility>

namespace vcd {
namespace {

constexpr const char* kHeightFields[] = {
    "reported_height", "actual_height", "reported_width", "actual_width",  "apply_ms",
    "height_ratio",    "honored",       "implicit_mod",   "aspect_ratio"};
constexpr std::size_t kPerHeight = std::size(kHeightFields);

constexpr const char* kFpsFields[] = {"reported_fps", "actual_fps", "apply_ms", "honored",
                                      "implicit_mod"};
constexpr std::size_t kPerFps = std::size(kFpsFields);

constexpr const char* kAggregateFields[] = {
    "implicit_mod_count", "honored_count",  "distinct_actual_resolutions",
    "max_actual_height",  "height_ms_mean", "height_ms_std",
    "height_ms_min",      "height_ms_max",  "height_ms_range",
    "fps_ms_mean",        "fps_ms_std",     "fps_ms_min",
    "fps_ms_max",         "fps_ms_range",   "apply_ms_max_min_ratio"};

// Minimum apply time below which the max/min ratio is undefined.
constexpr double kRatioMinTimeMs = 0.01;

std::uint32_t fnv1a32(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

double opt_value(const std::optional<int>& v) { return v ? static_cast<double>(*v) : kMissing; }
double opt_value(const std::optional<double>& v) { return v ? *v : kMissing; }

double flag(bool b) { return b ? 1.0 : 0.0; }

// Measured frame rates are integer counts over a one-second window, so rate
// comparisons allow max(1 fps, 10%) of slack.
bool fps_close(double a, double b) {
  return std::abs(a - b) <= std::max(1.0, 0.1 * std::max(a, b));
}

struct Stats {
  double mean = kMissing, std = kMissing, min = kMissing, max = kMissing, range = kMissing;
};

Stats stats_of(const std::vector<double>& values) {
  Stats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  s.range = *hi - *lo;
  return s;
}

}  // namespace

FeatureLayout FeatureLayout::for_plan(const ChallengePlan& plan) {
  FeatureLayout layout;
  layout.plan = plan;
  for (std::size_t i = 0; i < plan.height_requests.size(); ++i) {
    for (const char* field : kHeightFields) {
      layout.numeric_names.push_back("h" + std::to_string(i) + "_" + field);
    }
  }
  for (std::size_t j = 0; j < plan.fps_requests.size(); ++j) {
    for (const char* field : kFpsFields) {
      layout.numeric_names.push_back("f" + std::to_string(j) + "_" + field);
    }
  }
  for (const char* field : kAggregateFields) layout.numeric_names.emplace_back(field);
  layout.categorical_names = {"platform", "browser"};
  layout.categorical_cardinalities = {kPlatformCount, kBrowserCount};
  layout.version = (static_cast<std::uint64_t>(kFeatureRevision) << 32) |
                   fnv1a32(plan_to_json(ChallengePlan{plan.height_requests, plan.fps_requests,
                                                      ChallengePlan{}.per_challenge_timeout_ms}));
  return layout;
}

bool FeatureVector::operator==(const FeatureVector& other) const {
  if (layout_version != other.layout_version || categorical != other.categorical ||
      numeric.size() != other.numeric.size()) {
    return false;
  }
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const bool a = is_missing(numeric[i]);
    const bool b = is_missing(other.numeric[i]);
    if (a != b || (!a && numeric[i] != other.numeric[i])) return false;
  }
  return true;
}

FeatureVector extract_features(const SessionRecord& record, const FeatureLayout& layout) {
  const auto& plan = layout.plan;
  FeatureVector v;
  v.layout_version = layout.version;
  v.numeric.assign(layout.numeric_count(), kMissing);
  v.categorical = {static_cast<int>(record.platform), static_cast<int>(record.browser)};

  std::size_t col = 0;
  std::vector<double> height_times;
  std::vector<double> fps_times;
  std::vector<double> all_times;
  bool all_times_present = true;
  double implicit_count = 0.0, honored_count = 0.0;
  bool any_implicit_flag = false, any_honored_flag = false;
  std::set<std::pair<int, int>> resolutions;
  std::optional<int> max_height;

  for (std::size_t i = 0; i < plan.height_requests.size(); ++i, col += kPerHeight) {
    // Entries are matched by position; an entry that is absent (aborted
    // session) or answers a different request stays missing.
    const HeightChallengeResult* t = nullptr;
    if (i < record.height_tests.size() &&
        record.height_tests[i].requested_height == plan.height_requests[i]) {
      t = &record.height_tests[i];
    }
    if (t == nullptr) {
      all_times_present = false;
      continue;
    }
    double* out = v.numeric.data() + col;
    out[0] = opt_value(t->reported_height);
    out[1] = opt_value(t->actual_height);
    out[2] = opt_value(t->reported_width);
    out[3] = opt_value(t->actual_width);
    out[4] = opt_value(t->apply_time_ms);
    if (t->actual_height) {
      out[5] = static_cast<double>(*t->actual_height) / t->requested_height;
      out[6] = flag(*t->actual_height == t->requested_height);
      honored_count += out[6];
      any_honored_flag = true;
      max_height = std::max(max_height.value_or(0), *t->actual_height);
    }
    if (t->reported_height && t->reported_width && t->actual_height && t->actual_width) {
      out[7] = flag(*t->reported_height != *t->actual_height ||
                    *t->reported_width != *t->actual_width);
      implicit_count += out[7];
      any_implicit_flag = true;
    }
    if (t->actual_height && t->actual_width) {
      out[8] = static_cast<double>(*t->actual_width) / *t->actual_height;
      resolutions.emplace(*t->actual_width, *t->actual_height);
    }
    if (t->apply_time_ms) {
      height_times.push_back(*t->apply_time_ms);
      all_times.push_back(*t->apply_time_ms);
    } else {
      all_times_present = false;
    }
  }

  for (std::size_t j = 0; j < plan.fps_requests.size(); ++j, col += kPerFps) {
    const FpsChallengeResult* t = nullptr;
    if (j < record.fps_tests.size() && record.fps_tests[j].requested_fps == plan.fps_requests[j]) {
      t = &record.fps_tests[j];
    }
    if (t == nullptr) {
      all_times_present = false;
      continue;
    }
    double* out = v.numeric.data() + col;
    out[0] = opt_value(t->reported_fps);
    out[1] = opt_value(t->actual_fps);
    out[2] = opt_value(t->apply_time_ms);
    if (t->actual_fps) {
      out[3] = flag(fps_close(*t->actual_fps, t->requested_fps));
      honored_count += out[3];
      any_honored_flag = true;
    }
    if (t->reported_fps && t->actual_fps) {
      out[4] = flag(!fps_close(*t->reported_fps, *t->actual_fps));
      implicit_count += out[4];
      any_implicit_flag = true;
    }
    if (t->apply_time_ms) {
      fps_times.push_back(*t->apply_time_ms);
      all_times.push_back(*t->apply_time_ms);
    } else {
      all_times_present = false;
    }
  }

  double* agg = v.numeric.data() + col;
  if (any_implicit_flag) agg[0] = implicit_count;
  if (any_honored_flag) agg[1] = honored_count;
  if (!resolutions.empty()) agg[2] = static_cast<double>(resolutions.size());
  if (max_height) agg[3] = *max_height;
  const Stats hs = stats_of(height_times);
  const Stats fs = stats_of(fps_times);
  const double stat_values[] = {hs.mean, hs.std, hs.min, hs.max, hs.range,
                                fs.mean, fs.std, fs.min, fs.max, fs.range};
  std::copy(std::begin(stat_values), std::end(stat_values), agg + 4);
  if (all_times_present && !all_times.empty()) {
    const auto [lo, hi] = std::minmax_element(all_times.begin(), all_times.end());
    if (*lo >= kRatioMinTimeMs) agg[14] = *hi / *lo;
  }
  return v;
}

FeatureVector FeatureMatrix::row(std::size_t r) const {
  FeatureVector v;
  const auto n = numeric_row(r);
  const auto c = categorical_row(r);
  v.numeric.assign(n.begin(), n.end());
  v.categorical.assign(c.begin(), c.end());
  v.layout_version = layout_version;
  return v;
}

FeatureMatrix extract_matrix(std::span<const SessionRecord> records, const FeatureLayout& layout) {
  FeatureMatrix m;
  m.rows = records.size();
  m.numeric_cols = layout.numeric_count();
  m.categorical_cols = layout.categorical_count();
  m.layout_version = layout.version;
  m.numeric.assign(m.rows * m.numeric_cols, kMissing);
  m.categorical.assign(m.rows * m.categorical_cols, 0);
  const auto n = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r) {
    const auto v = extract_features(records[static_cast<std::size_t>(r)], layout);
    std::copy(v.numeric.begin(), v.numeric.end(),
              m.numeric.begin() + static_cast<std::ptrdiff_t>(r * m.numeric_cols));
    std::copy(v.categorical.begin(), v.categorical.end(),
              m.categorical.begin() + static_cast<std::ptrdiff_t>(r * m.categorical_cols));
  }
  return m;
}

std::vector<BinaryLabel> binary_labels(std::span<const SessionRecord> records) {
  std::vector<BinaryLabel> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(r.label ? coarsen(*r.label) : BinaryLabel::Bonafide);
  }
  return out;
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& matrix, const FeatureLayout& layout,
                       std::span<const BinaryLabel> labels) {
  bool first = true;
  auto sep = [&] {
    if (!first) out << ',';
    first = false;
  };
  for (const auto& name : layout.numeric_names) {
    sep();
    out << name;
  }
  for (const auto& name : layout.categorical_names) {
    sep();
    out << name;
  }
  if (!labels.empty()) out << ",label";
  out << '\n';

  char buf[32];
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    first = true;
    for (double x : matrix.numeric_row(r)) {
      sep();
      if (!is_missing(x)) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf;
      }
    }
    const auto cats = matrix.categorical_row(r);
    out << ',' << to_string(static_cast<Platform>(cats[0]));
    out << ',' << to_string(static_cast<Browser>(cats[1]));
    if (!labels.empty()) out << ',' << static_cast<int>(labels[r]);
    out << '\n';
  }
}

}  // namespace vcd
