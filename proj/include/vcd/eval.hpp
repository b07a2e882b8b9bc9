#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vcd/session.hpp"

namespace vcd {

struct ScoredSession {
  double score = 0.0;  // probability of attack
  BinaryLabel truth = BinaryLabel::Bonafide;
};

// Decision rule everywhere: score >= threshold  =>  attack.
struct DetPoint {
  double threshold = 0.0;  // may be -inf / +inf sentinels
  double apcer = 0.0;      // attacks with score < threshold
  double bpcer = 0.0;      // bonafide with score >= threshold
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;  // = bpcer
  double tpr = 0.0;  // = 1 - apcer
};

struct OperatingPoint {
  std::string name;
  double target_apcer = 0.0;
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;
  // Fewer than ceil(1 / target) attacks were available for selection.
  bool low_support = false;
};

struct SplitSizes {
  std::size_t train = 0, valid = 0, test = 0;
  std::size_t train_attacks = 0, valid_attacks = 0, test_attacks = 0;
};

struct EvalReport {
  double auc = 0.0;
  std::vector<RocPoint> roc;
  std::vector<DetPoint> det;
  std::vector<OperatingPoint> operating_points;
  SplitSizes split;
  std::string model_version;
};

inline double acer(double apcer, double bpcer) { return (apcer + bpcer) / 2.0; }

// ---------------------------------------------------------------------------
// Splits

struct SplitRatios {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
};

struct SplitIndices {
  std::vector<std::size_t> train, valid, test;  // ascending record indices
};

// Stratified by BinaryLabel: each class is shuffled with `seed` and cut into
// round(ratio * n) parts, the test part taking the remainder. Throws
// ValidationError if either class has fewer than 3 records.
SplitIndices split_dataset(std::span<const BinaryLabel> labels, std::uint64_t seed,
                           SplitRatios ratios = {});

// ---------------------------------------------------------------------------
// Metrics. All throw MetricError unless both classes are present.

// Trapezoidal area under the ROC swept over distinct scores.
double auc_roc(std::span<const ScoredSession> scored);

// One point per distinct score plus -inf / +inf sentinels, ascending.
std::vector<DetPoint> det_points(std::span<const ScoredSession> scored);
std::vector<RocPoint> roc_points(std::span<const ScoredSession> scored);

// APCER / BPCER of a fixed threshold.
DetPoint evaluate_threshold(std::span<const ScoredSession> scored, double threshold);

// Largest threshold among {-inf, distinct scores, +inf} whose APCER on
// `selection` does not exceed `target_apcer`; metrics are recomputed on
// `evaluation`. Throws MetricError when `selection` has no attacks.
OperatingPoint threshold_at_apcer(std::span<const ScoredSession> selection, double target_apcer,
                                  std::span<const ScoredSession> evaluation);
OperatingPoint threshold_at_apcer(std::span<const ScoredSession> selection, double target_apcer);

// "apcer_0.1" etc.
std::string operating_point_name(double target_apcer);

// ---------------------------------------------------------------------------
// Report I/O

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(std::string_view text);
void write_report_file(const EvalReport& report, const std::string& path);
EvalReport read_report_file(const std::string& path);
void write_det_csv(std::ostream& out, std::span<const DetPoint> points);

}  // namespace vcd
