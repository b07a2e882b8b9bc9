#include "vcd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "vcd/error.hpp"
#include "vcd/rng.hpp"

namespace vcd {
namespace {

using ordered_json = nlohmann::ordered_json;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct ClassCounts {
  std::size_t attacks = 0;
  std::size_t bonafide = 0;
};

ClassCounts count_classes(std::span<const ScoredSession> scored) {
  ClassCounts c;
  for (const auto& s : scored) {
    if (s.truth == BinaryLabel::Attack) ++c.attacks;
    else ++c.bonafide;
  }
  return c;
}

ClassCounts require_both(std::span<const ScoredSession> scored) {
  const auto c = count_classes(scored);
  if (c.attacks == 0 || c.bonafide == 0) {
    throw MetricError("metric needs both attack and bonafide sessions");
  }
  return c;
}

// Distinct scores ascending, with the number of attacks and bonafide sessions
// at each.
struct ScoreLevel {
  double score;
  std::size_t attacks;
  std::size_t bonafide;
};

std::vector<ScoreLevel> score_levels(std::span<const ScoredSession> scored) {
  std::vector<ScoredSession> sorted(scored.begin(), scored.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredSession& a, const ScoredSession& b) { return a.score < b.score; });
  std::vector<ScoreLevel> levels;
  for (const auto& s : sorted) {
    if (levels.empty() || levels.back().score != s.score) levels.push_back({s.score, 0, 0});
    if (s.truth == BinaryLabel::Attack) ++levels.back().attacks;
    else ++levels.back().bonafide;
  }
  return levels;
}

void check_scores(std::span<const ScoredSession> scored) {
  for (const auto& s : scored) {
    if (!std::isfinite(s.score)) throw MetricError("scores must be finite");
  }
}

ordered_json threshold_json(double t) {
  if (t == kInf) return "+inf";
  if (t == -kInf) return "-inf";
  return t;
}

double threshold_from(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ParseError("bad threshold '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

SplitIndices split_dataset(std::span<const BinaryLabel> labels, std::uint64_t seed,
                           SplitRatios ratios) {
  if (!(ratios.train > 0 && ratios.valid > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<int>(labels[i])].push_back(i);
  }
  for (const auto& members : by_class) {
    if (members.size() < 3) {
      throw ValidationError("each class needs at least 3 records to split");
    }
  }

  SplitIndices out;
  for (int cls = 0; cls < 2; ++cls) {
    auto& members = by_class[cls];
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
    // Fisher-Yates
    for (std::size_t i = members.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(members[i - 1], members[j]);
    }
    const std::size_t n = members.size();
    // Every part keeps at least one record.
    std::size_t n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
    std::size_t n_valid = static_cast<std::size_t>(std::llround(ratios.valid * n));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
    n_valid = std::clamp<std::size_t>(n_valid, 1, n - n_train - 1);
    out.train.insert(out.train.end(), members.begin(), members.begin() + n_train);
    out.valid.insert(out.valid.end(), members.begin() + n_train,
                     members.begin() + n_train + n_valid);
    out.test.insert(out.test.end(), members.begin() + n_train + n_valid, members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.valid.begin(), out.valid.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<DetPoint> det_points(std::span<const ScoredSession> scored) {
  check_scores(scored);
  const auto counts = require_both(scored);
  const auto levels = score_levels(scored);
  const double na = static_cast<double>(counts.attacks);
  const double nb = static_cast<double>(counts.bonafide);

  std::vector<DetPoint> points;
  points.reserve(levels.size() + 2);
  points.push_back({-kInf, 0.0, 1.0});
  std::size_t attacks_below = 0, bonafide_below = 0;
  for (const auto& level : levels) {
    points.push_back({level.score, attacks_below / na, (counts.bonafide - bonafide_below) / nb});
    attacks_below += level.attacks;
    bonafide_below += level.bonafide;
  }
  points.push_back({kInf, 1.0, 0.0});
  return points;
}

std::vector<RocPoint> roc_points(std::span<const ScoredSession> scored) {
  const auto det = det_points(scored);
  std::vector<RocPoint> roc;
  roc.reserve(det.size());
  // Descending threshold gives ascending false-positive rate.
  for (auto it = det.rbegin(); it != det.rend(); ++it) {
    roc.push_back({it->threshold, it->bpcer, 1.0 - it->apcer});
  }
  return roc;
}

double auc_roc(std::span<const ScoredSession> scored) {
  check_scores(scored);
  const auto counts = require_both(scored);
  const auto levels = score_levels(scored);
  // Sweep from the highest score down in integer counts: each level moves
  // the curve by (bonafide, attacks) and contributes a trapezoid.
  double area = 0.0;
  std::size_t tp = 0;
  for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
    const std::size_t tp_next = tp + it->attacks;
    area += static_cast<double>(it->bonafide) * static_cast<double>(tp + tp_next) / 2.0;
    tp = tp_next;
  }
  return area / (static_cast<double>(counts.attacks) * static_cast<double>(counts.bonafide));
}

DetPoint evaluate_threshold(std::span<const ScoredSession> scored, double threshold) {
  const auto counts = require_both(scored);
  std::size_t missed = 0, rejected = 0;
  for (const auto& s : scored) {
    const bool attack_decision = s.score >= threshold;
    if (s.truth == BinaryLabel::Attack && !attack_decision) ++missed;
    if (s.truth == BinaryLabel::Bonafide && attack_decision) ++rejected;
  }
  return {threshold, static_cast<double>(missed) / counts.attacks,
          static_cast<double>(rejected) / counts.bonafide};
}

OperatingPoint threshold_at_apcer(std::span<const ScoredSession> selection, double target_apcer,
                                  std::span<const ScoredSession> evaluation) {
  if (!(target_apcer >= 0.0 && target_apcer <= 1.0)) {
    throw ConfigError("target APCER must lie in [0,1]");
  }
  check_scores(selection);
  const auto counts = count_classes(selection);
  if (counts.attacks == 0) throw MetricError("threshold selection needs attack sessions");

  // Candidates ascending: -inf, each distinct score, +inf. APCER only grows
  // with the threshold, so the last admissible candidate is the largest.
  const auto levels = score_levels(selection);
  const double na = static_cast<double>(counts.attacks);
  double threshold = -kInf;
  std::size_t attacks_below = 0;
  for (const auto& level : levels) {
    if (attacks_below / na > target_apcer) break;
    threshold = level.score;
    attacks_below += level.attacks;
  }
  if (attacks_below / na <= target_apcer) threshold = kInf;

  OperatingPoint op;
  op.name = operating_point_name(target_apcer);
  op.target_apcer = target_apcer;
  op.threshold = threshold;
  op.low_support = target_apcer > 0.0 && na < std::ceil(1.0 / target_apcer);
  const auto achieved = evaluate_threshold(evaluation, threshold);
  op.apcer = achieved.apcer;
  op.bpcer = achieved.bpcer;
  op.acer = acer(op.apcer, op.bpcer);
  return op;
}

OperatingPoint threshold_at_apcer(std::span<const ScoredSession> selection, double target_apcer) {
  return threshold_at_apcer(selection, target_apcer, selection);
}

std::string operating_point_name(double target_apcer) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "apcer_%g", target_apcer);
  return buf;
}

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  j["schema_version"] = 1;
  j["model_version"] = report.model_version;
  j["auc"] = report.auc;
  ordered_json split;
  split["train"] = report.split.train;
  split["valid"] = report.split.valid;
  split["test"] = report.split.test;
  split["train_attacks"] = report.split.train_attacks;
  split["valid_attacks"] = report.split.valid_attacks;
  split["test_attacks"] = report.split.test_attacks;
  j["split"] = std::move(split);
  auto ops = ordered_json::array();
  for (const auto& op : report.operating_points) {
    ordered_json e;
    e["name"] = op.name;
    e["target_apcer"] = op.target_apcer;
    e["threshold"] = threshold_json(op.threshold);
    e["apcer"] = op.apcer;
    e["bpcer"] = op.bpcer;
    e["acer"] = op.acer;
    e["low_support"] = op.low_support;
    ops.push_back(std::move(e));
  }
  j["operating_points"] = std::move(ops);
  auto roc = ordered_json::array();
  for (const auto& p : report.roc) roc.push_back({threshold_json(p.threshold), p.fpr, p.tpr});
  j["roc"] = std::move(roc);
  auto det = ordered_json::array();
  for (const auto& p : report.det) det.push_back({threshold_json(p.threshold), p.apcer, p.bpcer});
  j["det"] = std::move(det);
  return j.dump() + "\n";
}

EvalReport report_from_json(std::string_view text) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text.begin(), text.end());
    if (j.at("schema_version").get<int>() != 1) throw VersionError("unsupported report schema_version");
    r.model_version = j.at("model_version").get<std::string>();
    r.auc = j.at("auc").get<double>();
    const auto& s = j.at("split");
    r.split.train = s.at("train").get<std::size_t>();
    r.split.valid = s.at("valid").get<std::size_t>();
    r.split.test = s.at("test").get<std::size_t>();
    r.split.train_attacks = s.at("train_attacks").get<std::size_t>();
    r.split.valid_attacks = s.at("valid_attacks").get<std::size_t>();
    r.split.test_attacks = s.at("test_attacks").get<std::size_t>();
    for (const auto& e : j.at("operating_points")) {
      OperatingPoint op;
      op.name = e.at("name").get<std::string>();
      op.target_apcer = e.at("target_apcer").get<double>();
      op.threshold = threshold_from(e.at("threshold"));
      op.apcer = e.at("apcer").get<double>();
      op.bpcer = e.at("bpcer").get<double>();
      op.acer = e.at("acer").get<double>();
      op.low_support = e.at("low_support").get<bool>();
      r.operating_points.push_back(op);
    }
    for (const auto& e : j.at("roc")) {
      r.roc.push_back({threshold_from(e.at(0)), e.at(1).get<double>(), e.at(2).get<double>()});
    }
    for (const auto& e : j.at("det")) {
      r.det.push_back({threshold_from(e.at(0)), e.at(1).get<double>(), e.at(2).get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
  return r;
}

void write_report_file(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << report_to_json(report);
}

EvalReport read_report_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

void write_det_csv(std::ostream& out, std::span<const DetPoint> points) {
  out << "threshold,apcer,bpcer\n";
  char buf[96];
  for (const auto& p : points) {
    if (p.threshold == kInf) {
      std::snprintf(buf, sizeof buf, "+inf,%.17g,%.17g\n", p.apcer, p.bpcer);
    } else if (p.threshold == -kInf) {
      std::snprintf(buf, sizeof buf, "-inf,%.17g,%.17g\n", p.apcer, p.bpcer);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.apcer, p.bpcer);
    }
    out << buf;
  }
}

}  // namespace vcd
