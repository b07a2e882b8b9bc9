#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "vcd/probe.hpp"

namespace vcd::testing {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string source_path(const std::string& relative) {
  return std::string(VCD_SOURCE_DIR) + "/" + relative;
}

std::string fixture_path(const std::string& name) { return source_path("tests/fixtures/" + name); }

std::string fixture_text(const std::string& name) { return read_text(fixture_path(name)); }

std::string make_temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = fs::temp_directory_path() /
                   ("vcd-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

namespace {

std::optional<int> maybe_int(Rng& rng, double p_missing, int lo, int hi) {
  if (rng.bernoulli(p_missing)) return std::nullopt;
  return static_cast<int>(rng.uniform_int(lo, hi));
}

std::optional<double> maybe_real(Rng& rng, double p_missing, double lo, double hi) {
  if (rng.bernoulli(p_missing)) return std::nullopt;
  // Mix exact small decimals with full-precision values.
  if (rng.bernoulli(0.3)) return static_cast<double>(rng.uniform_int(0, 5000)) / 10.0;
  return rng.uniform(lo, hi);
}

std::string random_text(Rng& rng) {
  static const std::vector<std::string> pieces{"a", "Z", "0", "-", "_", " ", "\"", "\\", "/",
                                               "\n", "\t", "\xc3\xa9", "\xe2\x82\xac", "{", "}"};
  std::string s;
  const auto n = rng.uniform_int(0, 16);
  for (std::int64_t i = 0; i < n; ++i) {
    s += pieces[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pieces.size()) - 1))];
  }
  return s;
}

}  // namespace

SessionRecord random_session(Rng& rng) {
  SessionRecord r;
  r.session_id = random_text(rng);
  r.platform = static_cast<Platform>(rng.uniform_int(0, kPlatformCount - 1));
  r.browser = static_cast<Browser>(rng.uniform_int(0, kBrowserCount - 1));
  if (rng.bernoulli(0.5)) r.camera_label = random_text(rng);
  const auto label = rng.uniform_int(0, 3);
  if (label < 3) r.label = static_cast<SessionLabel>(label);
  const double hole = rng.uniform(0.0, 0.6);
  const auto n_height = rng.uniform_int(0, 8);
  for (std::int64_t i = 0; i < n_height; ++i) {
    HeightChallengeResult h;
    h.requested_height = static_cast<int>(rng.uniform_int(1, 10001));
    h.reported_height = maybe_int(rng, hole, 1, 4320);
    h.actual_height = maybe_int(rng, hole, 1, 4320);
    h.reported_width = maybe_int(rng, hole, 1, 7680);
    h.actual_width = maybe_int(rng, hole, 1, 7680);
    h.apply_time_ms = maybe_real(rng, hole, 0.0, 5000.0);
    r.height_tests.push_back(h);
  }
  const auto n_fps = rng.uniform_int(0, 8);
  for (std::int64_t i = 0; i < n_fps; ++i) {
    FpsChallengeResult f;
    f.requested_fps = static_cast<int>(rng.uniform_int(1, 240));
    f.reported_fps = maybe_real(rng, hole, 0.0, 240.0);
    f.actual_fps = maybe_real(rng, hole, 0.0, 240.0);
    f.apply_time_ms = maybe_real(rng, hole, 0.0, 5000.0);
    r.fps_tests.push_back(f);
  }
  return r;
}

SessionRecord full_template_session() {
  SessionRecord r;
  r.session_id = "template";
  r.platform = Platform::Linux;
  r.browser = Browser::Chrome;
  r.label = SessionLabel::Bonafide;
  const int widths[] = {20, 39, 320, 1138, 1780, 1920};
  const int heights[] = {11, 22, 240, 640, 1001, 1080};
  const double times[] = {210, 1.9, 94.5, 91.7, 92.2, 1.7};
  const ChallengePlan plan;
  for (std::size_t i = 0; i < plan.height_requests.size(); ++i) {
    r.height_tests.push_back(
        {plan.height_requests[i], heights[i], heights[i], widths[i], widths[i], times[i]});
  }
  const double reported[] = {1, 5, 30, 30, 30, 30};
  const double actual[] = {1, 5, 30, 30, 30, 30};
  const double fps_times[] = {48.0, 51.5, 44.2, 3.1, 2.8, 2.9};
  for (std::size_t i = 0; i < plan.fps_requests.size(); ++i) {
    r.fps_tests.push_back({plan.fps_requests[i], reported[i], actual[i], fps_times[i]});
  }
  return r;
}

SessionRecord with_missing_tests(const SessionRecord& templ, std::uint32_t mask) {
  SessionRecord r = templ;
  std::size_t bit = 0;
  for (auto& h : r.height_tests) {
    if (mask & (1u << bit++)) h = {h.requested_height, {}, {}, {}, {}, {}};
  }
  for (auto& f : r.fps_tests) {
    if (mask & (1u << bit++)) f = {f.requested_fps, {}, {}, {}};
  }
  return r;
}

namespace {

bool type_matches(const std::string& type, const json& doc) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "integer") return doc.is_number_integer();
  if (type == "number") return doc.is_number();
  if (type == "boolean") return doc.is_boolean();
  if (type == "null") return doc.is_null();
  throw std::runtime_error("schema uses unsupported type " + type);
}

std::string check(const json& root, const json& schema, const json& doc, const std::string& where) {
  if (schema.contains("$ref")) {
    const auto ref = schema["$ref"].get<std::string>();
    if (ref.rfind("#/", 0) != 0) throw std::runtime_error("only local $ref supported");
    return check(root, root.at(json::json_pointer(ref.substr(1))), doc, where);
  }
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_array()) {
      for (const auto& alt : t) ok = ok || type_matches(alt.get<std::string>(), doc);
    } else {
      ok = type_matches(t.get<std::string>(), doc);
    }
    if (!ok) return where + ": expected type " + t.dump() + ", got " + doc.dump();
  }
  if (schema.contains("const") && doc != schema["const"]) {
    return where + ": expected " + schema["const"].dump();
  }
  if (schema.contains("enum")) {
    const auto& e = schema["enum"];
    if (std::find(e.begin(), e.end(), doc) == e.end()) return where + ": not in enum";
  }
  if (doc.is_number()) {
    const double v = doc.get<double>();
    if (schema.contains("minimum") && v < schema["minimum"].get<double>()) return where + ": below minimum";
    if (schema.contains("maximum") && v > schema["maximum"].get<double>()) return where + ": above maximum";
    if (schema.contains("exclusiveMinimum") && v <= schema["exclusiveMinimum"].get<double>()) {
      return where + ": not above exclusiveMinimum";
    }
  }
  if (doc.is_object()) {
    if (schema.contains("required")) {
      for (const auto& k : schema["required"]) {
        if (!doc.contains(k.get<std::string>())) return where + ": missing " + k.get<std::string>();
      }
    }
    const json props = schema.value("properties", json::object());
    for (const auto& item : doc.items()) {
      if (props.contains(item.key())) {
        auto err = check(root, props[item.key()], item.value(), where + "." + item.key());
        if (!err.empty()) return err;
      } else if (schema.value("additionalProperties", true) == false) {
        return where + ": unexpected key " + item.key();
      }
    }
  }
  if (doc.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      auto err = check(root, schema["items"], doc[i], where + "[" + std::to_string(i) + "]");
      if (!err.empty()) return err;
    }
  }
  return {};
}

}  // namespace

std::string schema_violation(const json& schema, const json& doc) {
  return check(schema, schema, doc, "$");
}

double pairwise_auc(const std::vector<ScoredSession>& scored) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& a : scored) {
    if (a.truth != BinaryLabel::Attack) continue;
    for (const auto& b : scored) {
      if (b.truth != BinaryLabel::Bonafide) continue;
      pairs += 1.0;
      if (a.score > b.score) wins += 1.0;
      else if (a.score == b.score) wins += 0.5;
    }
  }
  return wins / pairs;
}

double brute_apcer(const std::vector<ScoredSession>& scored, double t) {
  double n = 0, miss = 0;
  for (const auto& s : scored) {
    if (s.truth != BinaryLabel::Attack) continue;
    n += 1;
    if (s.score < t) miss += 1;
  }
  return miss / n;
}

double brute_bpcer(const std::vector<ScoredSession>& scored, double t) {
  double n = 0, rej = 0;
  for (const auto& s : scored) {
    if (s.truth != BinaryLabel::Bonafide) continue;
    n += 1;
    if (s.score >= t) rej += 1;
  }
  return rej / n;
}

OracleSplit exhaustive_split(const gbdt::BinnedMatrix& data,
                             const std::vector<gbdt::FeatureBins>& features,
                             const std::vector<double>& grad, const std::vector<double>& hess,
                             double l2, int min_samples_leaf) {
  auto score = [l2](double g, double h) { return g * g / (h + l2); };
  double G = 0.0, H = 0.0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    G += grad[i];
    H += hess[i];
  }
  const double parent = score(G, H);
  OracleSplit best;

  auto evaluate = [&](int f, const std::vector<char>& left) {
    double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;
    int nl = 0, nr = 0;
    for (std::size_t i = 0; i < data.rows; ++i) {
      if (left[i]) {
        gl += grad[i];
        hl += hess[i];
        ++nl;
      } else {
        gr += grad[i];
        hr += hess[i];
        ++nr;
      }
    }
    if (nl < min_samples_leaf || nr < min_samples_leaf) return;
    const double gain = score(gl, hl) + score(gr, hr) - parent;
    if (gain > 1e-9 && (!best.valid || gain > best.gain)) {
      best.valid = true;
      best.gain = gain;
      best.feature = f;
      best.left = left;
    }
  };

  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& fb = features[f];
    const int n_value = fb.value_bin_count();
    std::vector<char> left(data.rows);
    if (fb.kind == gbdt::FeatureKind::Numeric) {
      for (int t = 1; t <= n_value; ++t) {
        for (int missing_left = 1; missing_left >= 0; --missing_left) {
          for (std::size_t i = 0; i < data.rows; ++i) {
            const int b = data.at(i, f);
            left[i] = b == 0 ? static_cast<char>(missing_left) : static_cast<char>(b <= t);
          }
          evaluate(static_cast<int>(f), left);
        }
      }
    } else {
      std::vector<int> populated;
      for (int b = 0; b <= n_value; ++b) {
        for (std::size_t i = 0; i < data.rows; ++i) {
          if (data.at(i, f) == b) {
            populated.push_back(b);
            break;
          }
        }
      }
      const int m = static_cast<int>(populated.size());
      for (std::uint32_t mask = 1; mask + 1 < (1u << m); ++mask) {
        for (std::size_t i = 0; i < data.rows; ++i) {
          const int b = data.at(i, f);
          const auto pos = std::find(populated.begin(), populated.end(), b) - populated.begin();
          left[i] = static_cast<char>((mask >> pos) & 1u);
        }
        evaluate(static_cast<int>(f), left);
      }
    }
  }
  return best;
}

std::vector<char> rows_left(const gbdt::BinnedMatrix& data, const gbdt::TreeNode& node) {
  std::vector<char> left(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) {
    left[i] = static_cast<char>(node.goes_left(data.at(i, static_cast<std::size_t>(node.feature))));
  }
  return left;
}

BinnedDataset random_binned(Rng& rng, std::size_t rows, int numeric, int categorical,
                            double missing) {
  BinnedDataset d;
  d.binned.rows = rows;
  d.binned.cols = static_cast<std::size_t>(numeric + categorical);
  d.binned.bins.resize(rows * d.binned.cols);
  for (int f = 0; f < numeric + categorical; ++f) {
    gbdt::FeatureBins fb;
    if (f < numeric) {
      const auto n_edges = rng.uniform_int(1, 12);
      for (std::int64_t e = 0; e < n_edges; ++e) fb.edges.push_back(static_cast<double>(e));
    } else {
      fb.kind = gbdt::FeatureKind::Categorical;
      fb.cardinality = static_cast<int>(rng.uniform_int(2, 6));
    }
    const int n_value = fb.value_bin_count();
    for (std::size_t r = 0; r < rows; ++r) {
      d.binned.bins[static_cast<std::size_t>(f) * rows + r] =
          rng.bernoulli(missing) ? 0 : static_cast<std::uint8_t>(rng.uniform_int(1, n_value));
    }
    d.features.push_back(fb);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double signal = d.binned.at(r, 0) * 0.3 + (d.binned.cols > 1 ? d.binned.at(r, 1) : 0) * 0.2;
    d.labels.push_back(rng.uniform() < 1.0 / (1.0 + std::exp(2.0 - signal)) ? BinaryLabel::Attack
                                                                             : BinaryLabel::Bonafide);
  }
  const auto attacks = std::count(d.labels.begin(), d.labels.end(), BinaryLabel::Attack);
  if (attacks == 0) d.labels[0] = BinaryLabel::Attack;
  if (attacks == static_cast<std::ptrdiff_t>(rows)) d.labels[0] = BinaryLabel::Bonafide;
  return d;
}

void base_gradients(std::span<const BinaryLabel> labels, std::span<const double> weights,
                    std::vector<double>& grad, std::vector<double>& hess) {
  double wy = 0.0, ws = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    wy += weights[i] * (labels[i] == BinaryLabel::Attack);
    ws += weights[i];
  }
  const double p = wy / ws;
  grad.resize(labels.size());
  hess.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = labels[i] == BinaryLabel::Attack ? 1.0 : 0.0;
    grad[i] = weights[i] * (p - y);
    hess[i] = weights[i] * p * (1.0 - p);
  }
}

double partition_gain(const std::vector<char>& left, const std::vector<double>& grad,
                      const std::vector<double>& hess, double l2) {
  double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;
  for (std::size_t i = 0; i < left.size(); ++i) {
    (left[i] ? gl : gr) += grad[i];
    (left[i] ? hl : hr) += hess[i];
  }
  auto score = [l2](double g, double h) { return g * g / (h + l2); };
  return score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr);
}

}  // namespace vcd::testing
