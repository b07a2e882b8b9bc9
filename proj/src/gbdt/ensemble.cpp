#include "vcd/gbdt/ensemble.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vcd/error.hpp"

namespace vcd::gbdt {
namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

constexpr const char* kFormatName = "vcd-gbdt-ensemble";
constexpr const char* kCombination = "mean_probability";

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

const char* weighting_name(ClassWeighting w) {
  return w == ClassWeighting::Balanced ? "balanced" : "none";
}

ClassWeighting weighting_from(const std::string& s) {
  if (s == "balanced") return ClassWeighting::Balanced;
  if (s == "none") return ClassWeighting::None;
  throw ConfigError("unknown class_weighting '" + s + "'");
}

ordered_json config_json(const TrainConfig& c) {
  ordered_json j;
  j["n_trees"] = c.n_trees;
  j["learning_rate"] = c.learning_rate;
  j["max_depth"] = c.max_depth;
  j["min_samples_leaf"] = c.min_samples_leaf;
  j["l2"] = c.l2;
  j["class_weighting"] = weighting_name(c.class_weighting);
  j["early_stopping_rounds"] = c.early_stopping_rounds;
  j["subsample"] = c.subsample;
  j["seed"] = c.seed;
  return j;
}

TrainConfig config_from(const json& j) {
  TrainConfig c;
  for (const auto& item : j.items()) {
    const auto& k = item.key();
    const auto& v = item.value();
    if (k == "n_trees") c.n_trees = v.get<int>();
    else if (k == "learning_rate") c.learning_rate = v.get<double>();
    else if (k == "max_depth") c.max_depth = v.get<int>();
    else if (k == "min_samples_leaf") c.min_samples_leaf = v.get<int>();
    else if (k == "l2") c.l2 = v.get<double>();
    else if (k == "class_weighting") c.class_weighting = weighting_from(v.get<std::string>());
    else if (k == "early_stopping_rounds") c.early_stopping_rounds = v.get<int>();
    else if (k == "subsample") c.subsample = v.get<double>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else throw ConfigError("unknown train config key '" + k + "'");
  }
  validate(c);
  return c;
}

ordered_json tree_json(const Tree& tree) {
  auto nodes = ordered_json::array();
  for (const auto& n : tree.nodes) {
    ordered_json e;
    if (n.is_leaf) {
      e["leaf"] = n.value;
    } else {
      e["feature"] = n.feature;
      if (n.kind == SplitKind::Numeric) {
        e["threshold"] = n.threshold;
        e["missing_left"] = n.missing_left;
      } else {
        auto bins = ordered_json::array();
        for (int b = 0; b < kHistogramWidth; ++b) {
          if (n.left_bins.contains(static_cast<std::uint8_t>(b))) bins.push_back(b);
        }
        e["left_bins"] = std::move(bins);
      }
      e["gain"] = n.gain;
      e["left"] = n.left;
      e["right"] = n.right;
    }
    nodes.push_back(std::move(e));
  }
  return nodes;
}

Tree tree_from(const json& j, std::size_t n_features) {
  Tree t;
  for (const auto& e : j) {
    TreeNode n;
    if (e.contains("leaf")) {
      n.is_leaf = true;
      n.value = e["leaf"].get<double>();
      if (!std::isfinite(n.value)) throw ModelError("non-finite leaf value");
    } else {
      n.is_leaf = false;
      n.feature = e.at("feature").get<int>();
      if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_features) {
        throw ModelError("split feature out of range");
      }
      if (e.contains("left_bins")) {
        n.kind = SplitKind::Categorical;
        for (const auto& b : e["left_bins"]) {
          const int bin = b.get<int>();
          if (bin < 0 || bin >= kHistogramWidth) throw ModelError("category bin out of range");
          n.left_bins.insert(static_cast<std::uint8_t>(bin));
        }
        n.missing_left = n.left_bins.contains(kMissingBin);
      } else {
        n.kind = SplitKind::Numeric;
        const int threshold = e.at("threshold").get<int>();
        if (threshold < 1 || threshold > kMaxValueBins) throw ModelError("threshold out of range");
        n.threshold = static_cast<std::uint8_t>(threshold);
        n.missing_left = e.at("missing_left").get<bool>();
      }
      n.gain = e.at("gain").get<double>();
      n.left = e.at("left").get<int>();
      n.right = e.at("right").get<int>();
    }
    t.nodes.push_back(n);
  }
  if (t.nodes.empty()) throw ModelError("empty tree");
  // Children must point forward so traversal always terminates.
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    if (n.is_leaf) continue;
    const auto size = static_cast<int>(t.nodes.size());
    if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= size ||
        n.right >= size) {
      throw ModelError("malformed tree structure");
    }
  }
  return t;
}

ordered_json layout_json(const FeatureLayout& layout) {
  ordered_json j;
  j["version"] = layout.version;
  ordered_json plan;
  plan["height_requests"] = layout.plan.height_requests;
  plan["fps_requests"] = layout.plan.fps_requests;
  plan["per_challenge_timeout_ms"] = layout.plan.per_challenge_timeout_ms;
  j["plan"] = std::move(plan);
  j["numeric"] = layout.numeric_names;
  auto cats = ordered_json::array();
  for (std::size_t i = 0; i < layout.categorical_names.size(); ++i) {
    ordered_json c;
    c["name"] = layout.categorical_names[i];
    c["cardinality"] = layout.categorical_cardinalities[i];
    cats.push_back(std::move(c));
  }
  j["categorical"] = std::move(cats);
  return j;
}

FeatureLayout layout_from(const json& j) {
  ChallengePlan plan;
  const auto& p = j.at("plan");
  plan.height_requests = p.at("height_requests").get<std::vector<int>>();
  plan.fps_requests = p.at("fps_requests").get<std::vector<int>>();
  plan.per_challenge_timeout_ms = p.at("per_challenge_timeout_ms").get<double>();
  FeatureLayout layout = FeatureLayout::for_plan(plan);
  const auto version = j.at("version").get<std::uint64_t>();
  if (version != layout.version) {
    throw VersionError("model was trained with feature layout " + std::to_string(version) +
                       ", this build produces " + std::to_string(layout.version));
  }
  if (j.at("numeric").get<std::vector<std::string>>() != layout.numeric_names) {
    throw VersionError("model feature names differ from this build's layout");
  }
  return layout;
}

ordered_json mapper_json(const BinMapper& mapper) {
  auto features = ordered_json::array();
  for (const auto& f : mapper.features()) {
    ordered_json e;
    if (f.kind == FeatureKind::Numeric) {
      e["kind"] = "numeric";
      e["edges"] = f.edges;
    } else {
      e["kind"] = "categorical";
      e["cardinality"] = f.cardinality;
    }
    features.push_back(std::move(e));
  }
  return features;
}

BinMapper mapper_from(const json& j) {
  std::vector<FeatureBins> features;
  for (const auto& e : j) {
    FeatureBins f;
    const auto kind = e.at("kind").get<std::string>();
    if (kind == "numeric") {
      f.kind = FeatureKind::Numeric;
      f.edges = e.at("edges").get<std::vector<double>>();
      if (static_cast<int>(f.edges.size()) > kMaxValueBins - 1) throw ModelError("too many edges");
      for (std::size_t i = 1; i < f.edges.size(); ++i) {
        if (!(f.edges[i - 1] < f.edges[i])) throw ModelError("bin edges must strictly increase");
      }
    } else if (kind == "categorical") {
      f.kind = FeatureKind::Categorical;
      f.cardinality = e.at("cardinality").get<int>();
      if (f.cardinality < 1 || f.cardinality > kMaxValueBins) {
        throw ModelError("categorical cardinality out of range");
      }
    } else {
      throw ModelError("unknown feature kind '" + kind + "'");
    }
    features.push_back(std::move(f));
  }
  return BinMapper(std::move(features));
}

std::string serialize(const EnsembleModel& model, const std::string& version) {
  ordered_json j;
  j["format"] = kFormatName;
  j["format_version"] = kModelFormatVersion;
  j["model_version"] = version;
  j["combination"] = kCombination;
  ordered_json split;
  split["seed"] = model.split_seed;
  split["train"] = model.split_ratios[0];
  split["valid"] = model.split_ratios[1];
  split["test"] = model.split_ratios[2];
  j["split"] = std::move(split);
  j["layout"] = layout_json(model.layout);
  j["bin_mapper"] = mapper_json(model.mapper);
  auto forests = ordered_json::array();
  for (const auto& f : model.forests) {
    ordered_json e;
    e["config"] = config_json(f.config);
    e["base_score"] = f.base_score;
    e["best_iteration"] = f.history.best_iteration;
    e["train_loss"] = f.history.train_loss;
    e["valid_loss"] = f.history.valid_loss;
    auto trees = ordered_json::array();
    for (const auto& t : f.trees) trees.push_back(tree_json(t));
    e["trees"] = std::move(trees);
    forests.push_back(std::move(e));
  }
  j["forests"] = std::move(forests);
  return j.dump() + "\n";
}

std::string content_version(const EnsembleModel& model) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(serialize(model, ""))));
  return buf;
}

}  // namespace

EnsembleConfig EnsembleConfig::defaults(std::uint64_t seed) {
  TrainConfig deep;
  deep.seed = seed;
  TrainConfig shallow;
  shallow.max_depth = 4;
  shallow.subsample = 0.8;
  shallow.min_samples_leaf = 10;
  shallow.seed = seed + 1;
  return EnsembleConfig{{deep, shallow}};
}

std::vector<double> EnsembleModel::member_probas(const FeatureVector& v) const {
  if (v.layout_version != layout.version) {
    throw VersionError("feature vector layout " + std::to_string(v.layout_version) +
                       " does not match model layout " + std::to_string(layout.version));
  }
  std::vector<std::uint8_t> bins(mapper.feature_count());
  mapper.bin_row(v, bins);
  std::vector<double> out;
  out.reserve(forests.size());
  for (const auto& f : forests) out.push_back(f.predict_proba(bins));
  return out;
}

double EnsembleModel::predict_proba(const FeatureVector& v) const {
  if (forests.empty()) throw ModelError("model has no forests");
  const auto probs = member_probas(v);
  double sum = 0.0;
  for (double p : probs) sum += p;
  return sum / static_cast<double>(probs.size());
}

std::vector<double> EnsembleModel::predict_batch(const FeatureMatrix& m) const {
  if (m.layout_version != layout.version) {
    throw VersionError("feature matrix layout does not match the model");
  }
  if (forests.empty()) throw ModelError("model has no forests");
  const BinnedMatrix binned = mapper.transform(m);
  std::vector<double> out(m.rows);
  const auto n = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    double sum = 0.0;
    for (const auto& f : forests) sum += sigmoid(f.raw_score(binned, r));
    out[r] = sum / static_cast<double>(forests.size());
  }
  return out;
}

EnsembleModel train_ensemble(const FeatureMatrix& train, std::span<const BinaryLabel> train_labels,
                             const FeatureMatrix& valid, std::span<const BinaryLabel> valid_labels,
                             const FeatureLayout& layout, const EnsembleConfig& config) {
  if (config.members.empty()) throw ConfigError("ensemble needs at least one member");
  if (train.layout_version != layout.version || valid.layout_version != layout.version) {
    throw VersionError("training data was extracted with a different feature layout");
  }
  EnsembleModel model;
  model.layout = layout;
  model.mapper = BinMapper::fit(train, layout.categorical_cardinalities);
  // Validation rows share the training mapper; infinities there are invalid too.
  for (double v : valid.numeric) {
    if (std::isinf(v)) throw ValidationError("non-finite value in validation features");
  }
  const BinnedMatrix binned_train = model.mapper.transform(train);
  const BinnedMatrix binned_valid = model.mapper.transform(valid);
  for (const auto& member : config.members) {
    model.forests.push_back(fit(binned_train, train_labels, binned_valid, valid_labels,
                                model.mapper.features(), member));
  }
  assign_model_version(model);
  return model;
}

void assign_model_version(EnsembleModel& model) { model.model_version = content_version(model); }

std::string save_model(const EnsembleModel& model) {
  return serialize(model, model.model_version.empty() ? content_version(model) : model.model_version);
}

EnsembleModel load_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("corrupt model file: ") + e.what());
  }
  EnsembleModel model;
  try {
    if (!j.is_object() || j.value("format", "") != kFormatName) {
      throw ModelError("not a vcd model file");
    }
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw VersionError("unsupported model format_version " + j["format_version"].dump());
    }
    if (j.at("combination").get<std::string>() != kCombination) {
      throw ModelError("unsupported combination rule");
    }
    const auto& split = j.at("split");
    model.split_seed = split.at("seed").get<std::uint64_t>();
    model.split_ratios = {split.at("train").get<double>(), split.at("valid").get<double>(),
                          split.at("test").get<double>()};
    model.layout = layout_from(j.at("layout"));
    model.mapper = mapper_from(j.at("bin_mapper"));
    if (model.mapper.feature_count() != model.layout.numeric_count() + model.layout.categorical_count()) {
      throw ModelError("bin mapper width does not match the layout");
    }
    for (const auto& e : j.at("forests")) {
      Forest f;
      f.config = config_from(e.at("config"));
      f.base_score = e.at("base_score").get<double>();
      f.history.best_iteration = e.at("best_iteration").get<int>();
      f.history.train_loss = e.at("train_loss").get<std::vector<double>>();
      f.history.valid_loss = e.at("valid_loss").get<std::vector<double>>();
      for (const auto& t : e.at("trees")) f.trees.push_back(tree_from(t, model.mapper.feature_count()));
      model.forests.push_back(std::move(f));
    }
    if (model.forests.empty()) throw ModelError("model has no forests");
    model.model_version = j.at("model_version").get<std::string>();
  } catch (const json::exception& e) {
    throw ModelError(std::string("corrupt model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw ModelError(std::string("corrupt model file: ") + e.what());
  }
  if (model.model_version != content_version(model)) {
    throw ModelError("model content does not match its model_version (corrupt file)");
  }
  return model;
}

void save_model_file(const EnsembleModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << save_model(model);
  if (!out) throw IoError("write failed for '" + path + "'");
}

EnsembleModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

std::string train_config_to_json(const TrainConfig& config) { return config_json(config).dump(); }

TrainConfig train_config_from_json(std::string_view text) {
  try {
    return config_from(json::parse(text.begin(), text.end()));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

}  // namespace vcd::gbdt
