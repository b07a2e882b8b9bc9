#include "vcd/pipeline.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vcd/error.hpp"
#include "vcd/features.hpp"

namespace vcd {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<SessionRecord> gather(std::span<const SessionRecord> records,
                                  const std::vector<std::size_t>& idx) {
  std::vector<SessionRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(records[i]);
  return out;
}

std::vector<BinaryLabel> require_labels(std::span<const SessionRecord> records) {
  for (const auto& r : records) {
    if (!r.label) throw ValidationError("session '" + r.session_id + "' has no label");
  }
  return binary_labels(records);
}

std::vector<ScoredSession> scored_subset(std::span<const double> scores,
                                         std::span<const BinaryLabel> labels,
                                         const std::vector<std::size_t>& idx) {
  std::vector<ScoredSession> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back({scores[i], labels[i]});
  return out;
}

std::size_t count_attacks(std::span<const BinaryLabel> labels, const std::vector<std::size_t>& idx) {
  std::size_t n = 0;
  for (auto i : idx) n += labels[i] == BinaryLabel::Attack;
  return n;
}

}  // namespace

std::string pipeline_config_to_json(const PipelineConfig& config) {
  ordered_json j;
  j["schema_version"] = 1;
  j["split_seed"] = config.split_seed;
  j["split"] = {{"train", config.split.train},
                {"valid", config.split.valid},
                {"test", config.split.test}};
  j["plan"] = ordered_json::parse(plan_to_json(config.plan));
  auto members = ordered_json::array();
  for (const auto& m : config.ensemble.members) {
    members.push_back(ordered_json::parse(gbdt::train_config_to_json(m)));
  }
  j["members"] = std::move(members);
  return j.dump(2) + "\n";
}

PipelineConfig pipeline_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed pipeline config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("pipeline config: expected object");
  PipelineConfig c;
  try {
    for (const auto& item : j.items()) {
      const auto& k = item.key();
      const auto& v = item.value();
      if (k == "schema_version") {
        if (v != 1) throw ConfigError("pipeline config: unsupported schema_version");
      } else if (k == "split_seed") {
        c.split_seed = v.get<std::uint64_t>();
      } else if (k == "split") {
        c.split.train = v.at("train").get<double>();
        c.split.valid = v.at("valid").get<double>();
        c.split.test = v.at("test").get<double>();
      } else if (k == "plan") {
        c.plan = plan_from_json(v.dump());
      } else if (k == "members") {
        c.ensemble.members.clear();
        for (const auto& m : v) c.ensemble.members.push_back(gbdt::train_config_from_json(m.dump()));
        if (c.ensemble.members.empty()) throw ConfigError("pipeline config: members is empty");
      } else {
        throw ConfigError("pipeline config: unknown key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  validate(c.plan);
  return c;
}

PipelineConfig load_pipeline_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return pipeline_config_from_json(ss.str());
}

gbdt::EnsembleModel train_pipeline(std::span<const SessionRecord> records,
                                   const PipelineConfig& config) {
  const auto labels = require_labels(records);
  const auto split = split_dataset(labels, config.split_seed, config.split);
  const auto layout = FeatureLayout::for_plan(config.plan);

  const auto train_records = gather(records, split.train);
  const auto valid_records = gather(records, split.valid);
  const auto train = extract_matrix(train_records, layout);
  const auto valid = extract_matrix(valid_records, layout);
  const auto train_labels = binary_labels(train_records);
  const auto valid_labels = binary_labels(valid_records);

  auto model = gbdt::train_ensemble(train, train_labels, valid, valid_labels, layout, config.ensemble);
  model.split_seed = config.split_seed;
  model.split_ratios = {config.split.train, config.split.valid, config.split.test};
  gbdt::assign_model_version(model);
  return model;
}

std::vector<double> score_sessions(const gbdt::EnsembleModel& model,
                                   std::span<const SessionRecord> records) {
  return model.predict_batch(extract_matrix(records, model.layout));
}

double score_session(const gbdt::EnsembleModel& model, const SessionRecord& record) {
  return model.predict_proba(extract_features(record, model.layout));
}

EvalReport evaluate_pipeline(const gbdt::EnsembleModel& model,
                             std::span<const SessionRecord> records,
                             std::span<const double> apcer_targets) {
  const auto labels = require_labels(records);
  const SplitRatios ratios{model.split_ratios[0], model.split_ratios[1], model.split_ratios[2]};
  const auto split = split_dataset(labels, model.split_seed, ratios);
  const auto scores = score_sessions(model, records);

  const auto valid = scored_subset(scores, labels, split.valid);
  const auto test = scored_subset(scores, labels, split.test);

  EvalReport report;
  report.model_version = model.model_version;
  report.auc = auc_roc(test);
  report.det = det_points(test);
  report.roc = roc_points(test);
  for (double target : apcer_targets) {
    report.operating_points.push_back(threshold_at_apcer(valid, target, test));
  }
  report.split.train = split.train.size();
  report.split.valid = split.valid.size();
  report.split.test = split.test.size();
  report.split.train_attacks = count_attacks(labels, split.train);
  report.split.valid_attacks = count_attacks(labels, split.valid);
  report.split.test_attacks = count_attacks(labels, split.test);
  return report;
}

}  // namespace vcd
