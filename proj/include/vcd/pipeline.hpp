#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vcd/eval.hpp"
#include "vcd/gbdt/ensemble.hpp"
#include "vcd/probe.hpp"
#include "vcd/session.hpp"

namespace vcd {

// Everything `vcd train` needs besides the data.
struct PipelineConfig {
  ChallengePlan plan;
  SplitRatios split;
  std::uint64_t split_seed = 17;
  gbdt::EnsembleConfig ensemble = gbdt::EnsembleConfig::defaults(1);
};

std::string pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(std::string_view text);
PipelineConfig load_pipeline_config_file(const std::string& path);

inline const std::vector<double> kDefaultApcerTargets{1e-1, 1e-2, 1e-3};

// Splits labeled records, extracts features and trains on train/valid. The
// split seed and ratios are recorded in the model.
gbdt::EnsembleModel train_pipeline(std::span<const SessionRecord> records,
                                   const PipelineConfig& config);

// Rebuilds the model's split on `records`; thresholds are selected on the
// validation part and every reported number comes from the test part.
EvalReport evaluate_pipeline(const gbdt::EnsembleModel& model,
                             std::span<const SessionRecord> records,
                             std::span<const double> apcer_targets = kDefaultApcerTargets);

// Attack probabilities for arbitrary (possibly unlabeled) records.
std::vector<double> score_sessions(const gbdt::EnsembleModel& model,
                                   std::span<const SessionRecord> records);
double score_session(const gbdt::EnsembleModel& model, const SessionRecord& record);

}  // namespace vcd
