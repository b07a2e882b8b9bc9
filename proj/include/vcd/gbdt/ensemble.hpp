#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "vcd/features.hpp"
#include "vcd/gbdt/binning.hpp"
#include "vcd/gbdt/booster.hpp"

namespace vcd::gbdt {

inline constexpr int kModelFormatVersion = 1;

// Two member configurations of the same engine: a deeper full-data forest
// and a shallower row-subsampled one.
struct EnsembleConfig {
  std::vector<TrainConfig> members;

  static EnsembleConfig defaults(std::uint64_t seed = 1);
};

// Member forests share one bin mapper and one feature layout. The ensemble
// probability is the mean of the members' sigmoid outputs.
struct EnsembleModel {
  FeatureLayout layout;
  BinMapper mapper;
  std::vector<Forest> forests;
  std::string model_version;
  // Dataset split the model was trained on, so evaluation can rebuild it.
  std::uint64_t split_seed = 0;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};

  // Throws VersionError when the vector was built for another layout.
  double predict_proba(const FeatureVector& v) const;
  std::vector<double> member_probas(const FeatureVector& v) const;

  // Parallel over rows.
  std::vector<double> predict_batch(const FeatureMatrix& m) const;
};

EnsembleModel train_ensemble(const FeatureMatrix& train, std::span<const BinaryLabel> train_labels,
                             const FeatureMatrix& valid, std::span<const BinaryLabel> valid_labels,
                             const FeatureLayout& layout, const EnsembleConfig& config);

// Canonical JSON; byte-identical for equal models. model_version is a content
// hash assigned at save time when empty.
std::string save_model(const EnsembleModel& model);
EnsembleModel load_model(std::string_view text);
void save_model_file(const EnsembleModel& model, const std::string& path);
EnsembleModel load_model_file(const std::string& path);

// Stamps model_version from the serialized content.
void assign_model_version(EnsembleModel& model);

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(std::string_view text);

}  // namespace vcd::gbdt
