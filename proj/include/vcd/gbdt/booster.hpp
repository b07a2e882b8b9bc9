#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vcd/gbdt/binning.hpp"
#include "vcd/gbdt/tree.hpp"
#include "vcd/session.hpp"

namespace vcd::gbdt {

enum class ClassWeighting { None, Balanced };

struct TrainConfig {
  int n_trees = 200;
  double learning_rate = 0.1;
  int max_depth = 6;
  int min_samples_leaf = 20;
  double l2 = 1.0;
  ClassWeighting class_weighting = ClassWeighting::Balanced;
  // 0 disables early stopping.
  int early_stopping_rounds = 20;
  // Fraction of training rows drawn (without replacement) for each tree.
  double subsample = 1.0;
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);

struct TrainingHistory {
  std::vector<double> train_loss;  // [0] = base score only, [k] = after k trees
  std::vector<double> valid_loss;
  int best_iteration = 0;  // number of trees kept
};

struct Forest {
  TrainConfig config;
  double base_score = 0.0;
  std::vector<Tree> trees;
  TrainingHistory history;

  // Raw log-odds using the first `n_trees` trees (all when negative).
  double raw_score(std::span<const std::uint8_t> row_bins, int n_trees = -1) const;
  double raw_score(const BinnedMatrix& data, std::size_t row, int n_trees = -1) const;
  double predict_proba(std::span<const std::uint8_t> row_bins) const {
    return sigmoid(raw_score(row_bins));
  }
};

// Per-row weights: 1 for ClassWeighting::None, n / (2 n_class) for Balanced.
std::vector<double> class_weights(std::span<const BinaryLabel> labels, ClassWeighting weighting);

// Weighted mean binary log loss of raw scores.
double weighted_logloss(std::span<const double> raw, std::span<const BinaryLabel> labels,
                        std::span<const double> weights);

// Second-order boosting on binary log loss with histogram split search.
// Requires both classes in `train` and a non-empty `valid` set. A tree whose
// full-step update would raise the training loss is shrunk (halved up to
// eight times) or dropped, which ends training; training loss is therefore
// non-increasing in the tree count.
Forest fit(const BinnedMatrix& train, std::span<const BinaryLabel> train_labels,
           const BinnedMatrix& valid, std::span<const BinaryLabel> valid_labels,
           const std::vector<FeatureBins>& features, const TrainConfig& config);

// Batch raw scores / probabilities; parallel over rows.
std::vector<double> raw_scores(const Forest& forest, const BinnedMatrix& data, int n_trees = -1);

namespace reference {
std::vector<double> raw_scores(const Forest& forest, const BinnedMatrix& data, int n_trees = -1);
}  // namespace reference

}  // namespace vcd::gbdt
