#include "vcd/gbdt/booster.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "vcd/error.hpp"
#include "vcd/rng.hpp"

namespace vcd::gbdt {
namespace {

constexpr int kMaxShrinkSteps = 8;

struct PendingNode {
  int node = 0;
  int depth = 0;
  std::vector<std::uint32_t> rows;
  double grad = 0.0;
  double hess = 0.0;
};

double leaf_value(double grad, double hess, const TrainConfig& cfg) {
  return -cfg.learning_rate * grad / (hess + cfg.l2);
}

Tree grow_tree(const BinnedMatrix& data, std::vector<std::uint32_t> rows,
               std::span<const double> grad, std::span<const double> hess,
               const std::vector<FeatureBins>& features, const TrainConfig& cfg,
               Histogram& scratch) {
  SplitParams params;
  params.l2 = cfg.l2;
  params.min_samples_leaf = cfg.min_samples_leaf;

  Tree tree;
  tree.nodes.emplace_back();
  PendingNode root;
  root.rows = std::move(rows);
  for (std::uint32_t r : root.rows) {
    root.grad += grad[r];
    root.hess += hess[r];
  }

  std::vector<PendingNode> level;
  level.push_back(std::move(root));
  while (!level.empty()) {
    std::vector<PendingNode> next;
    for (auto& p : level) {
      SplitCandidate best;
      if (p.depth < cfg.max_depth) {
        build_histograms(data, p.rows, grad, hess, scratch);
        best = find_best_split(scratch, features, params);
      }
      if (!best.valid) {
        TreeNode& leaf = tree.nodes[p.node];
        leaf.is_leaf = true;
        leaf.value = leaf_value(p.grad, p.hess, cfg);
        continue;
      }

      PendingNode left, right;
      left.depth = right.depth = p.depth + 1;
      left.grad = best.left_grad;
      left.hess = best.left_hess;
      right.grad = best.right_grad;
      right.hess = best.right_hess;
      left.rows.reserve(best.left_count);
      right.rows.reserve(best.right_count);

      TreeNode split;
      split.is_leaf = false;
      split.feature = best.feature;
      split.kind = best.kind;
      split.threshold = best.threshold;
      split.missing_left = best.missing_left;
      split.left_bins = best.left_bins;
      split.gain = best.gain;
      const auto column = data.column(static_cast<std::size_t>(best.feature));
      for (std::uint32_t r : p.rows) {
        (split.goes_left(column[r]) ? left.rows : right.rows).push_back(r);
      }

      split.left = static_cast<int>(tree.nodes.size());
      split.right = split.left + 1;
      left.node = split.left;
      right.node = split.right;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      tree.nodes[p.node] = split;
      next.push_back(std::move(left));
      next.push_back(std::move(right));
    }
    level = std::move(next);
  }
  return tree;
}

std::vector<double> targets_of(std::span<const BinaryLabel> labels) {
  std::vector<double> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = labels[i] == BinaryLabel::Attack ? 1.0 : 0.0;
  }
  return y;
}

std::vector<double> tree_outputs(const Tree& tree, const BinnedMatrix& data) {
  std::vector<double> out(data.rows);
  const auto n = static_cast<std::int64_t>(data.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = tree.predict(data, static_cast<std::size_t>(i));
  }
  return out;
}

double loss_with(std::span<const double> raw, std::span<const double> delta, double scale,
                 std::span<const BinaryLabel> labels, std::span<const double> weights) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double y = labels[i] == BinaryLabel::Attack ? 1.0 : 0.0;
    num += weights[i] * logistic_loss(raw[i] + scale * delta[i], y);
    den += weights[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

void validate(const TrainConfig& c) {
  if (c.n_trees < 1) throw ConfigError("n_trees must be positive");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.max_depth < 1) throw ConfigError("max_depth must be positive");
  if (c.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be positive");
  if (!(c.l2 > 0.0)) throw ConfigError("l2 must be positive");
  if (c.early_stopping_rounds < 0) throw ConfigError("early_stopping_rounds must be >= 0");
  if (!(c.subsample > 0.0 && c.subsample <= 1.0)) throw ConfigError("subsample must lie in (0,1]");
}

std::vector<double> class_weights(std::span<const BinaryLabel> labels, ClassWeighting weighting) {
  std::vector<double> w(labels.size(), 1.0);
  if (weighting == ClassWeighting::None) return w;
  std::size_t n_attack = 0;
  for (auto l : labels) n_attack += l == BinaryLabel::Attack;
  const std::size_t n_bona = labels.size() - n_attack;
  const double n = static_cast<double>(labels.size());
  const double w_attack = n_attack ? n / (2.0 * n_attack) : 0.0;
  const double w_bona = n_bona ? n / (2.0 * n_bona) : 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    w[i] = labels[i] == BinaryLabel::Attack ? w_attack : w_bona;
  }
  return w;
}

double weighted_logloss(std::span<const double> raw, std::span<const BinaryLabel> labels,
                        std::span<const double> weights) {
  std::vector<double> zero(raw.size(), 0.0);
  return loss_with(raw, zero, 0.0, labels, weights);
}

double Forest::raw_score(std::span<const std::uint8_t> row_bins, int n_trees) const {
  const std::size_t n = n_trees < 0 ? trees.size() : std::min<std::size_t>(n_trees, trees.size());
  double s = base_score;
  for (std::size_t t = 0; t < n; ++t) s += trees[t].predict(row_bins);
  return s;
}

double Forest::raw_score(const BinnedMatrix& data, std::size_t row, int n_trees) const {
  const std::size_t n = n_trees < 0 ? trees.size() : std::min<std::size_t>(n_trees, trees.size());
  double s = base_score;
  for (std::size_t t = 0; t < n; ++t) s += trees[t].predict(data, row);
  return s;
}

Forest fit(const BinnedMatrix& train, std::span<const BinaryLabel> train_labels,
           const BinnedMatrix& valid, std::span<const BinaryLabel> valid_labels,
           const std::vector<FeatureBins>& features, const TrainConfig& config) {
  validate(config);
  if (train.rows != train_labels.size() || valid.rows != valid_labels.size()) {
    throw TrainingError("label count does not match the data");
  }
  if (train.cols != features.size() || valid.cols != features.size()) {
    throw TrainingError("binned data width does not match the bin mapper");
  }
  if (valid.rows == 0) throw TrainingError("validation set is empty");
  const auto n_attack = std::count(train_labels.begin(), train_labels.end(), BinaryLabel::Attack);
  if (n_attack == 0 || n_attack == static_cast<std::ptrdiff_t>(train_labels.size())) {
    throw TrainingError("training set must contain both classes");
  }

  const auto target = targets_of(train_labels);
  const auto weight = class_weights(train_labels, config.class_weighting);
  const auto valid_weight = class_weights(valid_labels, config.class_weighting);

  double wy = 0.0, w = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    wy += weight[i] * target[i];
    w += weight[i];
  }
  const double prior = wy / w;

  Forest forest;
  forest.config = config;
  forest.base_score = std::log(prior / (1.0 - prior));

  std::vector<double> raw(train.rows, forest.base_score);
  std::vector<double> raw_valid(valid.rows, forest.base_score);
  std::vector<double> grad(train.rows), hess(train.rows);
  Histogram scratch;

  auto& hist = forest.history;
  hist.train_loss.push_back(weighted_logloss(raw, train_labels, weight));
  hist.valid_loss.push_back(weighted_logloss(raw_valid, valid_labels, valid_weight));
  double best_valid = hist.valid_loss.back();
  hist.best_iteration = 0;

  std::vector<std::uint32_t> all_rows(train.rows);
  for (std::size_t i = 0; i < train.rows; ++i) all_rows[i] = static_cast<std::uint32_t>(i);

  for (int round = 0; round < config.n_trees; ++round) {
    logistic_gradients(raw, target, weight, grad, hess);

    std::vector<std::uint32_t> rows;
    if (config.subsample < 1.0) {
      Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(round)));
      rows.reserve(static_cast<std::size_t>(train.rows * config.subsample) + 1);
      for (std::uint32_t r : all_rows) {
        if (rng.uniform() < config.subsample) rows.push_back(r);
      }
    } else {
      rows = all_rows;
    }

    Tree tree = grow_tree(train, std::move(rows), grad, hess, features, config, scratch);
    const auto delta = tree_outputs(tree, train);

    const double prev = hist.train_loss.back();
    double scale = 1.0;
    double loss = loss_with(raw, delta, scale, train_labels, weight);
    for (int step = 0; step < kMaxShrinkSteps && loss > prev; ++step) {
      scale *= 0.5;
      loss = loss_with(raw, delta, scale, train_labels, weight);
    }
    if (loss > prev) break;
    if (scale != 1.0) {
      for (auto& node : tree.nodes) {
        if (node.is_leaf) node.value *= scale;
      }
    }
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += tree.predict(train, i);
    hist.train_loss.push_back(weighted_logloss(raw, train_labels, weight));

    const auto valid_delta = tree_outputs(tree, valid);
    for (std::size_t i = 0; i < raw_valid.size(); ++i) raw_valid[i] += valid_delta[i];
    hist.valid_loss.push_back(weighted_logloss(raw_valid, valid_labels, valid_weight));
    forest.trees.push_back(std::move(tree));

    const int n_trees = static_cast<int>(forest.trees.size());
    if (hist.valid_loss.back() < best_valid) {
      best_valid = hist.valid_loss.back();
      hist.best_iteration = n_trees;
    }
    if (config.early_stopping_rounds > 0 &&
        n_trees - hist.best_iteration >= config.early_stopping_rounds) {
      break;
    }
  }

  if (config.early_stopping_rounds > 0) {
    forest.trees.resize(static_cast<std::size_t>(hist.best_iteration));
  } else {
    hist.best_iteration = static_cast<int>(forest.trees.size());
  }
  return forest;
}

std::vector<double> raw_scores(const Forest& forest, const BinnedMatrix& data, int n_trees) {
  std::vector<double> out(data.rows);
  const auto n = static_cast<std::int64_t>(data.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = forest.raw_score(data, static_cast<std::size_t>(i), n_trees);
  }
  return out;
}

namespace reference {
std::vector<double> raw_scores(const Forest& forest, const BinnedMatrix& data, int n_trees) {
  std::vector<double> out(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) out[i] = forest.raw_score(data, i, n_trees);
  return out;
}
}  // namespace reference

}  // namespace vcd::gbdt
