#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "vcd/gbdt/binning.hpp"
#include "vcd/gbdt/histogram.hpp"

namespace vcd::gbdt {

// Set of bins routed left by a categorical split (bit b = bin b).
struct BinSet {
  std::array<std::uint64_t, 4> words{};

  bool contains(std::uint8_t b) const { return (words[b >> 6] >> (b & 63)) & 1u; }
  void insert(std::uint8_t b) { words[b >> 6] |= std::uint64_t{1} << (b & 63); }
  bool operator==(const BinSet&) const = default;
};

enum class SplitKind { Numeric, Categorical };

struct TreeNode {
  bool is_leaf = true;
  double value = 0.0;  // leaf: log-odds contribution

  int feature = -1;
  SplitKind kind = SplitKind::Numeric;
  // Numeric: value bins <= threshold go left.
  std::uint8_t threshold = 0;
  bool missing_left = false;
  // Categorical: bins in the set go left (bin 0 = missing).
  BinSet left_bins;
  int left = -1;
  int right = -1;
  double gain = 0.0;

  bool goes_left(std::uint8_t bin) const {
    if (kind == SplitKind::Categorical) return left_bins.contains(bin);
    if (bin == kMissingBin) return missing_left;
    return bin <= threshold;
  }

  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  // `row_bins` indexed by feature.
  double predict(std::span<const std::uint8_t> row_bins) const {
    int i = 0;
    while (!nodes[i].is_leaf) {
      const auto& n = nodes[i];
      i = n.goes_left(row_bins[n.feature]) ? n.left : n.right;
    }
    return nodes[i].value;
  }

  // Same as predict() for row `row` of a column-major matrix.
  double predict(const BinnedMatrix& data, std::size_t row) const {
    int i = 0;
    while (!nodes[i].is_leaf) {
      const auto& n = nodes[i];
      i = n.goes_left(data.at(row, n.feature)) ? n.left : n.right;
    }
    return nodes[i].value;
  }

  int depth() const;
  bool operator==(const Tree&) const = default;
};

struct SplitParams {
  double l2 = 1.0;
  int min_samples_leaf = 20;
  double min_gain = 1e-9;
  // Categoricals with at most this many populated bins are searched over all
  // 2^(k-1)-1 subsets; wider ones use gradient-ratio ordering.
  int exact_categorical_limit = 8;
};

struct SplitCandidate {
  bool valid = false;
  double gain = 0.0;
  int feature = -1;
  SplitKind kind = SplitKind::Numeric;
  std::uint8_t threshold = 0;
  bool missing_left = false;
  BinSet left_bins;
  double left_grad = 0.0, left_hess = 0.0;
  double right_grad = 0.0, right_hess = 0.0;
  std::uint32_t left_count = 0, right_count = 0;
};

inline double split_score(double g, double h, double l2) { return g * g / (h + l2); }

// Best split of one feature from its histogram slice. Candidates are scanned
// in a fixed order and only strictly better gains replace the incumbent.
SplitCandidate best_split_for_feature(std::span<const HistBin> hist, const FeatureBins& bins,
                                      int feature, const SplitParams& params);

// Best split over all features; ties resolve to the lowest feature index.
SplitCandidate find_best_split(const Histogram& hist, const std::vector<FeatureBins>& features,
                               const SplitParams& params);

}  // namespace vcd::gbdt
