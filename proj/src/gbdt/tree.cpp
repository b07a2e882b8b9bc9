#include "vcd/gbdt/tree.hpp"

#include <algorithm>
#include <numeric>

namespace vcd::gbdt {
namespace {

struct Totals {
  double grad = 0.0;
  double hess = 0.0;
  std::uint32_t count = 0;

  void add(const HistBin& b) {
    grad += b.grad;
    hess += b.hess;
    count += b.count;
  }
};

bool admissible(std::uint32_t left, std::uint32_t right, const SplitParams& p) {
  const auto min_leaf = static_cast<std::uint32_t>(std::max(1, p.min_samples_leaf));
  return left >= min_leaf && right >= min_leaf;
}

void consider(SplitCandidate& best, const Totals& left, const Totals& total, double parent_score,
              const SplitParams& p, auto&& fill) {
  const std::uint32_t right_count = total.count - left.count;
  if (!admissible(left.count, right_count, p)) return;
  const double rg = total.grad - left.grad;
  const double rh = total.hess - left.hess;
  const double gain = split_score(left.grad, left.hess, p.l2) + split_score(rg, rh, p.l2) - parent_score;
  if (gain <= p.min_gain || (best.valid && gain <= best.gain)) return;
  best.valid = true;
  best.gain = gain;
  best.left_grad = left.grad;
  best.left_hess = left.hess;
  best.left_count = left.count;
  best.right_grad = rg;
  best.right_hess = rh;
  best.right_count = right_count;
  fill(best);
}

}  // namespace

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf) continue;
    d[nodes[i].left] = d[i] + 1;
    d[nodes[i].right] = d[i] + 1;
    deepest = std::max(deepest, d[i] + 1);
  }
  return deepest;
}

SplitCandidate best_split_for_feature(std::span<const HistBin> hist, const FeatureBins& bins,
                                      int feature, const SplitParams& params) {
  SplitCandidate best;
  const int n_value_bins = bins.value_bin_count();
  Totals total;
  for (int b = 0; b <= n_value_bins; ++b) total.add(hist[b]);
  if (total.count < 2) return best;
  const double parent = split_score(total.grad, total.hess, params.l2);

  if (bins.kind == FeatureKind::Numeric) {
    const HistBin& missing = hist[kMissingBin];
    Totals prefix;
    for (int t = 1; t <= n_value_bins; ++t) {
      prefix.add(hist[t]);
      for (const bool missing_left : {true, false}) {
        Totals left = prefix;
        if (missing_left) left.add(missing);
        consider(best, left, total, parent, params, [&](SplitCandidate& c) {
          c.feature = feature;
          c.kind = SplitKind::Numeric;
          c.threshold = static_cast<std::uint8_t>(t);
          c.missing_left = missing_left;
        });
      }
    }
    return best;
  }

  // Categorical: the missing bin takes part as one more category.
  std::vector<std::uint8_t> present;
  for (int b = 0; b <= n_value_bins; ++b) {
    if (hist[b].count > 0) present.push_back(static_cast<std::uint8_t>(b));
  }
  const auto m = static_cast<int>(present.size());
  if (m < 2) return best;

  auto record = [&](const BinSet& set) {
    return [&, set](SplitCandidate& c) {
      c.feature = feature;
      c.kind = SplitKind::Categorical;
      c.left_bins = set;
      c.missing_left = set.contains(kMissingBin);
    };
  };

  if (m <= params.exact_categorical_limit) {
    // The last populated bin always stays right, so each unordered partition
    // is visited exactly once.
    const std::uint32_t n_subsets = (1u << (m - 1)) - 1;
    for (std::uint32_t mask = 1; mask <= n_subsets; ++mask) {
      Totals left;
      BinSet set;
      for (int i = 0; i < m - 1; ++i) {
        if (mask & (1u << i)) {
          left.add(hist[present[i]]);
          set.insert(present[i]);
        }
      }
      consider(best, left, total, parent, params, record(set));
    }
    return best;
  }

  std::vector<std::uint8_t> order = present;
  std::stable_sort(order.begin(), order.end(), [&](std::uint8_t a, std::uint8_t b) {
    return hist[a].grad / (hist[a].hess + params.l2) < hist[b].grad / (hist[b].hess + params.l2);
  });
  Totals left;
  BinSet set;
  for (int i = 0; i + 1 < m; ++i) {
    left.add(hist[order[i]]);
    set.insert(order[i]);
    consider(best, left, total, parent, params, record(set));
  }
  return best;
}

SplitCandidate find_best_split(const Histogram& hist, const std::vector<FeatureBins>& features,
                               const SplitParams& params) {
  std::vector<SplitCandidate> per_feature(features.size());
  const auto n = static_cast<std::int64_t>(features.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t f = 0; f < n; ++f) {
    const auto fu = static_cast<std::size_t>(f);
    per_feature[fu] = best_split_for_feature(
        std::span<const HistBin>(hist.data() + fu * kHistogramWidth, kHistogramWidth),
        features[fu], static_cast<int>(f), params);
  }
  SplitCandidate best;
  for (const auto& c : per_feature) {
    if (c.valid && (!best.valid || c.gain > best.gain)) best = c;
  }
  return best;
}

}  // namespace vcd::gbdt
