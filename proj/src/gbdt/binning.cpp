#include "vcd/gbdt/binning.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "vcd/error.hpp"

namespace vcd::gbdt {

std::uint8_t FeatureBins::bin(double v) const {
  if (std::isnan(v)) return kMissingBin;
  const auto it = std::lower_bound(edges.begin(), edges.end(), v);
  return static_cast<std::uint8_t>(1 + (it - edges.begin()));
}

std::uint8_t FeatureBins::bin_code(int code) const {
  if (code < 0 || code >= cardinality) return kMissingBin;
  return static_cast<std::uint8_t>(code + 1);
}

std::vector<double> quantile_edges(std::vector<double> values, int max_value_bins) {
  std::vector<double> edges;
  if (values.empty()) return edges;
  std::sort(values.begin(), values.end());
  std::vector<double> distinct;
  std::unique_copy(values.begin(), values.end(), std::back_inserter(distinct));

  auto midpoint = [](double lo, double hi) { return lo + (hi - lo) / 2.0; };

  if (static_cast<int>(distinct.size()) <= max_value_bins) {
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
      edges.push_back(midpoint(distinct[i], distinct[i + 1]));
    }
    return edges;
  }

  const std::size_t n = values.size();
  for (int k = 1; k < max_value_bins; ++k) {
    const std::size_t idx = std::max<std::size_t>(1, k * n / max_value_bins);
    const double lo = values[idx - 1];
    // Cut between lo and the next distinct value above it.
    const auto next = std::upper_bound(distinct.begin(), distinct.end(), lo);
    if (next == distinct.end()) break;
    edges.push_back(midpoint(lo, *next));
  }
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (static_cast<int>(edges.size()) > max_value_bins - 1) edges.resize(max_value_bins - 1);
  return edges;
}

BinMapper BinMapper::fit(const FeatureMatrix& train, std::span<const int> cardinalities,
                         int max_value_bins) {
  if (max_value_bins < 2 || max_value_bins > kMaxValueBins) {
    throw ConfigError("max_value_bins must lie in [2, 255]");
  }
  if (cardinalities.size() != train.categorical_cols) {
    throw ConfigError("categorical cardinality count does not match the matrix");
  }
  std::vector<FeatureBins> features(train.numeric_cols + train.categorical_cols);
  std::vector<double> column;
  column.reserve(train.rows);
  for (std::size_t f = 0; f < train.numeric_cols; ++f) {
    column.clear();
    for (std::size_t r = 0; r < train.rows; ++r) {
      const double v = train.numeric[r * train.numeric_cols + f];
      if (std::isnan(v)) continue;
      if (std::isinf(v)) {
        throw ValidationError("non-finite value in numeric feature " + std::to_string(f));
      }
      column.push_back(v);
    }
    features[f].kind = FeatureKind::Numeric;
    features[f].edges = quantile_edges(column, max_value_bins);
  }
  for (std::size_t c = 0; c < train.categorical_cols; ++c) {
    if (cardinalities[c] < 1 || cardinalities[c] > kMaxValueBins) {
      throw ConfigError("categorical cardinality must lie in [1, 255]");
    }
    auto& fb = features[train.numeric_cols + c];
    fb.kind = FeatureKind::Categorical;
    fb.cardinality = cardinalities[c];
  }
  return BinMapper(std::move(features));
}

BinnedMatrix BinMapper::transform(const FeatureMatrix& m) const {
  if (m.numeric_cols + m.categorical_cols != features_.size()) {
    throw VersionError("feature matrix width does not match the bin mapper");
  }
  BinnedMatrix out;
  out.rows = m.rows;
  out.cols = features_.size();
  out.bins.resize(out.rows * out.cols);
  const auto cols = static_cast<std::int64_t>(out.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t fi = 0; fi < cols; ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    std::uint8_t* dst = out.bins.data() + f * out.rows;
    const auto& fb = features_[f];
    if (fb.kind == FeatureKind::Numeric) {
      for (std::size_t r = 0; r < m.rows; ++r) dst[r] = fb.bin(m.numeric[r * m.numeric_cols + f]);
    } else {
      const std::size_t c = f - m.numeric_cols;
      for (std::size_t r = 0; r < m.rows; ++r) {
        dst[r] = fb.bin_code(m.categorical[r * m.categorical_cols + c]);
      }
    }
  }
  return out;
}

void BinMapper::bin_row(const FeatureVector& v, std::span<std::uint8_t> out) const {
  const std::size_t n_numeric = v.numeric.size();
  if (n_numeric + v.categorical.size() != features_.size() || out.size() < features_.size()) {
    throw VersionError("feature vector width does not match the bin mapper");
  }
  for (std::size_t f = 0; f < n_numeric; ++f) out[f] = features_[f].bin(v.numeric[f]);
  for (std::size_t c = 0; c < v.categorical.size(); ++c) {
    out[n_numeric + c] = features_[n_numeric + c].bin_code(v.categorical[c]);
  }
}

}  // namespace vcd::gbdt
