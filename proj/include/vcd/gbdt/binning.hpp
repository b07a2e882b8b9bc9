#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vcd/features.hpp"

namespace vcd::gbdt {

inline constexpr int kMaxValueBins = 255;
inline constexpr std::uint8_t kMissingBin = 0;
inline constexpr int kHistogramWidth = 256;

enum class FeatureKind { Numeric, Categorical };

// Binning of a single feature. Bin 0 always holds missing values.
// Numeric: value v lands in bin 1 + |{e in edges : e < v}|, so at most
// edges.size() + 1 <= 255 value bins; out-of-range values clamp to the
// extreme bins. Categorical: code c in [0, cardinality) lands in bin c + 1;
// unknown codes fall into the missing bin.
struct FeatureBins {
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<double> edges;
  int cardinality = 0;

  int value_bin_count() const {
    return kind == FeatureKind::Numeric ? static_cast<int>(edges.size()) + 1 : cardinality;
  }
  std::uint8_t bin(double v) const;
  std::uint8_t bin_code(int code) const;

  bool operator==(const FeatureBins&) const = default;
};

// Column-major matrix of bin indices.
struct BinnedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bins;

  std::span<const std::uint8_t> column(std::size_t f) const {
    return {bins.data() + f * rows, rows};
  }
  std::uint8_t at(std::size_t row, std::size_t f) const { return bins[f * rows + row]; }
};

// Numeric features first (layout order), then categorical features.
class BinMapper {
 public:
  BinMapper() = default;
  explicit BinMapper(std::vector<FeatureBins> features) : features_(std::move(features)) {}

  // Quantile edges from the non-missing training values of each numeric
  // column. Throws ValidationError on +-infinity.
  static BinMapper fit(const FeatureMatrix& train, std::span<const int> cardinalities,
                       int max_value_bins = kMaxValueBins);

  std::size_t feature_count() const { return features_.size(); }
  const FeatureBins& feature(std::size_t f) const { return features_[f]; }
  const std::vector<FeatureBins>& features() const { return features_; }

  BinnedMatrix transform(const FeatureMatrix& m) const;
  // Row-major bins of one vector; `out` must hold feature_count() entries.
  void bin_row(const FeatureVector& v, std::span<std::uint8_t> out) const;

  bool operator==(const BinMapper&) const = default;

 private:
  std::vector<FeatureBins> features_;
};

// Quantile edges for one column of non-missing, finite values.
std::vector<double> quantile_edges(std::vector<double> values, int max_value_bins);

}  // namespace vcd::gbdt
