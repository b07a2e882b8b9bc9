#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcd/probe.hpp"
#include "vcd/session.hpp"

namespace vcd {

// Bumped whenever the derived feature set changes.
inline constexpr std::uint32_t kFeatureRevision = 1;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

// Ordered feature names for one challenge plan. The version combines the
// feature revision with a fingerprint of the plan, so a model trained under
// one plan rejects vectors extracted under another.
struct FeatureLayout {
  std::uint64_t version = 0;
  ChallengePlan plan;
  std::vector<std::string> numeric_names;
  std::vector<std::string> categorical_names;
  std::vector<int> categorical_cardinalities;

  static FeatureLayout for_plan(const ChallengePlan& plan);

  std::size_t numeric_count() const { return numeric_names.size(); }
  std::size_t categorical_count() const { return categorical_names.size(); }

  bool operator==(const FeatureLayout&) const = default;
};

struct FeatureVector {
  std::vector<double> numeric;  // NaN marks a missing value
  std::vector<int> categorical;  // platform code, browser code
  std::uint64_t layout_version = 0;

  bool operator==(const FeatureVector& other) const;
};

// Total: every input combination yields a full-length vector.
FeatureVector extract_features(const SessionRecord& record, const FeatureLayout& layout);

// Row-major feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t numeric_cols = 0;
  std::size_t categorical_cols = 0;
  std::vector<double> numeric;
  std::vector<int> categorical;
  std::uint64_t layout_version = 0;

  std::span<const double> numeric_row(std::size_t r) const {
    return {numeric.data() + r * numeric_cols, numeric_cols};
  }
  std::span<const int> categorical_row(std::size_t r) const {
    return {categorical.data() + r * categorical_cols, categorical_cols};
  }
  FeatureVector row(std::size_t r) const;
};

FeatureMatrix extract_matrix(std::span<const SessionRecord> records, const FeatureLayout& layout);

std::vector<BinaryLabel> binary_labels(std::span<const SessionRecord> records);

// CSV with a header of layout names; missing values are empty cells. A
// trailing label column is written when labels are given.
void write_feature_csv(std::ostream& out, const FeatureMatrix& matrix, const FeatureLayout& layout,
                       std::span<const BinaryLabel> labels = {});

}  // namespace vcd
