#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "vcd/gbdt/binning.hpp"

namespace vcd::gbdt {

struct HistBin {
  double grad = 0.0;
  double hess = 0.0;
  std::uint32_t count = 0;
};

// Histograms for all features of one node, laid out as
// [feature * kHistogramWidth + bin].
using Histogram = std::vector<HistBin>;

// Sums gradient statistics of `rows` into `out` (resized and zeroed here).
// Parallel over features; each feature accumulates its rows in the given
// order, so the result is bit-identical for any thread count.
void build_histograms(const BinnedMatrix& data, std::span<const std::uint32_t> rows,
                      std::span<const double> grad, std::span<const double> hess, Histogram& out);

// Per-row logistic gradients and hessians, parallel over rows.
void logistic_gradients(std::span<const double> raw, std::span<const double> target,
                        std::span<const double> weight, std::span<double> grad,
                        std::span<double> hess);

namespace reference {

// Single-threaded kernels kept as the ground truth for tests and benchmarks.
void build_histograms(const BinnedMatrix& data, std::span<const std::uint32_t> rows,
                      std::span<const double> grad, std::span<const double> hess, Histogram& out);

void logistic_gradients(std::span<const double> raw, std::span<const double> target,
                        std::span<const double> weight, std::span<double> grad,
                        std::span<double> hess);

}  // namespace reference

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

// Binary log loss for logit `raw`, numerically stable.
inline double logistic_loss(double raw, double target) {
  // softplus(x) = log(1 + e^x)
  auto softplus = [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
  return target > 0.5 ? softplus(-raw) : softplus(raw);
}

}  // namespace vcd::gbdt
