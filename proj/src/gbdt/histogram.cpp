#include "vcd/gbdt/histogram.hpp"

#include <algorithm>

namespace vcd::gbdt {
namespace {

// Hessians of confidently classified rows underflow toward zero; keep them
// strictly positive so leaf denominators never degenerate.
constexpr double kMinHessian = 1e-16;

inline void accumulate_feature(const std::uint8_t* column, std::span<const std::uint32_t> rows,
                               std::span<const double> grad, std::span<const double> hess,
                               HistBin* hist) {
  for (const std::uint32_t r : rows) {
    HistBin& b = hist[column[r]];
    b.grad += grad[r];
    b.hess += hess[r];
    ++b.count;
  }
}

inline void gradient_at(std::size_t i, std::span<const double> raw, std::span<const double> target,
                        std::span<const double> weight, std::span<double> grad,
                        std::span<double> hess) {
  const double p = sigmoid(raw[i]);
  grad[i] = weight[i] * (p - target[i]);
  hess[i] = weight[i] * std::max(p * (1.0 - p), kMinHessian);
}

}  // namespace

void build_histograms(const BinnedMatrix& data, std::span<const std::uint32_t> rows,
                      std::span<const double> grad, std::span<const double> hess, Histogram& out) {
  out.assign(data.cols * kHistogramWidth, HistBin{});
  const auto cols = static_cast<std::int64_t>(data.cols);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t f = 0; f < cols; ++f) {
    const auto fu = static_cast<std::size_t>(f);
    accumulate_feature(data.bins.data() + fu * data.rows, rows, grad, hess,
                       out.data() + fu * kHistogramWidth);
  }
}

void logistic_gradients(std::span<const double> raw, std::span<const double> target,
                        std::span<const double> weight, std::span<double> grad,
                        std::span<double> hess) {
  const auto n = static_cast<std::int64_t>(raw.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    gradient_at(static_cast<std::size_t>(i), raw, target, weight, grad, hess);
  }
}

namespace reference {

void build_histograms(const BinnedMatrix& data, std::span<const std::uint32_t> rows,
                      std::span<const double> grad, std::span<const double> hess, Histogram& out) {
  out.assign(data.cols * kHistogramWidth, HistBin{});
  for (std::size_t f = 0; f < data.cols; ++f) {
    const std::uint8_t* column = data.bins.data() + f * data.rows;
    HistBin* hist = out.data() + f * kHistogramWidth;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::uint32_t r = rows[i];
      hist[column[r]].grad += grad[r];
      hist[column[r]].hess += hess[r];
      hist[column[r]].count += 1;
    }
  }
}

void logistic_gradients(std::span<const double> raw, std::span<const double> target,
                        std::span<const double> weight, std::span<double> grad,
                        std::span<double> hess) {
  for (std::size_t i = 0; i < raw.size(); ++i) gradient_at(i, raw, target, weight, grad, hess);
}

}  // namespace reference
}  // namespace vcd::gbdt
