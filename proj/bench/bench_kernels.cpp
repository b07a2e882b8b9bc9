// Serial reference kernels against their OpenMP versions. The thread count
// is the benchmark argument; pass 0 to run the serial reference.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "vcd/camera_sim.hpp"
#include "vcd/gbdt/booster.hpp"
#include "vcd/gbdt/histogram.hpp"
#include "vcd/rng.hpp"

using namespace vcd;
using namespace vcd::gbdt;

namespace {

struct Problem {
  BinnedMatrix data;
  std::vector<std::uint32_t> rows;
  std::vector<double> raw, target, weight, grad, hess;
};

const Problem& problem() {
  static const Problem p = [] {
    Problem p;
    Rng rng(1);
    p.data.rows = 20000;
    p.data.cols = 101;
    p.data.bins.resize(p.data.rows * p.data.cols);
    for (auto& b : p.data.bins) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    for (std::uint32_t r = 0; r < p.data.rows; ++r) p.rows.push_back(r);
    for (std::size_t i = 0; i < p.data.rows; ++i) {
      p.raw.push_back(rng.normal());
      p.target.push_back(rng.bernoulli(0.1) ? 1.0 : 0.0);
      p.weight.push_back(1.0);
    }
    p.grad.resize(p.data.rows);
    p.hess.resize(p.data.rows);
    for (std::size_t i = 0; i < p.data.rows; ++i) {
      p.grad[i] = rng.normal();
      p.hess[i] = rng.uniform(0.01, 0.25);
    }
    return p;
  }();
  return p;
}

const Forest& forest() {
  static const Forest f = [] {
    const auto& p = problem();
    std::vector<BinaryLabel> labels;
    for (double t : p.target) labels.push_back(t > 0.5 ? BinaryLabel::Attack : BinaryLabel::Bonafide);
    std::vector<FeatureBins> features(p.data.cols);
    for (auto& fb : features) {
      for (int e = 0; e < 254; ++e) fb.edges.push_back(e);
    }
    TrainConfig cfg;
    cfg.n_trees = 50;
    cfg.early_stopping_rounds = 0;
    return fit(p.data, labels, p.data, labels, features, cfg);
  }();
  return f;
}

void BM_Histograms(benchmark::State& state) {
  const auto& p = problem();
  const int threads = static_cast<int>(state.range(0));
  if (threads > 0) omp_set_num_threads(threads);
  Histogram h;
  for (auto _ : state) {
    if (threads == 0) {
      reference::build_histograms(p.data, p.rows, p.grad, p.hess, h);
    } else {
      build_histograms(p.data, p.rows, p.grad, p.hess, h);
    }
    benchmark::DoNotOptimize(h.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.data.rows * p.data.cols));
}

void BM_Gradients(benchmark::State& state) {
  auto p = problem();
  const int threads = static_cast<int>(state.range(0));
  if (threads > 0) omp_set_num_threads(threads);
  for (auto _ : state) {
    if (threads == 0) {
      reference::logistic_gradients(p.raw, p.target, p.weight, p.grad, p.hess);
    } else {
      logistic_gradients(p.raw, p.target, p.weight, p.grad, p.hess);
    }
    benchmark::DoNotOptimize(p.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.raw.size()));
}

void BM_RawScores(benchmark::State& state) {
  const auto& p = problem();
  const auto& f = forest();
  const int threads = static_cast<int>(state.range(0));
  if (threads > 0) omp_set_num_threads(threads);
  for (auto _ : state) {
    auto s = threads == 0 ? reference::raw_scores(f, p.data) : raw_scores(f, p.data);
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.data.rows));
}

void BM_GenerateDataset(benchmark::State& state) {
  const auto spec = reference_population(7);
  omp_set_num_threads(static_cast<int>(std::max<std::int64_t>(1, state.range(0))));
  for (auto _ : state) {
    auto records = generate_dataset(spec, 2000);
    benchmark::DoNotOptimize(records.data());
  }
  state.SetItemsProcessed(state.iterations() * 2000);
}

}  // namespace

BENCHMARK(BM_Histograms)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_Gradients)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_RawScores)->Arg(0)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond)->UseRealTime();
BENCHMARK(BM_GenerateDataset)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
