#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <omp.h>

#include "test_support.hpp"
#include "vcd/error.hpp"
#include "vcd/gbdt/booster.hpp"
#include "vcd/gbdt/ensemble.hpp"
#include "vcd/gbdt/histogram.hpp"

using namespace vcd;
using namespace vcd::gbdt;

namespace {

// Matrix with `numeric` columns and optional categorical columns.
FeatureMatrix make_matrix(std::size_t rows, std::size_t numeric, std::size_t categorical) {
  FeatureMatrix m;
  m.rows = rows;
  m.numeric_cols = numeric;
  m.categorical_cols = categorical;
  m.numeric.assign(rows * numeric, 0.0);
  m.categorical.assign(rows * categorical, 0);
  return m;
}

using vcd::testing::random_binned;

TrainConfig stump_config(int min_leaf, double l2, ClassWeighting w) {
  TrainConfig c;
  c.n_trees = 1;
  c.max_depth = 1;
  c.min_samples_leaf = min_leaf;
  c.l2 = l2;
  c.class_weighting = w;
  c.early_stopping_rounds = 0;
  return c;
}

}  // namespace

TEST(Binning, MissingBinAndClamping) {
  auto m = make_matrix(6, 1, 1);
  m.numeric = {1.0, 2.0, 3.0, kMissing, 2.0, 1.0};
  m.categorical = {0, 1, 2, 3, 2, 1};
  const auto mapper = BinMapper::fit(m, std::vector<int>{4});
  const auto& f0 = mapper.feature(0);
  EXPECT_EQ(f0.bin(kMissing), kMissingBin);
  EXPECT_EQ(f0.bin(-100.0), 1);
  EXPECT_EQ(f0.bin(1e9), f0.value_bin_count());
  EXPECT_TRUE(std::is_sorted(f0.edges.begin(), f0.edges.end()));
  EXPECT_EQ(std::adjacent_find(f0.edges.begin(), f0.edges.end()), f0.edges.end());
  EXPECT_LT(f0.bin(1.0), f0.bin(2.0));
  EXPECT_LT(f0.bin(2.0), f0.bin(3.0));
  const auto& f1 = mapper.feature(1);
  EXPECT_EQ(f1.bin_code(2), 3);
  EXPECT_EQ(f1.bin_code(7), kMissingBin);
  EXPECT_EQ(f1.bin_code(-1), kMissingBin);
}

TEST(Binning, ManyDistinctValuesUseAtMost255Bins) {
  auto m = make_matrix(5000, 1, 0);
  Rng rng(1);
  for (auto& v : m.numeric) v = rng.normal();
  const auto mapper = BinMapper::fit(m, {});
  EXPECT_LE(mapper.feature(0).value_bin_count(), kMaxValueBins);
  EXPECT_GT(mapper.feature(0).value_bin_count(), 200);
  const auto edges = mapper.feature(0).edges;
  for (std::size_t i = 1; i < edges.size(); ++i) EXPECT_LT(edges[i - 1], edges[i]);
}

TEST(Binning, InfinityRejected) {
  auto m = make_matrix(3, 1, 0);
  m.numeric = {1.0, INFINITY, 2.0};
  EXPECT_THROW(BinMapper::fit(m, {}), ValidationError);
}

TEST(Kernels, ParallelHistogramsMatchSerialBitwise) {
  Rng rng(12);
  auto d = random_binned(rng, 3000, 20, 3, 0.2);
  std::vector<double> grad(d.binned.rows), hess(d.binned.rows);
  for (auto& g : grad) g = rng.normal();
  for (auto& h : hess) h = rng.uniform(0.01, 0.25);
  std::vector<std::uint32_t> rows;
  for (std::uint32_t r = 0; r < d.binned.rows; r += 1 + (r % 3)) rows.push_back(r);
  Histogram serial, parallel;
  reference::build_histograms(d.binned, rows, grad, hess, serial);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  build_histograms(d.binned, rows, grad, hess, parallel);
  omp_set_num_threads(saved);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    ASSERT_EQ(serial[i].grad, parallel[i].grad);
    ASSERT_EQ(serial[i].hess, parallel[i].hess);
    ASSERT_EQ(serial[i].count, parallel[i].count);
  }
}

TEST(Kernels, ParallelGradientsMatchSerial) {
  Rng rng(13);
  const std::size_t n = 1000;
  std::vector<double> raw(n), y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = 3.0 * rng.normal();
    y[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
    w[i] = rng.uniform(0.5, 2.0);
  }
  std::vector<double> g1(n), h1(n), g2(n), h2(n);
  reference::logistic_gradients(raw, y, w, g1, h1);
  omp_set_num_threads(4);
  logistic_gradients(raw, y, w, g2, h2);
  omp_set_num_threads(1);
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(h1, h2);
}

TEST(Kernels, SigmoidAndLoss) {
  EXPECT_NEAR(sigmoid(1.0), 0.7310585786300049, 1e-15);
  EXPECT_NEAR(sigmoid(-1.0), 0.2689414213699951, 1e-15);
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(logistic_loss(0.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_TRUE(std::isfinite(logistic_loss(-800.0, 1.0)));
}

TEST(Gbdt, StumpMatchesExhaustiveSearch) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = static_cast<std::size_t>(rng.uniform_int(20, 500));
    auto d = random_binned(rng, rows, static_cast<int>(rng.uniform_int(1, 4)),
                           static_cast<int>(rng.uniform_int(0, 2)), rng.uniform(0.0, 0.3));
    const auto weighting = trial % 2 ? ClassWeighting::Balanced : ClassWeighting::None;
    const auto cfg = stump_config(static_cast<int>(rng.uniform_int(1, 15)), rng.uniform(0.1, 3.0), weighting);
    const auto forest = fit(d.binned, d.labels, d.binned, d.labels, d.features, cfg);

    const auto w = class_weights(d.labels, weighting);
    std::vector<double> grad, hess;
    vcd::testing::base_gradients(d.labels, w, grad, hess);
    const auto oracle = vcd::testing::exhaustive_split(d.binned, d.features, grad, hess, cfg.l2,
                                                       cfg.min_samples_leaf);
    if (!oracle.valid) {
      ASSERT_TRUE(forest.trees.empty() || forest.trees[0].nodes[0].is_leaf) << trial;
      continue;
    }
    ASSERT_EQ(forest.trees.size(), 1u) << trial;
    const auto& root = forest.trees[0].nodes[0];
    ASSERT_FALSE(root.is_leaf) << trial;
    EXPECT_NEAR(root.gain, oracle.gain, 1e-9 * std::max(1.0, oracle.gain)) << trial;
    const auto fitted = vcd::testing::partition_gain(vcd::testing::rows_left(d.binned, root), grad, hess, cfg.l2);
    EXPECT_NEAR(fitted, oracle.gain, 1e-9 * std::max(1.0, oracle.gain)) << trial;
  }
}

TEST(Gbdt, SeparableFeature) {
  auto m = make_matrix(200, 1, 0);
  std::vector<BinaryLabel> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    m.numeric[i] = i < 100 ? 0.0 : 1.0;
    y[i] = i < 100 ? BinaryLabel::Attack : BinaryLabel::Bonafide;
  }
  const auto mapper = BinMapper::fit(m, {});
  const auto binned = mapper.transform(m);
  TrainConfig cfg;
  cfg.min_samples_leaf = 5;
  cfg.early_stopping_rounds = 0;
  const auto forest = fit(binned, y, binned, y, mapper.features(), cfg);
  std::uint8_t attack_row[1] = {mapper.feature(0).bin(0.0)};
  std::uint8_t bona_row[1] = {mapper.feature(0).bin(1.0)};
  EXPECT_GT(forest.predict_proba(attack_row), 0.99);
  EXPECT_LT(forest.predict_proba(bona_row), 0.01);
}

TEST(Gbdt, ConstantFeatureGivesBaseRate) {
  const std::size_t n = 32812;
  auto m = make_matrix(n, 1, 0);
  std::vector<BinaryLabel> y(n, BinaryLabel::Bonafide);
  for (std::size_t i = 0; i < 2812; ++i) y[i] = BinaryLabel::Attack;
  const auto mapper = BinMapper::fit(m, {});
  const auto binned = mapper.transform(m);
  TrainConfig cfg;
  cfg.class_weighting = ClassWeighting::None;
  cfg.n_trees = 20;
  const auto forest = fit(binned, y, binned, y, mapper.features(), cfg);
  std::uint8_t row[1] = {mapper.feature(0).bin(0.0)};
  EXPECT_NEAR(forest.predict_proba(row), 2812.0 / 32812.0, 1e-9);
}

TEST(Gbdt, BalancedWeightsCentreBaseScore) {
  const std::size_t n = 1000;
  auto m = make_matrix(n, 1, 0);
  std::vector<BinaryLabel> y(n, BinaryLabel::Bonafide);
  for (std::size_t i = 0; i < 200; ++i) y[i] = BinaryLabel::Attack;
  const auto mapper = BinMapper::fit(m, {});
  const auto binned = mapper.transform(m);
  TrainConfig cfg;
  cfg.n_trees = 1;
  const auto forest = fit(binned, y, binned, y, mapper.features(), cfg);
  EXPECT_NEAR(forest.base_score, 0.0, 1e-12);
}

TEST(Gbdt, TrainingLossNeverRises) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto d = random_binned(rng, 400, 5, 1, 0.1);
    // Label noise keeps the problem from being solved in a few trees.
    for (auto& l : d.labels) {
      if (rng.bernoulli(0.2)) l = l == BinaryLabel::Attack ? BinaryLabel::Bonafide : BinaryLabel::Attack;
    }
    TrainConfig cfg;
    cfg.n_trees = 60;
    cfg.learning_rate = trial % 2 ? 0.3 : 1.0;
    cfg.min_samples_leaf = 3;
    cfg.subsample = trial % 3 ? 1.0 : 0.7;
    cfg.early_stopping_rounds = 0;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto forest = fit(d.binned, d.labels, d.binned, d.labels, d.features, cfg);
    const auto& loss = forest.history.train_loss;
    ASSERT_GE(loss.size(), 2u);
    for (std::size_t k = 1; k < loss.size(); ++k) ASSERT_LE(loss[k], loss[k - 1] + 1e-12) << trial;
  }
}

TEST(Gbdt, EarlyStoppingKeepsBestIteration) {
  Rng rng(6);
  auto train = random_binned(rng, 500, 4, 0, 0.0);
  auto valid = random_binned(rng, 300, 4, 0, 0.0);
  valid.features = train.features;
  TrainConfig cfg;
  cfg.n_trees = 300;
  cfg.min_samples_leaf = 2;
  cfg.early_stopping_rounds = 5;
  const auto forest = fit(train.binned, train.labels, valid.binned, valid.labels, train.features, cfg);
  const auto& h = forest.history;
  EXPECT_EQ(forest.trees.size(), static_cast<std::size_t>(h.best_iteration));
  const auto best = std::min_element(h.valid_loss.begin(), h.valid_loss.end()) - h.valid_loss.begin();
  EXPECT_EQ(best, h.best_iteration);
}

TEST(Gbdt, ParallelTrainingIsBitIdentical) {
  Rng rng(21);
  auto d = random_binned(rng, 2000, 12, 2, 0.15);
  TrainConfig cfg;
  cfg.n_trees = 30;
  cfg.subsample = 0.8;
  omp_set_num_threads(1);
  const auto a = fit(d.binned, d.labels, d.binned, d.labels, d.features, cfg);
  omp_set_num_threads(4);
  const auto b = fit(d.binned, d.labels, d.binned, d.labels, d.features, cfg);
  const auto ra = raw_scores(a, d.binned);
  const auto rb = reference::raw_scores(b, d.binned);
  omp_set_num_threads(1);
  EXPECT_EQ(a.trees, b.trees);
  EXPECT_EQ(ra, rb);
}

TEST(Gbdt, TrainingErrors) {
  Rng rng(2);
  auto d = random_binned(rng, 100, 2, 0, 0.0);
  std::vector<BinaryLabel> one_class(100, BinaryLabel::Bonafide);
  EXPECT_THROW(fit(d.binned, one_class, d.binned, one_class, d.features, TrainConfig{}), TrainingError);
  BinnedMatrix empty;
  empty.cols = d.binned.cols;
  EXPECT_THROW(fit(d.binned, d.labels, empty, {}, d.features, TrainConfig{}), TrainingError);
  TrainConfig bad;
  bad.learning_rate = 0;
  EXPECT_THROW(fit(d.binned, d.labels, d.binned, d.labels, d.features, bad), ConfigError);
}

TEST(Gbdt, HandBuiltLeavesGiveClosedFormProbabilities) {
  Forest f;
  Tree t;
  TreeNode root;
  root.is_leaf = false;
  root.feature = 0;
  root.threshold = 1;
  root.left = 1;
  root.right = 2;
  TreeNode left, right;
  left.value = 1.0;
  right.value = -1.0;
  t.nodes = {root, left, right};
  f.trees.push_back(t);
  std::uint8_t low[1] = {1}, high[1] = {2};
  EXPECT_NEAR(f.predict_proba(low), 0.7310585786, 1e-10);
  EXPECT_NEAR(f.predict_proba(high), 0.2689414214, 1e-10);
}

// ---------------------------------------------------------------------------
// Ensemble

namespace {

struct SmallProblem {
  FeatureLayout layout;
  FeatureMatrix train, valid;
  std::vector<BinaryLabel> train_labels, valid_labels;
};

SmallProblem small_problem(std::uint64_t seed) {
  SmallProblem p;
  p.layout = FeatureLayout::for_plan(ChallengePlan{});
  Rng rng(seed);
  auto fill = [&](FeatureMatrix& m, std::vector<BinaryLabel>& y, std::size_t rows) {
    m = make_matrix(rows, p.layout.numeric_count(), p.layout.categorical_count());
    m.layout_version = p.layout.version;
    y.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const bool attack = rng.bernoulli(0.3);
      y[r] = attack ? BinaryLabel::Attack : BinaryLabel::Bonafide;
      for (std::size_t c = 0; c < m.numeric_cols; ++c) {
        m.numeric[r * m.numeric_cols + c] =
            rng.bernoulli(0.1) ? kMissing : rng.normal() + (attack && c % 7 == 0 ? 1.0 : 0.0);
      }
      m.categorical[r * 2] = static_cast<int>(rng.uniform_int(0, kPlatformCount - 1));
      m.categorical[r * 2 + 1] = attack && rng.bernoulli(0.5) ? 1 : static_cast<int>(rng.uniform_int(0, 3));
    }
  };
  fill(p.train, p.train_labels, 600);
  fill(p.valid, p.valid_labels, 200);
  return p;
}

EnsembleConfig quick_config() {
  auto cfg = EnsembleConfig::defaults(3);
  for (auto& m : cfg.members) m.n_trees = 25;
  return cfg;
}

}  // namespace

TEST(Ensemble, MeanLiesBetweenMembers) {
  const auto p = small_problem(1);
  const auto model = train_ensemble(p.train, p.train_labels, p.valid, p.valid_labels, p.layout, quick_config());
  ASSERT_EQ(model.forests.size(), 2u);
  for (std::size_t r = 0; r < p.valid.rows; ++r) {
    const auto v = p.valid.row(r);
    const auto members = model.member_probas(v);
    const double mean = model.predict_proba(v);
    EXPECT_GE(mean, std::min(members[0], members[1]) - 1e-15);
    EXPECT_LE(mean, std::max(members[0], members[1]) + 1e-15);
    EXPECT_GT(mean, 0.0);
    EXPECT_LT(mean, 1.0);
  }
}

TEST(Ensemble, ZeroLogitMembersGiveHalf) {
  const auto p = small_problem(2);
  auto model = train_ensemble(p.train, p.train_labels, p.valid, p.valid_labels, p.layout, quick_config());
  for (auto& f : model.forests) {
    f.base_score = 0.0;
    f.trees.clear();
  }
  EXPECT_EQ(model.predict_proba(p.valid.row(0)), 0.5);
}

TEST(Ensemble, SaveLoadRoundTrip) {
  const auto p = small_problem(3);
  const auto model = train_ensemble(p.train, p.train_labels, p.valid, p.valid_labels, p.layout, quick_config());
  const auto text = save_model(model);
  const auto loaded = load_model(text);
  EXPECT_EQ(save_model(loaded), text);
  EXPECT_EQ(loaded.model_version, model.model_version);
  EXPECT_EQ(loaded.predict_batch(p.valid), model.predict_batch(p.valid));

  // Retraining reproduces the same bytes.
  const auto again = train_ensemble(p.train, p.train_labels, p.valid, p.valid_labels, p.layout, quick_config());
  EXPECT_EQ(save_model(again), text);
}

TEST(Ensemble, CorruptOrForeignFilesRejected) {
  const auto p = small_problem(4);
  const auto model = train_ensemble(p.train, p.train_labels, p.valid, p.valid_labels, p.layout, quick_config());
  auto text = save_model(model);
  EXPECT_THROW(load_model(text.substr(0, text.size() / 2)), ModelError);
  auto j = nlohmann::json::parse(text);
  j["forests"][0]["base_score"] = 0.123;
  EXPECT_THROW(load_model(j.dump()), ModelError);
  j = nlohmann::json::parse(text);
  j["format_version"] = 99;
  EXPECT_THROW(load_model(j.dump()), VersionError);
  EXPECT_THROW(load_model(R"({"hello":"world"})"), ModelError);
}

TEST(Ensemble, LayoutMismatchIsVersionError) {
  const auto p = small_problem(5);
  const auto model = train_ensemble(p.train, p.train_labels, p.valid, p.valid_labels, p.layout, quick_config());
  auto v = p.valid.row(0);
  v.layout_version ^= 1;
  EXPECT_THROW(model.predict_proba(v), VersionError);
}

TEST(Ensemble, AllMissingVectorScores) {
  const auto p = small_problem(6);
  const auto model = train_ensemble(p.train, p.train_labels, p.valid, p.valid_labels, p.layout, quick_config());
  FeatureVector v;
  v.numeric.assign(p.layout.numeric_count(), kMissing);
  v.categorical = {9, -3};
  v.layout_version = p.layout.version;
  const double s = model.predict_proba(v);
  EXPECT_TRUE(std::isfinite(s));
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
}

TEST(Ensemble, CategoricalCodesAreNominal) {
  // Relabel platform codes with a permutation: predictions must not change.
  const auto p = small_problem(7);
  const int perm[kPlatformCount] = {3, 5, 0, 1, 4, 2};
  auto permute = [&](FeatureMatrix m) {
    for (std::size_t r = 0; r < m.rows; ++r) m.categorical[r * 2] = perm[m.categorical[r * 2]];
    return m;
  };
  const auto a = train_ensemble(p.train, p.train_labels, p.valid, p.valid_labels, p.layout, quick_config());
  const auto b = train_ensemble(permute(p.train), p.train_labels, permute(p.valid), p.valid_labels,
                                p.layout, quick_config());
  const auto pa = a.predict_batch(p.valid);
  const auto pb = b.predict_batch(permute(p.valid));
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-12) << i;
}
