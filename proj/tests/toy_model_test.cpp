#include <gtest/gtest.h>

#include <random>

#include "mccd/gradcheck.hpp"
#include "mccd/toy_model.hpp"

using namespace mccd;

namespace {

Features random_features(std::mt19937_64& gen, std::size_t dim) {
  std::normal_distribution<double> nd;
  Features f{Vec(dim), Vec(dim), Vec(dim)};
  for (Vec* v : {&f.audio, &f.video, &f.question})
    for (double& x : *v) x = nd(gen);
  return f;
}

void set_dense(ToyModel& m, const DenseLayout& l, const std::vector<double>& w, const std::vector<double>& b) {
  auto p = m.params();
  std::copy(w.begin(), w.end(), p.begin() + static_cast<std::ptrdiff_t>(l.weights()));
  std::copy(b.begin(), b.end(), p.begin() + static_cast<std::ptrdiff_t>(l.bias()));
}

}  // namespace

TEST(ToyModel, LayoutCoversAllParameters) {
  const ModelShape s{16, 32, 32, 6};
  const ModelLayout l(s);
  EXPECT_EQ(l.size, 3 * (16 * 32 + 32) + (96 * 6 + 6) + 3 * ((32 * 32 + 32) + (32 * 6 + 6)));
  EXPECT_EQ(l.fused_prefix(), 3 * (16 * 32 + 32) + (96 * 6 + 6));
  EXPECT_EQ(l.bias_hidden[0].offset, l.fused_prefix());
}

TEST(ToyModel, ZeroModelGivesZeroLogits) {
  const ToyModel m(ModelShape{4, 5, 3, 7});
  std::mt19937_64 gen(1);
  const LogitBundle b = m.forward(random_features(gen, 4));
  EXPECT_EQ(b, LogitBundle::zeros(7));
}

TEST(ToyModel, HandEvaluatedTwoClass) {
  ToyModel m(ModelShape{2, 2, 2, 2});
  const ModelLayout& l = m.layout();
  const std::vector<double> identity = {1, 0, 0, 1};
  for (const auto& e : l.encoder) set_dense(m, e, identity, {0, 0});
  // fused = [h_a; h_v; h_q] . rows, plus bias
  set_dense(m, l.fusion, {1, 0, 0, 1, 0, 0,  //
                          0, 1, 1, 0, 0, 2},
            {0.5, -0.5});
  set_dense(m, l.bias_hidden[0], identity, {0, 0});
  set_dense(m, l.bias_out[0], {2, 0, 0, 3}, {1, 1});
  const Features f{{1.0, -2.0}, {3.0, 0.5}, {-1.0, 4.0}};
  const LogitBundle b = m.forward(f);
  // h_a = relu(1, -2) = (1, 0); h_v = (3, 0.5); h_q = (0, 4)
  // fused_0 = 1 + 0.5 + 0.5 = 2, fused_1 = 0 + 3 + 8 - 0.5 = 10.5
  EXPECT_EQ(b.fused, (Vec{2.0, 10.5}));
  // audio bias: relu(h_a) = (1, 0) -> (2 + 1, 0 + 1)
  EXPECT_EQ(b.audio, (Vec{3.0, 1.0}));
  EXPECT_EQ(b.video, (Vec{0.0, 0.0}));
}

TEST(ToyModel, BatchedEqualsPerSample) {
  const ToyModel m = ToyModel::initialized(ModelShape{5, 8, 4, 3}, 9);
  std::mt19937_64 gen(2);
  std::vector<Features> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_features(gen, 5));
  const auto out = m.forward(batch);
  ASSERT_EQ(out.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out[i], m.forward(batch[i]));
}

TEST(ToyModel, DimensionMismatch) {
  const ToyModel m(ModelShape{4, 4, 4, 3});
  const Features f{Vec(4), Vec(3), Vec(4)};
  EXPECT_THROW(m.forward(f), ShapeError);
  EXPECT_THROW(FusedClassifier(m).predict(f), ShapeError);
}

TEST(ToyModel, InitializationIsSeeded) {
  const ModelShape s{4, 6, 5, 3};
  const auto a = ToyModel::initialized(s, 1), b = ToyModel::initialized(s, 1), c = ToyModel::initialized(s, 2);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST(ToyModel, BackwardMatchesFiniteDifferences) {
  const ModelShape s{4, 6, 5, 3};
  ToyModel m = ToyModel::initialized(s, 5);
  std::mt19937_64 gen(6);
  const Features f = random_features(gen, 4);
  const std::vector<std::size_t> label = {1};
  MccdConfig cfg;
  cfg.alpha = 0.3;
  cfg.beta = 0.7;
  auto loss_at = [&](std::span<const double> params) {
    ToyModel probe(s);
    std::copy(params.begin(), params.end(), probe.params().begin());
    return joint_loss(std::vector<LogitBundle>{probe.forward(f)}, label, cfg).total.value;
  };
  const ForwardCache cache = m.forward_cached(f);
  const JointLoss j = joint_loss(std::vector<LogitBundle>{cache.logits}, label, cfg);
  std::vector<double> grad(m.parameter_count(), 0.0);
  m.backward(f, cache, j.total.grads[0], grad);
  const std::vector<double> x(m.params().begin(), m.params().end());
  EXPECT_LT(check_gradient(loss_at, grad, x, 1e-6).max_rel_err, 1e-6);
}

TEST(FusedClassifier, IgnoresBiasLearners) {
  ToyModel m = ToyModel::initialized(ModelShape{4, 6, 5, 3}, 3);
  std::mt19937_64 gen(7);
  std::vector<Features> fs;
  for (int i = 0; i < 20; ++i) fs.push_back(random_features(gen, 4));
  std::vector<Vec> before;
  for (const auto& f : fs) before.push_back(FusedClassifier(m).logits(f));
  auto p = m.params();
  for (std::size_t i = m.layout().fused_prefix(); i < p.size(); ++i) p[i] = 1e6 * static_cast<double>(i % 7);
  const FusedClassifier clf(m);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    EXPECT_EQ(clf.logits(fs[i]), before[i]);
    EXPECT_EQ(clf.logits(fs[i]), m.forward(fs[i]).fused);
  }
}
