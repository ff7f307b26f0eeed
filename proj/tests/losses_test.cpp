#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mccd/gradcheck.hpp"
#include "mccd/losses.hpp"

using namespace mccd;

namespace {

using LVec = std::vector<long double>;

// Extended-precision reference implementation, written from the formulas
// without sharing code with the library.
LVec lsoftmax(const Vec& y) {
  long double m = y[0];
  for (double x : y) m = std::max<long double>(m, x);
  long double s = 0;
  for (double x : y) s += std::exp(x - m);
  LVec p(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) p[i] = std::exp(y[i] - m) / s;
  return p;
}

long double lkl(const LVec& p, const LVec& q) {
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

long double ref_discrepancy(const std::vector<LogitBundle>& batch, const MccdConfig& cfg) {
  long double total = 0;
  for (const auto& b : batch) {
    auto map = [&](const Vec& y) {
      if (cfg.distance_space == DistanceSpace::Probability) return lsoftmax(y);
      return LVec(y.begin(), y.end());
    };
    const LVec w = map(b.fused);
    const Vec* heads[] = {&b.audio, &b.video, &b.question};
    for (int t = 0; t < 3; ++t) {
      if (!cfg.discrepancy_terms[t]) continue;
      const LVec u = map(*heads[t]);
      long double sq = 0;
      for (std::size_t j = 0; j < u.size(); ++j) sq += (u[j] - w[j]) * (u[j] - w[j]);
      total += 1.0L / (std::sqrt(sq) + cfg.epsilon);
    }
  }
  return cfg.alpha * total / (cfg.active_terms() * static_cast<long double>(batch.size()));
}

long double ref_cycle(const std::vector<LogitBundle>& batch, const MccdConfig& cfg) {
  long double total = 0;
  for (const auto& b : batch) {
    const LVec p = lsoftmax(b.question), q = lsoftmax(b.audio), r = lsoftmax(b.video);
    total += lkl(p, q) + lkl(q, r) + lkl(r, p);
  }
  return cfg.beta * total / (3.0L * batch.size());
}

long double ref_answer(const std::vector<LogitBundle>& batch, const std::vector<std::size_t>& labels) {
  long double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) total -= std::log(lsoftmax(batch[i].fused)[labels[i]]);
  return total / batch.size();
}

std::vector<LogitBundle> random_batch(std::mt19937_64& gen, std::size_t k, std::size_t c, double scale = 2.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<LogitBundle> batch(k, LogitBundle::zeros(c));
  for (auto& b : batch)
    for (Head h : kAllHeads)
      for (double& x : b.head(h)) x = nd(gen);
  return batch;
}

std::vector<std::size_t> random_labels(std::mt19937_64& gen, std::size_t k, std::size_t c) {
  std::vector<std::size_t> labels(k);
  for (auto& l : labels) l = gen() % c;
  return labels;
}

// Gradient of a long double reference via central differences at h = 1e-6.
template <typename F>
std::vector<double> ref_gradient(const std::vector<LogitBundle>& batch, F f) {
  const std::size_t k = batch.size(), c = batch[0].classes();
  std::vector<double> flat = flatten(batch), g(flat.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + h;
    const long double fp = f(unflatten(flat, k, c));
    flat[i] = orig - h;
    const long double fm = f(unflatten(flat, k, c));
    flat[i] = orig;
    g[i] = static_cast<double>((fp - fm) / (2.0L * h));
  }
  return g;
}

void expect_grads_close(const std::vector<LogitBundle>& got, const std::vector<double>& want, double tol) {
  const auto flat = flatten(got);
  ASSERT_EQ(flat.size(), want.size());
  for (std::size_t i = 0; i < flat.size(); ++i) EXPECT_LE(relative_error(flat[i], want[i]), tol) << "coordinate " << i;
}

}  // namespace

TEST(Softmax, Basics) {
  EXPECT_EQ(softmax(Vec{0, 0}), (Vec{0.5, 0.5}));
  for (double c : {-800.0, 0.0, 3.5, 700.0}) {
    const Vec p = softmax(Vec{c, c, c, c});
    for (double x : p) EXPECT_DOUBLE_EQ(x, 0.25);
  }
  EXPECT_THROW(softmax(Vec{}), std::invalid_argument);
}

TEST(Softmax, MatchesExtendedPrecision) {
  const Vec p = softmax(Vec{1, 2, 3});
  const double want[] = {0.09003057317038046, 0.24472847105479765, 0.6652409557748219};
  const LVec ref = lsoftmax(Vec{1, 2, 3});
  double sum = 0;
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(p[i], want[i], 4e-16);
    EXPECT_NEAR(p[i], static_cast<double>(ref[i]), 4e-16);
    sum += p[i];
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Softmax, SumsToOneAndPositive) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd(0.0, 30.0);
  for (int t = 0; t < 200; ++t) {
    Vec y(1 + gen() % 50);
    for (double& x : y) x = nd(gen);
    const Vec p = softmax(y);
    double s = 0;
    for (double x : p) {
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Discrepancy, IdenticalHeadsGiveInverseEpsilon) {
  MccdConfig cfg;
  cfg.alpha = 1.0;
  LogitBundle b = LogitBundle::zeros(4);
  b.audio = b.video = b.question = b.fused = {0.3, -1.0, 2.0, 0.0};
  const std::vector<LogitBundle> batch{b};
  const LossValue v = discrepancy_loss(batch, cfg);
  EXPECT_NEAR(v.value, 1e5, 1e-6);
  for (double x : flatten(v.grads)) EXPECT_EQ(x, 0.0);
}

TEST(Discrepancy, AlphaZeroIsZero) {
  std::mt19937_64 gen(1);
  MccdConfig cfg;
  cfg.alpha = 0.0;
  const LossValue v = discrepancy_loss(random_batch(gen, 5, 7), cfg);
  EXPECT_EQ(v.value, 0.0);
  for (double x : flatten(v.grads)) EXPECT_EQ(x, 0.0);
}

TEST(Discrepancy, MatchesOracleBothSpaces) {
  for (DistanceSpace space : {DistanceSpace::Probability, DistanceSpace::RawLogit}) {
    std::mt19937_64 gen(77);
    MccdConfig cfg;
    cfg.alpha = 0.5;
    cfg.distance_space = space;
    const auto batch = random_batch(gen, 4, 6);
    const LossValue v = discrepancy_loss(batch, cfg);
    EXPECT_NEAR(v.value, static_cast<double>(ref_discrepancy(batch, cfg)), 1e-13 * std::abs(v.value));
    expect_grads_close(v.grads, ref_gradient(batch, [&](const auto& b) { return ref_discrepancy(b, cfg); }), 1e-7);
  }
}

TEST(Discrepancy, DroppedTermRescales) {
  std::mt19937_64 gen(8);
  const auto batch = random_batch(gen, 3, 5);
  MccdConfig cfg;
  cfg.discrepancy_terms = {true, false, true};
  EXPECT_EQ(cfg.active_terms(), 2u);
  const LossValue v = discrepancy_loss(batch, cfg);
  EXPECT_NEAR(v.value, static_cast<double>(ref_discrepancy(batch, cfg)), 1e-14);
  for (const auto& g : v.grads)
    for (double x : g.video) EXPECT_EQ(x, 0.0);
}

TEST(Discrepancy, StrictlyDecreasesWithDistance) {
  // Raw space, C = 2: moving the audio head away from fused increases d_a.
  MccdConfig cfg;
  cfg.distance_space = DistanceSpace::RawLogit;
  LogitBundle b = LogitBundle::zeros(2);
  b.video = {1, 0};
  b.question = {0, 1};
  double prev = std::numeric_limits<double>::infinity();
  for (double shift : {0.0, 0.1, 0.5, 1.0, 5.0}) {
    b.audio = {shift, 0};
    const double v = discrepancy_loss(std::vector<LogitBundle>{b}, cfg).value;
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Cycle, EqualHeadsGiveZero) {
  std::mt19937_64 gen(4);
  auto batch = random_batch(gen, 6, 9);
  for (auto& b : batch) b.video = b.question = b.audio;
  const LossValue v = cycle_loss(batch, MccdConfig{});
  EXPECT_LT(v.value, 1e-10);
  for (double x : flatten(v.grads)) EXPECT_NEAR(x, 0.0, 1e-16);
}

TEST(Cycle, BetaZeroIsZero) {
  std::mt19937_64 gen(4);
  MccdConfig cfg;
  cfg.beta = 0.0;
  EXPECT_EQ(cycle_loss(random_batch(gen, 3, 3), cfg).value, 0.0);
}

TEST(Cycle, HandDistributions) {
  // p = softmax(y_q) = (.5,.5), q = softmax(y_a) = (.25,.75), r = softmax(y_v) = (.5,.5).
  LogitBundle b = LogitBundle::zeros(2);
  b.audio = {0.0, std::log(3.0)};
  const std::vector<LogitBundle> batch{b};
  const long double l_qa = 0.5L * std::log(2.0L) + 0.5L * std::log(2.0L / 3.0L);
  const long double l_av = 0.25L * std::log(0.5L) + 0.75L * std::log(1.5L);
  EXPECT_NEAR(static_cast<double>(l_qa), 0.14384103622589046, 1e-16);
  EXPECT_NEAR(static_cast<double>(l_av), 0.13081203594113696, 1e-16);
  MccdConfig cfg;
  EXPECT_NEAR(cycle_loss(batch, cfg).value, 0.027465307216702742, 1e-16);
  EXPECT_NEAR(cycle_loss(batch, cfg).value, static_cast<double>(0.3L * (l_qa + l_av) / 3), 1e-16);
  cfg.beta = 1.0;
  EXPECT_NEAR(cycle_loss(batch, cfg).value, 0.0915510240556758, 1e-16);
  const LossValue lc = cycle_loss(batch, cfg);
  for (double x : lc.grads[0].fused) EXPECT_EQ(x, 0.0);
}

TEST(Cycle, MatchesOracle) {
  std::mt19937_64 gen(91);
  MccdConfig cfg;
  cfg.beta = 1.3;
  const auto batch = random_batch(gen, 5, 8);
  const LossValue v = cycle_loss(batch, cfg);
  EXPECT_NEAR(v.value, static_cast<double>(ref_cycle(batch, cfg)), 1e-14);
  expect_grads_close(v.grads, ref_gradient(batch, [&](const auto& b) { return ref_cycle(b, cfg); }), 1e-8);
}

TEST(Cycle, NonNegativeOnManyBundles) {
  std::mt19937_64 gen(10);
  for (int t = 0; t < 10000; ++t) {
    const auto batch = random_batch(gen, 1, 2 + gen() % 12, 0.1 + (gen() % 100) / 10.0);
    EXPECT_GE(cycle_loss(batch, MccdConfig{}).value, 0.0);
  }
}

TEST(Answer, UniformLogits) {
  const std::vector<Vec> y{Vec(4, 0.0), Vec(4, 2.5)};
  const std::vector<std::size_t> labels{1, 3};
  EXPECT_NEAR(answer_loss(y, labels).value, std::log(4.0), 1e-15);
}

TEST(Answer, SaturatedMargin) {
  const std::vector<Vec> y{{0, 50, 0}};
  const LossValue v = answer_loss(y, std::vector<std::size_t>{1});
  EXPECT_GT(v.value, 0.0);
  EXPECT_LT(v.value, 1e-20);
}

TEST(Answer, LabelOutOfRange) {
  const std::vector<Vec> y{{0, 1}};
  EXPECT_THROW(answer_loss(y, std::vector<std::size_t>{2}), std::out_of_range);
  EXPECT_THROW(answer_loss(y, std::vector<std::size_t>{0, 1}), ShapeError);
}

TEST(Answer, MatchesOracleAndGradientSumsToZero) {
  std::mt19937_64 gen(12);
  const auto batch = random_batch(gen, 7, 10);
  const auto labels = random_labels(gen, 7, 10);
  const LossValue v = answer_loss(batch, labels);
  EXPECT_NEAR(v.value, static_cast<double>(ref_answer(batch, labels)), 1e-14);
  expect_grads_close(v.grads, ref_gradient(batch, [&](const auto& b) { return ref_answer(b, labels); }), 1e-8);
  for (const auto& g : v.grads) {
    double s = 0;
    for (double x : g.fused) s += x;
    EXPECT_NEAR(s, 0.0, 1e-16);
    for (Head h : kUnimodalHeads)
      for (double x : g.head(h)) EXPECT_EQ(x, 0.0);
  }
}

TEST(Joint, ReducesToAnswerLossWithoutMccd) {
  std::mt19937_64 gen(13);
  const auto batch = random_batch(gen, 4, 5);
  const auto labels = random_labels(gen, 4, 5);
  MccdConfig cfg;
  cfg.alpha = cfg.beta = 0.0;
  const JointLoss j = joint_loss(batch, labels, cfg);
  const LossValue a = answer_loss(batch, labels);
  EXPECT_EQ(j.total.value, a.value);
  EXPECT_EQ(flatten(j.total.grads), flatten(a.grads));
}

TEST(Joint, IdenticalHeadsComposition) {
  MccdConfig cfg;
  cfg.alpha = cfg.beta = 1.0;
  LogitBundle b = LogitBundle::zeros(3);
  b.audio = b.video = b.question = b.fused = {1, 2, 3};
  const std::vector<LogitBundle> batch{b};
  const std::vector<std::size_t> labels{0};
  const double la = answer_loss(batch, labels).value;
  EXPECT_NEAR(joint_loss(batch, labels, cfg).total.value, la + 1e5, 1e-6);
}

TEST(Joint, EqualsComponentSumBitForBit) {
  std::mt19937_64 gen(14);
  const auto batch = random_batch(gen, 6, 11);
  const auto labels = random_labels(gen, 6, 11);
  const MccdConfig cfg;
  const JointLoss j = joint_loss(batch, labels, cfg);
  const LossValue a = answer_loss(batch, labels), d = discrepancy_loss(batch, cfg), c = cycle_loss(batch, cfg);
  EXPECT_EQ(j.total.value, a.value + d.value + c.value);
  EXPECT_EQ(j.answer, a.value);
  EXPECT_EQ(j.discrepancy, d.value);
  EXPECT_EQ(j.cycle, c.value);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    LogitBundle want = a.grads[i];
    want += d.grads[i];
    want += c.grads[i];
    EXPECT_EQ(j.total.grads[i], want);
  }
}

TEST(Joint, AlphaLinearity) {
  std::mt19937_64 gen(15);
  const auto batch = random_batch(gen, 4, 6);
  const auto labels = random_labels(gen, 4, 6);
  MccdConfig cfg;
  cfg.alpha = 0.25;  // powers of two keep the scaling exact
  const JointLoss j1 = joint_loss(batch, labels, cfg);
  cfg.alpha = 1.0;
  const JointLoss j4 = joint_loss(batch, labels, cfg);
  EXPECT_DOUBLE_EQ(4.0 * (j1.total.value - j1.answer - j1.cycle), j4.total.value - j4.answer - j4.cycle);
  EXPECT_EQ(4.0 * j1.discrepancy, j4.discrepancy);
}

TEST(Invariance, ShiftOneHeadLeavesLossesUnchanged) {
  std::mt19937_64 gen(16);
  for (int t = 0; t < 50; ++t) {
    const auto batch = random_batch(gen, 3, 2 + gen() % 10);
    const auto labels = random_labels(gen, 3, batch[0].classes());
    const MccdConfig cfg;
    for (Head h : kAllHeads) {
      auto shifted = batch;
      const double c = (static_cast<double>(gen() % 2001) - 1000.0) / 100.0;
      for (double& x : shifted[gen() % 3].head(h)) x += c;
      EXPECT_NEAR(discrepancy_loss(shifted, cfg).value, discrepancy_loss(batch, cfg).value, 1e-10);
      EXPECT_NEAR(cycle_loss(shifted, cfg).value, cycle_loss(batch, cfg).value, 1e-10);
      EXPECT_NEAR(answer_loss(shifted, labels).value, answer_loss(batch, labels).value, 1e-10);
    }
  }
}

TEST(Shapes, MismatchedHeadsRejected) {
  LogitBundle b = LogitBundle::zeros(3);
  b.video = {1, 2};
  const std::vector<LogitBundle> batch{b};
  EXPECT_THROW(discrepancy_loss(batch, MccdConfig{}), ShapeError);
  EXPECT_THROW(cycle_loss(batch, MccdConfig{}), ShapeError);
  EXPECT_THROW(cycle_loss(std::vector<LogitBundle>{}, MccdConfig{}), std::invalid_argument);
}

TEST(Config, Validation) {
  MccdConfig cfg;
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = MccdConfig{};
  cfg.alpha = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
