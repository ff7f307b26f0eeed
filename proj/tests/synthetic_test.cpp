#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mccd/binary_io.hpp"
#include "mccd/splitter.hpp"
#include "mccd/synthetic.hpp"

using namespace mccd;

namespace {

// Plug-in mutual information (nats) between two class sequences.
double mutual_information(const std::vector<std::size_t>& x, const std::vector<std::size_t>& y, std::size_t c) {
  std::vector<double> joint(c * c, 0.0), px(c, 0.0), py(c, 0.0);
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[x[i] * c + y[i]] += 1.0 / n;
    px[x[i]] += 1.0 / n;
    py[y[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (std::size_t a = 0; a < c; ++a)
    for (std::size_t b = 0; b < c; ++b)
      if (joint[a * c + b] > 0) mi += joint[a * c + b] * std::log(joint[a * c + b] / (px[a] * py[b]));
  return mi;
}

std::string serialize(const SyntheticCorpus& c) {
  std::ostringstream out;
  write_samples(out, c.samples);
  write_features(out, c.features);
  return out.str();
}

}  // namespace

TEST(Synthetic, SameSeedByteIdentical) {
  SyntheticConfig cfg;
  cfg.train_n = 500;
  cfg.test_n = 200;
  const auto a = generate_synthetic(cfg), b = generate_synthetic(cfg);
  EXPECT_EQ(serialize(a.train), serialize(b.train));
  EXPECT_EQ(serialize(a.test), serialize(b.test));
  EXPECT_EQ(a.splits, b.splits);
  cfg.seed = 43;
  EXPECT_NE(serialize(generate_synthetic(cfg).train), serialize(a.train));
}

TEST(Synthetic, ShapesAndLabels) {
  const auto d = generate_synthetic(SyntheticConfig{});
  EXPECT_EQ(d.train.size(), 4000u);
  EXPECT_EQ(d.test.size(), 2000u);
  EXPECT_EQ(d.train.num_classes(), 6u);
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    EXPECT_EQ(d.train.samples[i].answer, class_name(d.train.labels[i]));
    EXPECT_EQ(d.train.features[i].audio.size(), 16u);
    EXPECT_EQ(d.train.samples[i].group(), kSyntheticGroup);
  }
  EXPECT_EQ(class_name(7), "answer_007");
}

TEST(Synthetic, ZeroBiasShortcutIsUninformative) {
  SyntheticConfig cfg;
  cfg.bias_strength = 0.0;
  const auto d = generate_synthetic(cfg);
  EXPECT_LT(mutual_information(d.train.cues, d.train.labels, cfg.num_classes), 0.01);
  cfg.bias_strength = 0.9;
  const auto biased = generate_synthetic(cfg);
  EXPECT_GT(mutual_information(biased.train.cues, biased.train.labels, cfg.num_classes), 0.5);
}

TEST(Synthetic, TrainingCueRate) {
  const auto d = generate_synthetic(SyntheticConfig{});
  std::size_t agree = 0;
  for (std::size_t i = 0; i < d.train.size(); ++i) agree += d.train.cues[i] == d.train.labels[i];
  // 0.9 + 0.1 / 6
  EXPECT_NEAR(static_cast<double>(agree) / 4000.0, 0.9 + 0.1 / 6.0, 0.02);
}

TEST(Synthetic, TestCuesFollowRegime) {
  const SyntheticConfig cfg;
  const auto d = generate_synthetic(cfg);
  const std::size_t heads = cfg.head_classes();
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    if (d.test.labels[i] < heads) EXPECT_EQ(d.test.cues[i], d.test.labels[i]);
    else EXPECT_LT(d.test.cues[i], heads);
  }
}

TEST(Synthetic, SplitsAgreeWithSplitter) {
  const SplitConfig scfg;
  const auto d = generate_synthetic(SyntheticConfig{});
  const auto r = assign_splits(d.test.samples, scfg);
  EXPECT_EQ(r.assignments, d.splits);
  const auto train = assign_splits(d.train.samples, scfg);
  ASSERT_EQ(train.groups.size(), 1u);
  EXPECT_TRUE(train.groups[0].retained);
  EXPECT_LT(train.groups[0].distribution.normalized_entropy, 0.9);
}

TEST(Synthetic, TailShareExact) {
  const SyntheticConfig cfg;
  const auto d = generate_synthetic(cfg);
  std::size_t tails = 0;
  for (const auto& a : d.splits) tails += a.label == SplitLabel::Tail;
  EXPECT_EQ(tails, 600u);
}

TEST(Synthetic, ConfigValidation) {
  SyntheticConfig cfg;
  cfg.num_classes = 1;
  EXPECT_THROW(generate_synthetic(cfg), std::invalid_argument);
  cfg = SyntheticConfig{};
  cfg.bias_strength = 1.5;
  EXPECT_THROW(generate_synthetic(cfg), std::invalid_argument);
  cfg = SyntheticConfig{};
  cfg.num_head_classes = 6;
  EXPECT_THROW(generate_synthetic(cfg), std::invalid_argument);
}

TEST(Synthetic, TwoClassesUseTwoAnswerRule) {
  SyntheticConfig cfg;
  cfg.num_classes = 2;
  cfg.train_n = 300;
  cfg.test_n = 100;
  const auto d = generate_synthetic(cfg);
  EXPECT_EQ(assign_splits(d.test.samples, SplitConfig{}).assignments, d.splits);
}
