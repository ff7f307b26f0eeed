#pragma once

// Synthetic audio-visual QA corpus with a planted question shortcut.
//
// Every sample carries three feature vectors. The answer is a deterministic
// function of the audio and video features:
//
//   label = argmax_c (U_a x_a + U_v x_v)_c
//
// for fixed random projections U_a, U_v (features are drawn by rejection
// until they decode to the wanted label). The question features are a noisy
// prototype of a "cue" class. In training data the cue is copied from the
// label with probability bias_strength and drawn uniformly from all classes
// otherwise, so the question alone is a strong but spurious predictor (and
// carries no label information at bias_strength = 0).
//
// Answers are long-tailed: the first num_head_classes classes share
// (1 - tail_fraction) of the samples, the rest share tail_fraction. Test
// samples of head classes have a cue that agrees with the label; test samples
// of tail classes have a cue pointing at a head class. Running the splitter on
// the test answers labels exactly the tail-class samples as tail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mccd/dataset.hpp"
#include "mccd/losses.hpp"
#include "mccd/random.hpp"
#include "mccd/splitter.hpp"

namespace mccd {

struct SyntheticConfig {
  std::size_t num_classes = 6;
  std::size_t feature_dim = 16;
  std::size_t train_n = 4000;
  std::size_t test_n = 2000;
  double bias_strength = 0.9;   // P(cue copied from the label) in training data
  double tail_fraction = 0.3;   // share of samples whose answer is a tail class
  std::size_t num_head_classes = 0;  // 0 picks max(1, num_classes / 3)
  double cue_scale = 3.0;       // norm of a cue prototype
  double cue_noise = 1.0;       // per-coordinate noise added to question features
  std::uint64_t seed = 42;

  std::size_t head_classes() const {
    return num_head_classes ? num_head_classes : std::max<std::size_t>(1, num_classes / 3);
  }

  void validate() const {
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
    if (train_n < 1 || test_n < 1) throw std::invalid_argument("train_n and test_n must be >= 1");
    if (!(bias_strength >= 0.0 && bias_strength <= 1.0)) throw std::invalid_argument("bias_strength must be in [0, 1]");
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) throw std::invalid_argument("tail_fraction must be in (0, 1)");
    if (head_classes() >= num_classes) throw std::invalid_argument("need at least one tail class");
    if (!(cue_scale >= 0.0) || !(cue_noise >= 0.0)) throw std::invalid_argument("cue_scale and cue_noise must be >= 0");
  }
};

struct Features {
  Vec audio, video, question;
  bool operator==(const Features&) const = default;
};

struct SyntheticCorpus {
  std::vector<QASample> samples;
  std::vector<Features> features;
  std::vector<std::size_t> labels;  // class index of samples[i].answer
  std::vector<std::size_t> cues;    // class the question features point at
  std::vector<std::string> class_names;

  std::size_t size() const { return samples.size(); }
  std::size_t num_classes() const { return class_names.size(); }
};

struct SyntheticData {
  SyntheticCorpus train;
  SyntheticCorpus test;
  std::vector<SplitAssignment> splits;  // one per test sample
};

inline constexpr GroupKey kSyntheticGroup{Task::AVQA, QuestionType::Temporal};

inline std::string class_name(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "answer_%03zu", c);
  return buf;
}

namespace detail {

struct SyntheticWorld {
  std::vector<Vec> proj_audio, proj_video;  // [class][dim]
  std::vector<Vec> cue_prototypes;          // [class][dim]
};

inline std::size_t decode_label(const SyntheticWorld& w, const Vec& a, const Vec& v) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < w.proj_audio.size(); ++c) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) s += w.proj_audio[c][d] * a[d] + w.proj_video[c][d] * v[d];
    if (s > best_score) {
      best_score = s;
      best = c;
    }
  }
  return best;
}

// Class of each sample: exact head/tail shares, classes filled round-robin, then shuffled.
inline std::vector<std::size_t> class_schedule(std::size_t n, const SyntheticConfig& cfg, Rng& rng) {
  const std::size_t heads = cfg.head_classes();
  const std::size_t tails = cfg.num_classes - heads;
  const auto n_tail = static_cast<std::size_t>(std::llround(cfg.tail_fraction * static_cast<double>(n)));
  std::vector<std::size_t> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n - n_tail; ++i) labels.push_back(i % heads);
  for (std::size_t i = 0; i < n_tail; ++i) labels.push_back(heads + i % tails);
  rng.shuffle(std::span<std::size_t>(labels));
  return labels;
}

inline SyntheticCorpus make_corpus(const SyntheticWorld& w, const SyntheticConfig& cfg, std::size_t n, bool is_test,
                                   Rng& rng, const std::string& id_prefix) {
  SyntheticCorpus corpus;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) corpus.class_names.push_back(class_name(c));
  const std::size_t heads = cfg.head_classes();
  const std::vector<std::size_t> schedule = class_schedule(n, cfg, rng);
  const std::size_t dim = cfg.feature_dim;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = schedule[i];
    Features f{Vec(dim), Vec(dim), Vec(dim)};
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt > 100000) throw std::runtime_error("synthetic generator: class region too small to sample");
      for (std::size_t d = 0; d < dim; ++d) f.audio[d] = rng.normal();
      for (std::size_t d = 0; d < dim; ++d) f.video[d] = rng.normal();
      if (decode_label(w, f.audio, f.video) == label) break;
    }

    std::size_t cue = label;
    if (is_test) {
      if (label >= heads) cue = static_cast<std::size_t>(rng.below(heads));
    } else if (!rng.bernoulli(cfg.bias_strength)) {
      cue = static_cast<std::size_t>(rng.below(cfg.num_classes));
    }
    for (std::size_t d = 0; d < dim; ++d) f.question[d] = w.cue_prototypes[cue][d] + cfg.cue_noise * rng.normal();

    char id[48];
    std::snprintf(id, sizeof id, "%s-%06zu", id_prefix.c_str(), i);
    QASample s;
    s.id = id;
    s.task = kSyntheticGroup.task;
    s.question_type = kSyntheticGroup.question_type;
    s.question = "Which answer matches the clip? (cue " + class_name(cue) + ")";
    s.answer = class_name(label);
    corpus.samples.push_back(std::move(s));
    corpus.features.push_back(std::move(f));
    corpus.labels.push_back(label);
    corpus.cues.push_back(cue);
  }
  return corpus;
}

}  // namespace detail

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  detail::SyntheticWorld w;
  const std::size_t c = cfg.num_classes, dim = cfg.feature_dim;
  auto gaussian_rows = [&](std::vector<Vec>& rows) {
    rows.assign(c, Vec(dim));
    for (auto& r : rows)
      for (double& x : r) x = rng.normal();
  };
  gaussian_rows(w.proj_audio);
  gaussian_rows(w.proj_video);
  gaussian_rows(w.cue_prototypes);
  for (auto& r : w.cue_prototypes) {
    double norm = 0.0;
    for (double x : r) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : r) x *= cfg.cue_scale / norm;
  }

  SyntheticData data;
  data.train = detail::make_corpus(w, cfg, cfg.train_n, false, rng, "train");
  data.test = detail::make_corpus(w, cfg, cfg.test_n, true, rng, "test");
  const std::size_t heads = cfg.head_classes();
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const bool tail = data.test.labels[i] >= heads;
    data.splits.push_back({data.test.samples[i].id, kSyntheticGroup, tail ? SplitLabel::Tail : SplitLabel::Head,
                           data.test.samples[i].answer,
                           c == 2 ? SplitRule::TwoAnswerLowFrequency : SplitRule::GeneralThreshold});
  }
  return data;
}

}  // namespace mccd
