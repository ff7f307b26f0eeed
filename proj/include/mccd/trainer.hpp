#pragma once

// Minibatch training of the toy model under the debiasing objective, and
// evaluation through the fused head only.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mccd/losses.hpp"
#include "mccd/parallel.hpp"
#include "mccd/random.hpp"
#include "mccd/robustness.hpp"
#include "mccd/synthetic.hpp"
#include "mccd/toy_model.hpp"

namespace mccd {

enum class Variant { Full, WithoutDq, WithoutDv, WithoutDa, WithoutMD, WithoutCG, BaselineCEOnly };

inline constexpr std::array<Variant, 7> kAllVariants = {Variant::Full,      Variant::WithoutDq, Variant::WithoutDv,
                                                        Variant::WithoutDa, Variant::WithoutMD, Variant::WithoutCG,
                                                        Variant::BaselineCEOnly};

inline constexpr std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::WithoutDq: return "without_dq";
    case Variant::WithoutDv: return "without_dv";
    case Variant::WithoutDa: return "without_da";
    case Variant::WithoutMD: return "without_md";
    case Variant::WithoutCG: return "without_cg";
    case Variant::BaselineCEOnly: return "baseline";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  for (Variant v : kAllVariants)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

// Objective settings for an ablation variant. Dropping one inverse-distance
// term renormalizes the remaining two by 1/2 (active_terms() == 2).
inline MccdConfig apply_variant(MccdConfig cfg, Variant v) {
  switch (v) {
    case Variant::Full: break;
    case Variant::WithoutDa: cfg.discrepancy_terms[0] = false; break;
    case Variant::WithoutDv: cfg.discrepancy_terms[1] = false; break;
    case Variant::WithoutDq: cfg.discrepancy_terms[2] = false; break;
    case Variant::WithoutMD: cfg.alpha = 0.0; break;
    case Variant::WithoutCG: cfg.beta = 0.0; break;
    case Variant::BaselineCEOnly:
      cfg.alpha = 0.0;
      cfg.beta = 0.0;
      break;
  }
  return cfg;
}

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t lr_decay_every = 20;  // epochs
  double lr_decay_factor = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  MccdConfig mccd;
  ModelShape shape;  // feature_dim and classes are overwritten from the corpus
  std::uint64_t seed = 42;
  unsigned threads = 1;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (lr_decay_every < 1) throw std::invalid_argument("lr_decay_every must be >= 1");
    mccd.validate();
  }

  double learning_rate_at(std::size_t epoch) const {
    return learning_rate * std::pow(lr_decay_factor, static_cast<double>(epoch / lr_decay_every));
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double answer = 0.0;       // sample-weighted mean of batch L_a
  double discrepancy = 0.0;  // ... of batch L_d
  double cycle = 0.0;        // ... of batch L_c
  double train_acc = 0.0;    // fused-head accuracy on the full training set after the epoch

  bool operator==(const EpochStats&) const = default;
};

struct TrainResult {
  ToyModel model;
  std::vector<EpochStats> history;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, double beta1, double beta2, double eps)
      : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

inline ModelShape shape_for(const SyntheticCorpus& corpus, ModelShape base) {
  if (corpus.size() == 0) throw std::invalid_argument("empty corpus");
  base.feature_dim = corpus.features.front().audio.size();
  base.classes = corpus.num_classes();
  return base;
}

template <typename Predictor>
double accuracy(const Predictor& predict, const SyntheticCorpus& corpus, unsigned threads = 1) {
  if (corpus.size() == 0) return 0.0;
  std::vector<unsigned char> hit(corpus.size());
  parallel_for(corpus.size(), threads,
               [&](std::size_t i) { hit[i] = predict(corpus.features[i]) == corpus.labels[i]; });
  const auto correct = std::accumulate(hit.begin(), hit.end(), std::size_t{0});
  return static_cast<double>(correct) / static_cast<double>(corpus.size());
}

// Samples per gradient accumulation chunk. Chunk boundaries are fixed, so the
// summation order (and the result) does not depend on the thread count.
inline constexpr std::size_t kGradChunk = 8;

inline TrainResult train(ToyModel model, const SyntheticCorpus& corpus, const TrainConfig& cfg, Variant variant) {
  cfg.validate();
  if (corpus.size() == 0) throw std::invalid_argument("train: empty corpus");
  if (model.shape().classes != corpus.num_classes())
    throw ShapeError("model class count does not match the corpus");
  for (std::size_t i = 0; i < corpus.size(); ++i)
    for (const Vec* v : {&corpus.features[i].audio, &corpus.features[i].video, &corpus.features[i].question})
      for (double x : *v)
        if (!std::isfinite(x)) throw std::invalid_argument("train: non-finite feature in sample " + corpus.samples[i].id);
  const MccdConfig objective = apply_variant(cfg.mccd, variant);
  const std::size_t n = corpus.size();
  const std::size_t np = model.parameter_count();

  AdamOptimizer adam(np, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  Rng shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{std::move(model), {}};
  ToyModel& m = result.model;
  std::vector<double> grad(np);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate_at(epoch);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    EpochStats st;
    st.epoch = epoch + 1;
    st.learning_rate = lr;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t k = std::min(cfg.batch_size, n - start);
      std::vector<ForwardCache> caches(k);
      parallel_for(k, cfg.threads,
                   [&](std::size_t i) { caches[i] = m.forward_cached(corpus.features[order[start + i]]); });
      std::vector<LogitBundle> logits(k);
      std::vector<std::size_t> labels(k);
      for (std::size_t i = 0; i < k; ++i) {
        logits[i] = caches[i].logits;
        labels[i] = corpus.labels[order[start + i]];
      }
      for (std::size_t i = 0; i < k; ++i)
        for (Head h : kAllHeads)
          for (double x : logits[i].head(h))
            if (!std::isfinite(x))
              throw TrainingDiverged("non-finite logits at epoch " + std::to_string(epoch + 1) + " for sample " +
                                     corpus.samples[order[start + i]].id);
      const JointLoss loss = joint_loss(logits, labels, objective);
      if (!std::isfinite(loss.total.value))
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                               std::to_string(start) + " (L_a=" + std::to_string(loss.answer) +
                               ", L_d=" + std::to_string(loss.discrepancy) + ", L_c=" + std::to_string(loss.cycle) +
                               ")");
      const double w = static_cast<double>(k);
      st.answer += loss.answer * w;
      st.discrepancy += loss.discrepancy * w;
      st.cycle += loss.cycle * w;

      const std::size_t chunks = (k + kGradChunk - 1) / kGradChunk;
      std::vector<std::vector<double>> partial(chunks, std::vector<double>(np, 0.0));
      parallel_for(chunks, cfg.threads, [&](std::size_t c) {
        const std::size_t end = std::min(k, (c + 1) * kGradChunk);
        for (std::size_t i = c * kGradChunk; i < end; ++i)
          m.backward(corpus.features[order[start + i]], caches[i], loss.total.grads[i], partial[c]);
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      for (const auto& p : partial)
        for (std::size_t j = 0; j < np; ++j) grad[j] += p[j];
      adam.step(m.params(), grad, lr);
    }
    st.answer /= static_cast<double>(n);
    st.discrepancy /= static_cast<double>(n);
    st.cycle /= static_cast<double>(n);
    st.train_acc = accuracy(FusedClassifier(m), corpus, cfg.threads);
    result.history.push_back(st);
  }
  return result;
}

inline TrainResult train(const SyntheticCorpus& corpus, const TrainConfig& cfg, Variant variant) {
  return train(ToyModel::initialized(shape_for(corpus, cfg.shape), cfg.seed), corpus, cfg, variant);
}

// Scores any predictor (Features -> class index) on a test corpus.
template <typename Predictor>
RobustnessReport evaluate(const Predictor& predict, const SyntheticCorpus& test, std::span<const SplitAssignment> splits,
                          unsigned threads = 1) {
  std::vector<Prediction> preds(test.size());
  parallel_for(test.size(), threads, [&](std::size_t i) {
    const std::size_t c = predict(test.features[i]);
    preds[i] = {test.samples[i].id, test.class_names.at(c)};
  });
  return score_predictions(test.samples, splits, preds);
}

// The bias learners are not consulted: predictions come from a FusedClassifier.
inline RobustnessReport evaluate(const ToyModel& model, const SyntheticCorpus& test,
                                 std::span<const SplitAssignment> splits, unsigned threads = 1) {
  return evaluate(FusedClassifier(model), test, splits, threads);
}

// Diagnostics on how the heads relate to each other.
struct HeadStatistics {
  double unimodal_pairwise_kl = 0.0;     // mean of the six directed KLs among softmaxed bias heads
  double unimodal_fused_distance = 0.0;  // mean Euclidean distance, probability space
};

inline HeadStatistics head_statistics(const ToyModel& model, const SyntheticCorpus& corpus, std::size_t limit = 0) {
  const std::size_t n = limit ? std::min(limit, corpus.size()) : corpus.size();
  if (n == 0) return {};
  Vec kl(n), dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LogitBundle b = model.forward(corpus.features[i]);
    std::array<Vec, 3> lp, p;
    for (std::size_t h = 0; h < 3; ++h) {
      lp[h] = log_softmax(b.head(kUnimodalHeads[h]));
      p[h] = softmax(b.head(kUnimodalHeads[h]));
    }
    const Vec pf = softmax(b.fused);
    for (std::size_t x = 0; x < 3; ++x) {
      for (std::size_t y = 0; y < 3; ++y) {
        if (x == y) continue;
        for (std::size_t c = 0; c < pf.size(); ++c) kl[i] += p[x][c] * (lp[x][c] - lp[y][c]);
      }
      double sq = 0.0;
      for (std::size_t c = 0; c < pf.size(); ++c) sq += (p[x][c] - pf[c]) * (p[x][c] - pf[c]);
      dist[i] += std::sqrt(sq);
    }
    kl[i] /= 6.0;
    dist[i] /= 3.0;
  }
  return {pairwise_sum(kl) / static_cast<double>(n), pairwise_sum(dist) / static_cast<double>(n)};
}

}  // namespace mccd
