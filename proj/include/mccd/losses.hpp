#pragma once

// Multifaceted cycle collaborative debiasing objective.
//
// A LogitBundle holds four score vectors over the answer space: three
// uni-modal bias heads (audio, video, question) and the fused multimodal head.
// The objective is
//
//   L = L_a + L_d + L_c
//
//   L_a  cross-entropy of softmax(fused) against the answer label
//   L_d  alpha / (T K) * sum_i sum_{h in heads} 1 / (d_i^h + eps)
//        d_i^h = || map(y_h) - map(y_fused) ||_2, map = softmax or identity,
//        T = number of enabled heads (3 unless ablated)
//   L_c  beta / (3 K) * sum_i [ KL(q || a) + KL(a || v) + KL(v || q) ]
//        with every head passed through softmax first
//
// All gradients are hand-derived and returned with respect to the raw logits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mccd/parallel.hpp"

namespace mccd {

using Vec = std::vector<double>;

enum class Head { Audio = 0, Video = 1, Question = 2, Fused = 3 };

struct LogitBundle {
  Vec audio, video, question, fused;

  static LogitBundle zeros(std::size_t classes) {
    return {Vec(classes, 0.0), Vec(classes, 0.0), Vec(classes, 0.0), Vec(classes, 0.0)};
  }

  Vec& head(Head h) {
    switch (h) {
      case Head::Audio: return audio;
      case Head::Video: return video;
      case Head::Question: return question;
      case Head::Fused: return fused;
    }
    return fused;
  }
  const Vec& head(Head h) const { return const_cast<LogitBundle*>(this)->head(h); }

  std::size_t classes() const { return fused.size(); }

  LogitBundle& operator+=(const LogitBundle& o) {
    for (Head h : {Head::Audio, Head::Video, Head::Question, Head::Fused}) {
      Vec& dst = head(h);
      const Vec& src = o.head(h);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
    return *this;
  }
  bool operator==(const LogitBundle&) const = default;
};

inline constexpr std::array<Head, 3> kUnimodalHeads = {Head::Audio, Head::Video, Head::Question};
inline constexpr std::array<Head, 4> kAllHeads = {Head::Audio, Head::Video, Head::Question, Head::Fused};

enum class DistanceSpace { Probability, RawLogit };

inline constexpr std::string_view to_string(DistanceSpace d) {
  return d == DistanceSpace::Probability ? "probability" : "raw_logit";
}

struct MccdConfig {
  double alpha = 1e-2;
  double beta = 3e-1;
  double epsilon = 1e-5;
  DistanceSpace distance_space = DistanceSpace::Probability;
  // Which of the audio / video / question inverse-distance terms are active.
  std::array<bool, 3> discrepancy_terms{true, true, true};

  std::size_t active_terms() const {
    return static_cast<std::size_t>(std::count(discrepancy_terms.begin(), discrepancy_terms.end(), true));
  }

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite and >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and >= 0");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be finite and > 0");
  }
};

struct LossValue {
  double value = 0.0;
  std::vector<LogitBundle> grads;  // one bundle per batch item, same shape as the input
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Vec softmax(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("softmax of an empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  Vec out(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

inline Vec log_softmax(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("log_softmax of an empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  const double lse = m + std::log(s);
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

// Vector-Jacobian product of softmax: given p = softmax(x) and g = dL/dp,
// returns dL/dx = p * (g - <p, g>).
inline Vec softmax_vjp(std::span<const double> p, std::span<const double> g) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * g[i];
  Vec out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (g[i] - dot);
  return out;
}

// Checks a batch for a common, nonzero class count and finite entries.
// Returns the class count.
inline std::size_t check_batch(std::span<const LogitBundle> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::size_t c = batch.front().fused.size();
  if (c == 0) throw ShapeError("logit vectors must be nonempty");
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (Head h : kAllHeads) {
      const Vec& v = batch[i].head(h);
      if (v.size() != c)
        throw ShapeError("batch item " + std::to_string(i) + ": head sizes differ (" + std::to_string(v.size()) +
                         " vs " + std::to_string(c) + ")");
      for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument("batch item " + std::to_string(i) + ": non-finite logit");
    }
  return c;
}

namespace detail {

inline std::vector<LogitBundle> zero_grads(std::size_t k, std::size_t c) {
  return std::vector<LogitBundle>(k, LogitBundle::zeros(c));
}

inline Vec map_to_space(const Vec& y, DistanceSpace space) {
  return space == DistanceSpace::Probability ? softmax(y) : y;
}

// KL(softmax(x) || softmax(y)) from log-probabilities, clamped at zero against
// rounding, plus gradients with respect to both logit vectors.
inline double kl_with_grads(const Vec& log_p, const Vec& log_q, double scale, Vec& grad_x, Vec& grad_y) {
  const std::size_t c = log_p.size();
  double kl = 0.0;
  Vec p(c), q(c);
  for (std::size_t j = 0; j < c; ++j) {
    p[j] = std::exp(log_p[j]);
    q[j] = std::exp(log_q[j]);
    kl += p[j] * (log_p[j] - log_q[j]);
  }
  for (std::size_t j = 0; j < c; ++j) {
    grad_x[j] += scale * p[j] * (log_p[j] - log_q[j] - kl);
    grad_y[j] += scale * (q[j] - p[j]);
  }
  return std::max(0.0, kl);
}

}  // namespace detail

inline LossValue discrepancy_loss(std::span<const LogitBundle> batch, const MccdConfig& cfg) {
  cfg.validate();
  const std::size_t c = check_batch(batch);
  const std::size_t k = batch.size();
  LossValue out;
  out.grads = detail::zero_grads(k, c);
  const std::size_t terms = cfg.active_terms();
  if (terms == 0 || cfg.alpha == 0.0) return out;

  const double scale = cfg.alpha / (static_cast<double>(terms) * static_cast<double>(k));
  const bool prob = cfg.distance_space == DistanceSpace::Probability;
  Vec per_sample(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const Vec w = detail::map_to_space(batch[i].fused, cfg.distance_space);
    Vec g_w(c, 0.0);
    for (std::size_t t = 0; t < 3; ++t) {
      if (!cfg.discrepancy_terms[t]) continue;
      const Head h = kUnimodalHeads[t];
      const Vec u = detail::map_to_space(batch[i].head(h), cfg.distance_space);
      Vec diff(c);
      double sq = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        diff[j] = u[j] - w[j];
        sq += diff[j] * diff[j];
      }
      const double d = std::sqrt(sq);
      const double denom = d + cfg.epsilon;
      per_sample[i] += 1.0 / denom;
      if (d == 0.0) continue;  // the distance has no gradient at coincidence; use 0
      const double coeff = -scale / (denom * denom * d);
      Vec g_u(c);
      for (std::size_t j = 0; j < c; ++j) {
        g_u[j] = coeff * diff[j];
        g_w[j] -= g_u[j];
      }
      Vec& gy = out.grads[i].head(h);
      if (prob) gy = softmax_vjp(u, g_u);
      else gy = std::move(g_u);
    }
    out.grads[i].fused = prob ? softmax_vjp(w, g_w) : std::move(g_w);
  }
  out.value = scale * pairwise_sum(per_sample);
  return out;
}

inline LossValue cycle_loss(std::span<const LogitBundle> batch, const MccdConfig& cfg) {
  cfg.validate();
  const std::size_t c = check_batch(batch);
  const std::size_t k = batch.size();
  LossValue out;
  out.grads = detail::zero_grads(k, c);
  if (cfg.beta == 0.0) return out;

  const double scale = cfg.beta / (3.0 * static_cast<double>(k));
  Vec per_sample(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const Vec la = log_softmax(batch[i].audio);
    const Vec lv = log_softmax(batch[i].video);
    const Vec lq = log_softmax(batch[i].question);
    LogitBundle& g = out.grads[i];
    // question -> audio -> video -> question
    per_sample[i] += detail::kl_with_grads(lq, la, scale, g.question, g.audio);
    per_sample[i] += detail::kl_with_grads(la, lv, scale, g.audio, g.video);
    per_sample[i] += detail::kl_with_grads(lv, lq, scale, g.video, g.question);
  }
  out.value = scale * pairwise_sum(per_sample);
  return out;
}

// Per-sample cross-entropy -log softmax(y)[label]. When the label holds the
// largest score the log1p form keeps tiny losses from rounding to zero early.
inline double cross_entropy(std::span<const double> y, std::size_t label) {
  const double yl = y[label];
  const double m = *std::max_element(y.begin(), y.end());
  if (yl >= m) {
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j)
      if (j != label) s += std::exp(y[j] - yl);
    return std::log1p(s);
  }
  double s = 0.0;
  for (double x : y) s += std::exp(x - m);
  return m - yl + std::log(s);
}

inline LossValue answer_loss(std::span<const LogitBundle> batch, std::span<const std::size_t> labels) {
  const std::size_t c = check_batch(batch);
  const std::size_t k = batch.size();
  if (labels.size() != k) throw ShapeError("answer_loss: label count does not match batch size");
  LossValue out;
  out.grads = detail::zero_grads(k, c);
  const double inv_k = 1.0 / static_cast<double>(k);
  Vec per_sample(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (labels[i] >= c)
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(c) + ")");
    per_sample[i] = cross_entropy(batch[i].fused, labels[i]);
    Vec p = softmax(batch[i].fused);
    p[labels[i]] -= 1.0;
    for (double& x : p) x *= inv_k;
    out.grads[i].fused = std::move(p);
  }
  out.value = pairwise_sum(per_sample) * inv_k;
  return out;
}

// Convenience overload over fused logits only.
inline LossValue answer_loss(std::span<const Vec> fused, std::span<const std::size_t> labels) {
  std::vector<LogitBundle> batch;
  batch.reserve(fused.size());
  for (const auto& y : fused) {
    LogitBundle b = LogitBundle::zeros(y.size());
    b.fused = y;
    batch.push_back(std::move(b));
  }
  return answer_loss(batch, labels);
}

struct JointLoss {
  LossValue total;
  double answer = 0.0;
  double discrepancy = 0.0;
  double cycle = 0.0;
};

inline JointLoss joint_loss(std::span<const LogitBundle> batch, std::span<const std::size_t> labels,
                            const MccdConfig& cfg) {
  LossValue la = answer_loss(batch, labels);
  const LossValue ld = discrepancy_loss(batch, cfg);
  const LossValue lc = cycle_loss(batch, cfg);
  JointLoss out;
  out.answer = la.value;
  out.discrepancy = ld.value;
  out.cycle = lc.value;
  out.total.value = la.value + ld.value + lc.value;
  out.total.grads = std::move(la.grads);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.total.grads[i] += ld.grads[i];
    out.total.grads[i] += lc.grads[i];
  }
  return out;
}

}  // namespace mccd
