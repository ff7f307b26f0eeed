#pragma once

// Small trainable multimodal classifier with three uni-modal bias learners.
//
//   h_m    = relu(E_m x_m + e_m)                 m in {audio, video, question}
//   fused  = F [h_audio; h_video; h_question] + f
//   bias_m = B2_m relu(B1_m h_m + b1_m) + b2_m   (training only)
//
// All parameters live in one flat vector so optimizers and serialization can
// treat the model as a single array.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mccd/losses.hpp"
#include "mccd/random.hpp"
#include "mccd/synthetic.hpp"

namespace mccd {

struct ModelShape {
  std::size_t feature_dim = 16;
  std::size_t hidden = 32;
  std::size_t bias_hidden = 32;
  std::size_t classes = 6;

  bool operator==(const ModelShape&) const = default;
};

// Row-major weight block [out x in] followed by a bias block [out].
struct DenseLayout {
  std::size_t in = 0, out = 0, offset = 0;
  std::size_t weights() const { return offset; }
  std::size_t bias() const { return offset + in * out; }
  std::size_t end() const { return offset + in * out + out; }
};

struct ModelLayout {
  std::array<DenseLayout, 3> encoder;  // audio, video, question
  DenseLayout fusion;
  std::array<DenseLayout, 3> bias_hidden;
  std::array<DenseLayout, 3> bias_out;
  std::size_t size = 0;

  explicit ModelLayout(const ModelShape& s) {
    std::size_t pos = 0;
    auto take = [&](std::size_t in, std::size_t out) {
      DenseLayout l{in, out, pos};
      pos = l.end();
      return l;
    };
    for (auto& e : encoder) e = take(s.feature_dim, s.hidden);
    fusion = take(3 * s.hidden, s.classes);
    for (std::size_t m = 0; m < 3; ++m) {
      bias_hidden[m] = take(s.hidden, s.bias_hidden);
      bias_out[m] = take(s.bias_hidden, s.classes);
    }
    size = pos;
  }

  // Parameters used by the inference path (encoders and fusion head) occupy
  // the prefix [0, fused_prefix()).
  std::size_t fused_prefix() const { return fusion.end(); }
};

namespace detail {

inline void dense_forward(std::span<const double> p, const DenseLayout& l, std::span<const double> x,
                          std::span<double> y) {
  const double* w = p.data() + l.weights();
  const double* b = p.data() + l.bias();
  for (std::size_t o = 0; o < l.out; ++o) {
    double s = b[o];
    const double* row = w + o * l.in;
    for (std::size_t i = 0; i < l.in; ++i) s += row[i] * x[i];
    y[o] = s;
  }
}

// Accumulates dW += dy x^T, db += dy, and (if dx nonempty) dx += W^T dy.
inline void dense_backward(std::span<const double> p, const DenseLayout& l, std::span<const double> x,
                           std::span<const double> dy, std::span<double> grad, std::span<double> dx) {
  const double* w = p.data() + l.weights();
  double* gw = grad.data() + l.weights();
  double* gb = grad.data() + l.bias();
  for (std::size_t o = 0; o < l.out; ++o) {
    const double g = dy[o];
    gb[o] += g;
    if (g == 0.0) continue;
    double* grow = gw + o * l.in;
    const double* row = w + o * l.in;
    for (std::size_t i = 0; i < l.in; ++i) grow[i] += g * x[i];
    if (!dx.empty())
      for (std::size_t i = 0; i < l.in; ++i) dx[i] += row[i] * g;
  }
}

inline void relu_inplace(std::span<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

inline const Vec& modality(const Features& f, std::size_t m) {
  return m == 0 ? f.audio : (m == 1 ? f.video : f.question);
}

}  // namespace detail

// Activations kept from a forward pass for the backward pass.
struct ForwardCache {
  std::array<Vec, 3> hidden;       // post-relu encoder outputs
  std::array<Vec, 3> bias_hidden;  // post-relu bias learner hidden layers
  LogitBundle logits;
};

class ToyModel {
 public:
  ToyModel() : ToyModel(ModelShape{}) {}
  explicit ToyModel(const ModelShape& shape) : shape_(shape), layout_(shape), params_(layout_.size, 0.0) {}

  // He-style initialization: weights ~ N(0, 2 / fan_in) for relu layers and
  // N(0, 1 / fan_in) for logit layers; biases start at zero.
  static ToyModel initialized(const ModelShape& shape, std::uint64_t seed) {
    ToyModel m(shape);
    Rng rng(seed);
    auto fill = [&](const DenseLayout& l, double gain) {
      const double sd = std::sqrt(gain / static_cast<double>(l.in));
      for (std::size_t i = l.weights(); i < l.bias(); ++i) m.params_[i] = sd * rng.normal();
    };
    for (const auto& l : m.layout_.encoder) fill(l, 2.0);
    fill(m.layout_.fusion, 1.0);
    for (std::size_t k = 0; k < 3; ++k) {
      fill(m.layout_.bias_hidden[k], 2.0);
      fill(m.layout_.bias_out[k], 1.0);
    }
    return m;
  }

  const ModelShape& shape() const { return shape_; }
  const ModelLayout& layout() const { return layout_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  void check_features(const Features& f) const {
    for (std::size_t m = 0; m < 3; ++m)
      if (detail::modality(f, m).size() != shape_.feature_dim)
        throw ShapeError("feature dimension " + std::to_string(detail::modality(f, m).size()) +
                         " does not match model input " + std::to_string(shape_.feature_dim));
  }

  ForwardCache forward_cached(const Features& f) const {
    check_features(f);
    ForwardCache c;
    c.logits = LogitBundle::zeros(shape_.classes);
    Vec concat(3 * shape_.hidden);
    for (std::size_t m = 0; m < 3; ++m) {
      c.hidden[m].assign(shape_.hidden, 0.0);
      detail::dense_forward(params_, layout_.encoder[m], detail::modality(f, m), c.hidden[m]);
      detail::relu_inplace(c.hidden[m]);
      std::copy(c.hidden[m].begin(), c.hidden[m].end(), concat.begin() + static_cast<std::ptrdiff_t>(m * shape_.hidden));
    }
    detail::dense_forward(params_, layout_.fusion, concat, c.logits.fused);
    for (std::size_t m = 0; m < 3; ++m) {
      c.bias_hidden[m].assign(shape_.bias_hidden, 0.0);
      detail::dense_forward(params_, layout_.bias_hidden[m], c.hidden[m], c.bias_hidden[m]);
      detail::relu_inplace(c.bias_hidden[m]);
      detail::dense_forward(params_, layout_.bias_out[m], c.bias_hidden[m], c.logits.head(kUnimodalHeads[m]));
    }
    return c;
  }

  LogitBundle forward(const Features& f) const { return forward_cached(f).logits; }

  std::vector<LogitBundle> forward(std::span<const Features> batch) const {
    std::vector<LogitBundle> out;
    out.reserve(batch.size());
    for (const auto& f : batch) out.push_back(forward(f));
    return out;
  }

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
  void backward(const Features& f, const ForwardCache& c, const LogitBundle& dlogits,
                std::span<double> grad) const {
    const std::size_t h = shape_.hidden;
    Vec concat(3 * h);
    for (std::size_t m = 0; m < 3; ++m)
      std::copy(c.hidden[m].begin(), c.hidden[m].end(), concat.begin() + static_cast<std::ptrdiff_t>(m * h));
    Vec dconcat(3 * h, 0.0);
    detail::dense_backward(params_, layout_.fusion, concat, dlogits.fused, grad, dconcat);

    for (std::size_t m = 0; m < 3; ++m) {
      std::span<double> dh(dconcat.data() + m * h, h);
      Vec dg(shape_.bias_hidden, 0.0);
      detail::dense_backward(params_, layout_.bias_out[m], c.bias_hidden[m], dlogits.head(kUnimodalHeads[m]), grad, dg);
      for (std::size_t j = 0; j < dg.size(); ++j)
        if (c.bias_hidden[m][j] <= 0.0) dg[j] = 0.0;
      detail::dense_backward(params_, layout_.bias_hidden[m], c.hidden[m], dg, grad, dh);
      for (std::size_t j = 0; j < h; ++j)
        if (c.hidden[m][j] <= 0.0) dh[j] = 0.0;
      detail::dense_backward(params_, layout_.encoder[m], detail::modality(f, m), dh, grad, {});
    }
  }

 private:
  ModelShape shape_;
  ModelLayout layout_;
  std::vector<double> params_;
};

// Inference-only network: the encoders and the fusion head, copied out of a
// ToyModel. Bias learner parameters are not part of it.
class FusedClassifier {
 public:
  explicit FusedClassifier(const ToyModel& m) : shape_(m.shape()), layout_(m.shape()) {
    const auto p = m.params();
    params_.assign(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(layout_.fused_prefix()));
  }

  Vec logits(const Features& f) const {
    Vec concat(3 * shape_.hidden);
    for (std::size_t m = 0; m < 3; ++m) {
      const Vec& x = detail::modality(f, m);
      if (x.size() != shape_.feature_dim) throw ShapeError("feature dimension does not match model input");
      std::span<double> h(concat.data() + m * shape_.hidden, shape_.hidden);
      detail::dense_forward(params_, layout_.encoder[m], x, h);
      detail::relu_inplace(h);
    }
    Vec y(shape_.classes);
    detail::dense_forward(params_, layout_.fusion, concat, y);
    return y;
  }

  std::size_t predict(const Features& f) const {
    const Vec y = logits(f);
    return static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  }

  std::size_t operator()(const Features& f) const { return predict(f); }

 private:
  ModelShape shape_;
  ModelLayout layout_;
  std::vector<double> params_;
};

}  // namespace mccd
