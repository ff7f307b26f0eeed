#pragma once

// Central finite-difference check of analytic gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mccd/losses.hpp"

namespace mccd {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;  // flat coordinate with the largest error
  double value = 0.0;           // loss at the unperturbed point
};

// |a - b| / max(1, |a|, |b|)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// `value` evaluates the function, `analytic` is its gradient at `x`.
inline GradCheckResult check_gradient(const std::function<double(std::span<const double>)>& value,
                                      std::span<const double> analytic, std::vector<double> x, double h = 1e-5) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  if (analytic.size() != x.size()) throw std::invalid_argument("gradient size does not match the point");
  GradCheckResult r;
  r.value = value(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = value(x);
    x[i] = orig - h;
    const double fm = value(x);
    x[i] = orig;
    const double err = relative_error(analytic[i], (fp - fm) / (2.0 * h));
    if (err > r.max_rel_err) {
      r.max_rel_err = err;
      r.worst_index = i;
    }
  }
  return r;
}

// Layout used to flatten a batch: item-major, then audio, video, question, fused.
inline std::vector<double> flatten(std::span<const LogitBundle> batch) {
  std::vector<double> flat;
  for (const auto& b : batch)
    for (Head h : kAllHeads) flat.insert(flat.end(), b.head(h).begin(), b.head(h).end());
  return flat;
}

inline std::vector<LogitBundle> unflatten(std::span<const double> flat, std::size_t items, std::size_t classes) {
  if (flat.size() != items * 4 * classes) throw std::invalid_argument("unflatten: size mismatch");
  std::vector<LogitBundle> batch(items, LogitBundle::zeros(classes));
  std::size_t pos = 0;
  for (auto& b : batch)
    for (Head h : kAllHeads)
      for (double& x : b.head(h)) x = flat[pos++];
  return batch;
}

using BatchLoss = std::function<LossValue(std::span<const LogitBundle>)>;

// Max relative error of loss(batch).grads against central differences over
// every logit coordinate of every head.
inline GradCheckResult finite_difference_check(const BatchLoss& loss, std::span<const LogitBundle> batch,
                                               double h = 1e-5) {
  const std::size_t classes = check_batch(batch);
  const std::size_t items = batch.size();
  const LossValue at = loss(batch);
  const std::vector<double> analytic = flatten(at.grads);
  auto value = [&](std::span<const double> flat) { return loss(unflatten(flat, items, classes)).value; };
  return check_gradient(value, analytic, flatten(batch), h);
}

}  // namespace mccd
