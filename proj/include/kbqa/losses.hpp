#pragma once

// Ranking objectives over candidate scores, with exact gradients w.r.t. the
// scores.
//
//   pointwise  s' = sigmoid(s);  L = -sum y log s' + (1-y) log(1-s')
//   pairwise   L = max(0, margin - sigmoid(s+) + sigmoid(s-))
//   listwise   s' = softmax(s);  L = -sum y log s' + (1-y) log(1-s')
//
// Every log is clamped below at log(1e-12); clamped terms have zero gradient.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbqa/text.hpp"

namespace kbqa {

enum class LossKind { Point, Pair, List };

inline std::string_view loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::Point: return "pointwise";
    case LossKind::Pair: return "pairwise";
    case LossKind::List: break;
  }
  return "listwise";
}

inline constexpr double kLogClamp = 1e-12;
inline constexpr double kDefaultMargin = 0.5;

struct LossGrad {
  double loss = 0.0;
  std::vector<double> dscores;
};

inline double sigmoid_norm(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

/// log(sigmoid(s)) without cancellation.
inline double log_sigmoid(double s) {
  return s >= 0.0 ? -std::log1p(std::exp(-s)) : s - std::log1p(std::exp(s));
}

namespace detail {

inline const double kLogFloor = std::log(kLogClamp);

inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + what);
}

inline double log_sum_exp(std::span<const double> xs, std::size_t skip = static_cast<std::size_t>(-1)) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i != skip) hi = std::max(hi, xs[i]);
  }
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i != skip) acc += std::exp(xs[i] - hi);
  }
  return hi + std::log(acc);
}

}  // namespace detail

inline LossGrad pointwise_loss_grad(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("pointwise_loss: scores/labels length mismatch");
  LossGrad out;
  out.dscores.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    detail::check_finite(s, "score");
    const double y = labels[i];
    const double p = sigmoid_norm(s);
    const double lp = log_sigmoid(s);    // log s'
    const double lq = log_sigmoid(-s);   // log (1 - s')
    const bool clamp_p = lp < detail::kLogFloor;
    const bool clamp_q = lq < detail::kLogFloor;
    out.loss -= y * (clamp_p ? detail::kLogFloor : lp) + (1.0 - y) * (clamp_q ? detail::kLogFloor : lq);
    out.dscores[i] = -(y * (clamp_p ? 0.0 : 1.0 - p)) + (1.0 - y) * (clamp_q ? 0.0 : p);
  }
  detail::check_finite(out.loss, "pointwise loss");
  return out;
}

inline double pointwise_loss(std::span<const double> scores, std::span<const int> labels) {
  return pointwise_loss_grad(scores, labels).loss;
}

/// dscores = {d/ds_pos, d/ds_neg}. At the hinge the subgradient 0 is used.
inline LossGrad pairwise_loss_grad(double s_pos, double s_neg, double margin = kDefaultMargin) {
  detail::check_finite(s_pos, "score");
  detail::check_finite(s_neg, "score");
  const double p = sigmoid_norm(s_pos);
  const double n = sigmoid_norm(s_neg);
  const double m = margin - p + n;
  LossGrad out;
  out.dscores = {0.0, 0.0};
  if (m > 0.0) {
    out.loss = m;
    out.dscores[0] = -p * (1.0 - p);
    out.dscores[1] = n * (1.0 - n);
  }
  return out;
}

inline double pairwise_loss(double s_pos, double s_neg, double margin = kDefaultMargin) {
  return pairwise_loss_grad(s_pos, s_neg, margin).loss;
}

/// Softmax over the list, then the binary cross-entropy sum taken literally
/// over the softmax probabilities.
inline LossGrad listwise_loss_grad(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("listwise_loss: scores/labels length mismatch");
  if (scores.size() < 2) throw std::invalid_argument("listwise_loss: need at least two candidates");
  if (std::none_of(labels.begin(), labels.end(), [](int y) { return y == 1; })) {
    throw std::invalid_argument("listwise_loss: list has no positive");
  }
  for (double s : scores) detail::check_finite(s, "score");
  const std::size_t n = scores.size();
  const double lse = detail::log_sum_exp(scores);
  std::vector<double> p(n), lse_others(n);
  LossGrad out;
  out.dscores.assign(n, 0.0);
  std::vector<double> a(n), b(n);  // dL/dlog p_i, dL/dlog(1-p_i)
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::exp(scores[i] - lse);
    lse_others[i] = detail::log_sum_exp(scores, i);
    const double lp = scores[i] - lse;
    const double lq = lse_others[i] - lse;
    const double y = labels[i];
    const bool clamp_p = lp < detail::kLogFloor;
    const bool clamp_q = lq < detail::kLogFloor;
    out.loss -= y * (clamp_p ? detail::kLogFloor : lp) + (1.0 - y) * (clamp_q ? detail::kLogFloor : lq);
    a[i] = clamp_p ? 0.0 : -y;
    b[i] = clamp_q ? 0.0 : -(1.0 - y);
  }
  double sum_a = 0.0, sum_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum_a += a[i], sum_b += b[i];
  for (std::size_t j = 0; j < n; ++j) {
    double g = a[j] - sum_a * p[j] - sum_b * p[j];
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j || b[i] == 0.0) continue;
      g += b[i] * std::exp(scores[j] - lse_others[i]);
    }
    out.dscores[j] = g;
  }
  detail::check_finite(out.loss, "listwise loss");
  return out;
}

inline double listwise_loss(std::span<const double> scores, std::span<const int> labels) {
  return listwise_loss_grad(scores, labels).loss;
}

inline std::vector<double> softmax(std::span<const double> scores) {
  const double lse = detail::log_sum_exp(scores);
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = std::exp(scores[i] - lse);
  return out;
}

/// Loss of one training group: Point groups hold any number of labelled
/// scores, Pair groups {positive, negative}, List groups one positive plus
/// negatives.
inline LossGrad group_loss_grad(LossKind kind, std::span<const double> scores, std::span<const int> labels,
                                double margin = kDefaultMargin) {
  switch (kind) {
    case LossKind::Point: return pointwise_loss_grad(scores, labels);
    case LossKind::Pair: {
      if (scores.size() != 2 || labels.size() != 2 || labels[0] != 1 || labels[1] != 0) {
        throw std::invalid_argument("pairwise group must be (positive, negative)");
      }
      return pairwise_loss_grad(scores[0], scores[1], margin);
    }
    case LossKind::List: break;
  }
  return listwise_loss_grad(scores, labels);
}

}  // namespace kbqa
