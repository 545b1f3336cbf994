#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "grt/tape.hpp"

namespace grt {

struct LossConfig {
  std::vector<double> class_weights;  // length C; > 0
  bool lovasz_enabled = true;

  // static background 0.5, every moving class 8.0
  static LossConfig radar_default(std::size_t num_classes) {
    LossConfig cfg;
    cfg.class_weights.assign(num_classes, 8.0);
    cfg.class_weights[0] = 0.5;
    return cfg;
  }
};

// Weighted cross entropy over logits [N,C]; per-point weight w_{label},
// normalized by the sum of applied weights so the scale is comparable across
// class mixes.
template <typename T>
typename Tape<T>::Ref weighted_cross_entropy(Tape<T>& tape,
                                             typename Tape<T>::Ref logits,
                                             const std::vector<int>& labels,
                                             const std::vector<T>& class_weights) {
  const auto& lv = tape.value(logits);
  if (lv.rank() != 2) {
    throw std::invalid_argument("cross_entropy: logits must be [N,C]");
  }
  const std::size_t n = lv.shape[0], c = lv.shape[1];
  if (labels.size() != n) {
    throw std::invalid_argument("cross_entropy: label count mismatch");
  }
  if (class_weights.size() != c) {
    throw std::invalid_argument("cross_entropy: weight count mismatch");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw std::invalid_argument("cross_entropy: label out of range");
    }
  }

  auto probs = std::make_shared<std::vector<T>>(n * c);
  T weight_sum = T(0);
  T loss = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = lv.data.data() + i * c;
    T mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    T denom = T(0);
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    const T log_denom = std::log(denom);
    for (std::size_t j = 0; j < c; ++j) {
      (*probs)[i * c + j] = std::exp(row[j] - mx) / denom;
    }
    const auto y = static_cast<std::size_t>(labels[i]);
    const T w = class_weights[y];
    weight_sum += w;
    loss += w * (-(row[y] - mx - log_denom));
  }
  loss /= weight_sum;

  auto lab = std::make_shared<std::vector<int>>(labels);
  auto wts = std::make_shared<std::vector<T>>(class_weights);
  return tape.custom(
      ValueGrid<T>::scalar(loss), {logits},
      [logits, n, c, probs, lab, wts, weight_sum](Tape<T>& t,
                                                  typename Tape<T>::Ref self) {
        if (!t.wants_grad(logits)) return;
        const T g = t.grad_buf(self).data[0];
        T* dL = t.grad_buf(logits).data.data();
        for (std::size_t i = 0; i < n; ++i) {
          const auto y = static_cast<std::size_t>((*lab)[i]);
          const T w = (*wts)[y];
          for (std::size_t j = 0; j < c; ++j) {
            const T delta = (j == y) ? T(1) : T(0);
            dL[i * c + j] += g * w * ((*probs)[i * c + j] - delta) / weight_sum;
          }
        }
      });
}

// Multiclass Lovasz-Softmax over probabilities [N,C] with present-classes
// averaging: per class with ground-truth support, sort the error vector
// descending and take the inner product with the Jaccard-extension gradient.
template <typename T>
typename Tape<T>::Ref lovasz_softmax(Tape<T>& tape,
                                     typename Tape<T>::Ref probs_ref,
                                     const std::vector<int>& labels) {
  const auto& pv = tape.value(probs_ref);
  if (pv.rank() != 2) {
    throw std::invalid_argument("lovasz_softmax: probs must be [N,C]");
  }
  const std::size_t n = pv.shape[0], c = pv.shape[1];
  if (labels.size() != n) {
    throw std::invalid_argument("lovasz_softmax: label count mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    T s = T(0);
    for (std::size_t j = 0; j < c; ++j) s += pv.data[i * c + j];
    if (std::abs(static_cast<double>(s) - 1.0) > 1e-4) {
      throw std::invalid_argument(
          "lovasz_softmax: probability row does not sum to 1");
    }
  }

  std::vector<char> present(c, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw std::invalid_argument("lovasz_softmax: label out of range");
    }
    present[static_cast<std::size_t>(y)] = 1;
  }
  const std::size_t n_present =
      static_cast<std::size_t>(std::count(present.begin(), present.end(), 1));

  // dloss/dp[i*c+j], built during the forward sweep; the loss is piecewise
  // linear in the errors so the sorted-gradient coefficients are the adjoint.
  auto dP = std::make_shared<std::vector<T>>(n * c, T(0));
  T loss = T(0);
  std::vector<T> errors(n);
  std::vector<std::size_t> order(n);
  for (std::size_t cls = 0; cls < c; ++cls) {
    if (!present[cls]) continue;
    std::size_t gts = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool is_gt = static_cast<std::size_t>(labels[i]) == cls;
      errors[i] = is_gt ? T(1) - pv.data[i * c + cls] : pv.data[i * c + cls];
      gts += is_gt ? 1 : 0;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (errors[a] != errors[b]) return errors[a] > errors[b];
      return a < b;
    });
    std::size_t cum_gt = 0, cum_fp = 0;
    T prev_jac = T(0);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t i = order[t];
      const bool is_gt = static_cast<std::size_t>(labels[i]) == cls;
      cum_gt += is_gt ? 1 : 0;
      cum_fp += is_gt ? 0 : 1;
      const T inter = static_cast<T>(gts - cum_gt);
      const T uni = static_cast<T>(gts + cum_fp);
      const T jac = T(1) - inter / uni;
      const T g = jac - prev_jac;
      prev_jac = jac;
      loss += errors[i] * g / static_cast<T>(n_present);
      (*dP)[i * c + cls] +=
          (is_gt ? T(-1) : T(1)) * g / static_cast<T>(n_present);
    }
  }

  return tape.custom(ValueGrid<T>::scalar(loss), {probs_ref},
                     [probs_ref, dP](Tape<T>& t, typename Tape<T>::Ref self) {
                       if (!t.wants_grad(probs_ref)) return;
                       const T g = t.grad_buf(self).data[0];
                       T* d = t.grad_buf(probs_ref).data.data();
                       for (std::size_t i = 0; i < dP->size(); ++i) {
                         d[i] += g * (*dP)[i];
                       }
                     });
}

// Combined training loss: weighted cross entropy plus (optionally) the
// Lovasz term, unit-weight sum.
template <typename T>
typename Tape<T>::Ref total_loss(Tape<T>& tape, typename Tape<T>::Ref logits,
                                 const std::vector<int>& labels,
                                 const LossConfig& cfg) {
  std::vector<T> weights(cfg.class_weights.begin(), cfg.class_weights.end());
  auto ce = weighted_cross_entropy(tape, logits, labels, weights);
  if (!cfg.lovasz_enabled) return ce;
  auto probs = tape.softmax_last(logits);
  auto lov = lovasz_softmax(tape, probs, labels);
  return tape.add(ce, lov);
}

}  // namespace grt
