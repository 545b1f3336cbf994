#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "grt/errors.hpp"
#include "grt/geometry.hpp"
#include "grt/param_store.hpp"
#include "grt/value_grid.hpp"

namespace grt {

// Dynamic computation graph, rebuilt per forward pass. Ops execute eagerly;
// backward() runs one reverse sweep over the creation order and accumulates
// parameter gradients into their ParamStore slots.
template <typename T>
class Tape {
 public:
  using Ref = std::int32_t;
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapMat = Eigen::Map<Mat>;
  using CMapMat = Eigen::Map<const Mat>;

  // Non-finite outputs raise NumericsError instead of propagating silently.
  bool check_finite = true;
  // When false (inference), leaves are non-differentiable and no backward
  // closures are recorded.
  bool record = true;
  // When set, parameter gradients accumulate into this buffer keyed by name
  // instead of the store's own slots (per-task buffers let batch shards run
  // in parallel and reduce in a fixed order afterwards).
  std::map<std::string, ValueGrid<T>>* grad_sink_override = nullptr;

  Ref constant(ValueGrid<T> v) { return push(std::move(v), false, nullptr); }

  // Differentiable leaf; if sink is given, backward() adds the leaf gradient
  // into it.
  Ref input(ValueGrid<T> v, ValueGrid<T>* sink = nullptr) {
    return push(std::move(v), record, sink);
  }

  Ref param(ParamStore<T>& store, const std::string& name) {
    auto& p = store.at(name);
    ValueGrid<T>* sink = nullptr;
    if (record) {
      if (grad_sink_override) {
        auto [it, inserted] = grad_sink_override->try_emplace(
            name, ValueGrid<T>::zeros(p.value.shape));
        sink = &it->second;
      } else {
        sink = &p.grad;
      }
    }
    return push(p.value, record, sink);
  }

  const ValueGrid<T>& value(Ref r) const { return nodes_[idx(r)].value; }
  const ValueGrid<T>& grad(Ref r) const { return nodes_[idx(r)].grad; }
  std::size_t num_nodes() const { return nodes_.size(); }

  // ---------------------------------------------------------------- affine

  // y = x W (+ b) over the trailing axis; x: [...,Din], W: [Din,Dout].
  Ref fully_connected(Ref x, Ref w, Ref b = -1) {
    const auto& xv = value(x);
    const auto& wv = value(w);
    if (wv.rank() != 2 || xv.trailing() != wv.shape[0]) {
      throw std::invalid_argument("fully_connected: got input " +
                                  shape_str(xv.shape) + " and weight " +
                                  shape_str(wv.shape));
    }
    const std::size_t din = wv.shape[0], dout = wv.shape[1], rows = xv.rows();
    if (b >= 0) {
      const auto& bv = value(b);
      if (bv.numel() != dout) {
        throw std::invalid_argument("fully_connected: bias shape mismatch");
      }
    }
    auto out_shape = xv.shape;
    out_shape.back() = dout;
    ValueGrid<T> out = ValueGrid<T>::zeros(out_shape);
    {
      CMapMat X(xv.data.data(), rows, din);
      CMapMat W(wv.data.data(), din, dout);
      MapMat Y(out.data.data(), rows, dout);
      Y.noalias() = X * W;
      if (b >= 0) {
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> B(
            value(b).data.data(), dout);
        Y.rowwise() += B;
      }
    }
    Ref r = push(std::move(out), any_grad({x, w, b}), nullptr);
    set_backward(r, {x, w, b}, [x, w, b, rows, din, dout](Tape& t, Ref self) {
      CMapMat dY(t.nodes_[idx(self)].grad.data.data(), rows, dout);
      if (t.wants_grad(x)) {
        CMapMat W(t.value(w).data.data(), din, dout);
        MapMat dX(t.grad_buf(x).data.data(), rows, din);
        dX.noalias() += dY * W.transpose();
      }
      if (t.wants_grad(w)) {
        CMapMat X(t.value(x).data.data(), rows, din);
        MapMat dW(t.grad_buf(w).data.data(), din, dout);
        dW.noalias() += X.transpose() * dY;
      }
      if (b >= 0 && t.wants_grad(b)) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dB(
            t.grad_buf(b).data.data(), dout);
        dB += dY.colwise().sum();
      }
    });
    return r;
  }

  // Per-row standardization over the trailing axis, then elementwise affine.
  Ref layer_norm(Ref x, Ref scale, Ref shift, T eps) {
    const auto& xv = value(x);
    const std::size_t d = xv.trailing(), rows = xv.rows();
    if (value(scale).numel() != d || value(shift).numel() != d) {
      throw std::invalid_argument("layer_norm: scale/shift shape mismatch");
    }
    ValueGrid<T> out = ValueGrid<T>::zeros(xv.shape);
    auto xhat = std::make_shared<std::vector<T>>(xv.numel());
    auto inv_std = std::make_shared<std::vector<T>>(rows);
    const T* sc = value(scale).data.data();
    const T* sh = value(shift).data.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* row = xv.data.data() + r * d;
      T mean = T(0);
      for (std::size_t j = 0; j < d; ++j) mean += row[j];
      mean /= static_cast<T>(d);
      T var = T(0);
      for (std::size_t j = 0; j < d; ++j) {
        const T c = row[j] - mean;
        var += c * c;
      }
      var /= static_cast<T>(d);
      const T is = T(1) / std::sqrt(var + eps);
      (*inv_std)[r] = is;
      for (std::size_t j = 0; j < d; ++j) {
        const T xh = (row[j] - mean) * is;
        (*xhat)[r * d + j] = xh;
        out.data[r * d + j] = sc[j] * xh + sh[j];
      }
    }
    Ref r = push(std::move(out), any_grad({x, scale, shift}), nullptr);
    set_backward(r, {x, scale, shift},
                 [x, scale, shift, d, rows, xhat, inv_std](Tape& t, Ref self) {
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      const T* sc = t.value(scale).data.data();
      T* dsc = t.wants_grad(scale) ? t.grad_buf(scale).data.data() : nullptr;
      T* dsh = t.wants_grad(shift) ? t.grad_buf(shift).data.data() : nullptr;
      T* dX = t.wants_grad(x) ? t.grad_buf(x).data.data() : nullptr;
      for (std::size_t r2 = 0; r2 < rows; ++r2) {
        const T* gy = dY + r2 * d;
        const T* xh = xhat->data() + r2 * d;
        if (dsc || dsh) {
          for (std::size_t j = 0; j < d; ++j) {
            if (dsc) dsc[j] += gy[j] * xh[j];
            if (dsh) dsh[j] += gy[j];
          }
        }
        if (dX) {
          T mean_g = T(0), mean_gx = T(0);
          for (std::size_t j = 0; j < d; ++j) {
            const T g = gy[j] * sc[j];
            mean_g += g;
            mean_gx += g * xh[j];
          }
          mean_g /= static_cast<T>(d);
          mean_gx /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j) {
            const T g = gy[j] * sc[j];
            dX[r2 * d + j] += (g - mean_g - xh[j] * mean_gx) * (*inv_std)[r2];
          }
        }
      }
    });
    return r;
  }

  // ----------------------------------------------------------- elementwise

  // Exact erf-based GELU, x * Phi(x).
  Ref gelu(Ref x) {
    const auto& xv = value(x);
    ValueGrid<T> out = xv;
    for (std::size_t i = 0; i < out.numel(); ++i) {
      const double v = static_cast<double>(xv.data[i]);
      out.data[i] = static_cast<T>(v * normal_cdf(v));
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    set_backward(r, {x}, [x](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const auto& xv2 = t.value(x);
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < xv2.numel(); ++i) {
        const double v = static_cast<double>(xv2.data[i]);
        const double pdf =
            std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        dX[i] += dY[i] * static_cast<T>(normal_cdf(v) + v * pdf);
      }
    });
    return r;
  }

  // exp(-x^2/2); the score-to-weight normalization that treats every entry
  // independently.
  Ref gaussian(Ref x) {
    const auto& xv = value(x);
    ValueGrid<T> out = xv;
    for (std::size_t i = 0; i < out.numel(); ++i) {
      const T v = xv.data[i];
      out.data[i] = std::exp(-v * v / T(2));
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    set_backward(r, {x}, [x](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const auto& xv2 = t.value(x);
      const auto& yv = t.value(self);
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < xv2.numel(); ++i) {
        dX[i] += dY[i] * (-xv2.data[i] * yv.data[i]);
      }
    });
    return r;
  }

  Ref add(Ref a, Ref b) { return binary(a, b, Bin::Add); }
  Ref sub(Ref a, Ref b) { return binary(a, b, Bin::Sub); }
  Ref mul(Ref a, Ref b) { return binary(a, b, Bin::Mul); }

  Ref scale(Ref x, T c) {
    const auto& xv = value(x);
    ValueGrid<T> out = xv;
    for (T& v : out.data) v *= c;
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    set_backward(r, {x}, [x, c](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < t.value(x).numel(); ++i) dX[i] += c * dY[i];
    });
    return r;
  }

  // ------------------------------------------------------------- softmaxes

  // Softmax over the trailing axis; max-subtracted for stability.
  Ref softmax_last(Ref x) {
    const auto& xv = value(x);
    return softmax_strided(x, xv.rows(), xv.trailing(), 1, xv.trailing());
  }

  // x: [M,k,D]; softmax over the middle (neighbor) axis for each (m, d).
  Ref softmax_mid(Ref x) {
    const auto& xv = value(x);
    if (xv.rank() != 3) {
      throw std::invalid_argument("softmax_mid: rank-3 input required");
    }
    const std::size_t m = xv.shape[0], k = xv.shape[1], d = xv.shape[2];
    // one "row" per (m, d) pair, stride d between successive k entries
    return softmax_strided_md(x, m, k, d);
  }

  // x: [N,D]; per column, softmax over the rows of each segment. canon gives
  // the reduction order within segments (global row indices); with distinct
  // coordinates it makes the reductions independent of input point order.
  Ref segment_softmax_rows(Ref x, std::vector<std::size_t> offsets,
                           std::vector<std::int32_t> canon = {}) {
    const auto& xv = value(x);
    if (xv.rank() != 2) {
      throw std::invalid_argument("segment_softmax_rows: rank-2 input");
    }
    const std::size_t n = xv.shape[0], d = xv.shape[1];
    if (offsets.front() != 0 || offsets.back() != n) {
      throw std::invalid_argument("segment_softmax_rows: offsets mismatch");
    }
    if (canon.empty()) {
      canon.resize(n);
      for (std::size_t i = 0; i < n; ++i) canon[i] = static_cast<std::int32_t>(i);
    }
    ValueGrid<T> out = ValueGrid<T>::zeros(xv.shape);
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
      const std::size_t b = offsets[s], e = offsets[s + 1];
      for (std::size_t j = 0; j < d; ++j) {
        T mx = xv.data[static_cast<std::size_t>(canon[b]) * d + j];
        for (std::size_t i = b; i < e; ++i) {
          mx = std::max(mx, xv.data[static_cast<std::size_t>(canon[i]) * d + j]);
        }
        T denom = T(0);
        for (std::size_t i = b; i < e; ++i) {
          denom += std::exp(xv.data[static_cast<std::size_t>(canon[i]) * d + j] - mx);
        }
        for (std::size_t i = b; i < e; ++i) {
          const auto row = static_cast<std::size_t>(canon[i]);
          out.data[row * d + j] = std::exp(xv.data[row * d + j] - mx) / denom;
        }
      }
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    auto off = std::make_shared<std::vector<std::size_t>>(std::move(offsets));
    auto cn = std::make_shared<std::vector<std::int32_t>>(std::move(canon));
    set_backward(r, {x}, [x, d, off, cn](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const auto& sv = t.value(self);
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t s = 0; s + 1 < off->size(); ++s) {
        const std::size_t b = (*off)[s], e = (*off)[s + 1];
        for (std::size_t j = 0; j < d; ++j) {
          T dot = T(0);
          for (std::size_t i = b; i < e; ++i) {
            const auto row = static_cast<std::size_t>((*cn)[i]);
            dot += dY[row * d + j] * sv.data[row * d + j];
          }
          for (std::size_t i = b; i < e; ++i) {
            const auto row = static_cast<std::size_t>((*cn)[i]);
            dX[row * d + j] +=
                sv.data[row * d + j] * (dY[row * d + j] - dot);
          }
        }
      }
    });
    return r;
  }

  // ---------------------------------------------------------- shape plumbing

  Ref concat_last(Ref a, Ref b) {
    const auto& av = value(a);
    const auto& bv = value(b);
    if (av.rank() != bv.rank() || av.rows() != bv.rows()) {
      throw std::invalid_argument("concat_last: leading shape mismatch");
    }
    const std::size_t da = av.trailing(), db = bv.trailing(), rows = av.rows();
    auto shape = av.shape;
    shape.back() = da + db;
    ValueGrid<T> out = ValueGrid<T>::zeros(shape);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(av.data.data() + r * da, da, out.data.data() + r * (da + db));
      std::copy_n(bv.data.data() + r * db, db,
                  out.data.data() + r * (da + db) + da);
    }
    Ref r = push(std::move(out), any_grad({a, b}), nullptr);
    set_backward(r, {a, b}, [a, b, da, db, rows](Tape& t, Ref self) {
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      for (std::size_t r2 = 0; r2 < rows; ++r2) {
        if (t.wants_grad(a)) {
          T* dA = t.grad_buf(a).data.data();
          for (std::size_t j = 0; j < da; ++j) {
            dA[r2 * da + j] += dY[r2 * (da + db) + j];
          }
        }
        if (t.wants_grad(b)) {
          T* dB = t.grad_buf(b).data.data();
          for (std::size_t j = 0; j < db; ++j) {
            dB[r2 * db + j] += dY[r2 * (da + db) + da + j];
          }
        }
      }
    });
    return r;
  }

  Ref slice_last(Ref x, std::size_t from, std::size_t to) {
    const auto& xv = value(x);
    const std::size_t d = xv.trailing(), rows = xv.rows();
    if (from >= to || to > d) {
      throw std::invalid_argument("slice_last: bad range");
    }
    const std::size_t w = to - from;
    auto shape = xv.shape;
    shape.back() = w;
    ValueGrid<T> out = ValueGrid<T>::zeros(shape);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(xv.data.data() + r * d + from, w, out.data.data() + r * w);
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    set_backward(r, {x}, [x, from, w, d, rows](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t r2 = 0; r2 < rows; ++r2) {
        for (std::size_t j = 0; j < w; ++j) {
          dX[r2 * d + from + j] += dY[r2 * w + j];
        }
      }
    });
    return r;
  }

  // x: [N,D] -> [M,k,D] via neighbor indices; backward scatter-adds.
  Ref gather_neighbors(Ref x, const NeighborTable& table) {
    const auto& xv = value(x);
    if (xv.rank() != 2) {
      throw std::invalid_argument("gather_neighbors: rank-2 input");
    }
    const std::size_t d = xv.shape[1], m = table.rows(), k = table.k;
    ValueGrid<T> out = ValueGrid<T>::zeros({m, k, d});
    for (std::size_t i = 0; i < m * k; ++i) {
      const auto src = static_cast<std::size_t>(table.indices[i]);
      if (src >= xv.shape[0]) {
        throw std::invalid_argument("gather_neighbors: index out of range");
      }
      std::copy_n(xv.data.data() + src * d, d, out.data.data() + i * d);
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    auto idxs = std::make_shared<std::vector<std::int32_t>>(table.indices);
    set_backward(r, {x}, [x, d, m, k, idxs](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < m * k; ++i) {
        const auto src = static_cast<std::size_t>((*idxs)[i]);
        for (std::size_t j = 0; j < d; ++j) dX[src * d + j] += dY[i * d + j];
      }
    });
    return r;
  }

  // x: [M,D] -> [M,k,D], row repeated along the neighbor axis.
  Ref expand_neighbors(Ref x, std::size_t k) {
    const auto& xv = value(x);
    if (xv.rank() != 2) {
      throw std::invalid_argument("expand_neighbors: rank-2 input");
    }
    const std::size_t m = xv.shape[0], d = xv.shape[1];
    ValueGrid<T> out = ValueGrid<T>::zeros({m, k, d});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        std::copy_n(xv.data.data() + i * d, d,
                    out.data.data() + (i * k + j) * d);
      }
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    set_backward(r, {x}, [x, m, k, d](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          for (std::size_t c = 0; c < d; ++c) {
            dX[i * d + c] += dY[(i * k + j) * d + c];
          }
        }
      }
    });
    return r;
  }

  // [M,k,D] -> [M,D], sum over the neighbor axis.
  Ref sum_neighbors(Ref x) {
    const auto& xv = value(x);
    if (xv.rank() != 3) {
      throw std::invalid_argument("sum_neighbors: rank-3 input");
    }
    const std::size_t m = xv.shape[0], k = xv.shape[1], d = xv.shape[2];
    ValueGrid<T> out = ValueGrid<T>::zeros({m, d});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t c = 0; c < d; ++c) {
          out.data[i * d + c] += xv.data[(i * k + j) * d + c];
        }
      }
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    set_backward(r, {x}, [x, m, k, d](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          for (std::size_t c = 0; c < d; ++c) {
            dX[(i * k + j) * d + c] += dY[i * d + c];
          }
        }
      }
    });
    return r;
  }

  // [M,k,D] -> [M,D], per-channel max over neighbors; gradient routes to the
  // first maximal entry.
  Ref max_neighbors(Ref x) {
    const auto& xv = value(x);
    if (xv.rank() != 3) {
      throw std::invalid_argument("max_neighbors: rank-3 input");
    }
    const std::size_t m = xv.shape[0], k = xv.shape[1], d = xv.shape[2];
    ValueGrid<T> out = ValueGrid<T>::zeros({m, d});
    auto arg = std::make_shared<std::vector<std::int32_t>>(m * d, 0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        T best = xv.data[(i * k) * d + c];
        std::int32_t bj = 0;
        for (std::size_t j = 1; j < k; ++j) {
          const T v = xv.data[(i * k + j) * d + c];
          if (v > best) {
            best = v;
            bj = static_cast<std::int32_t>(j);
          }
        }
        out.data[i * d + c] = best;
        (*arg)[i * d + c] = bj;
      }
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    set_backward(r, {x}, [x, m, k, d, arg](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          const auto j = static_cast<std::size_t>((*arg)[i * d + c]);
          dX[(i * k + j) * d + c] += dY[i * d + c];
        }
      }
    });
    return r;
  }

  // [M,k,D] with constant weights [M,k] -> [M,D].
  Ref weighted_sum_neighbors(Ref x, std::vector<T> weights) {
    const auto& xv = value(x);
    if (xv.rank() != 3) {
      throw std::invalid_argument("weighted_sum_neighbors: rank-3 input");
    }
    const std::size_t m = xv.shape[0], k = xv.shape[1], d = xv.shape[2];
    if (weights.size() != m * k) {
      throw std::invalid_argument("weighted_sum_neighbors: weight count");
    }
    ValueGrid<T> out = ValueGrid<T>::zeros({m, d});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const T w = weights[i * k + j];
        for (std::size_t c = 0; c < d; ++c) {
          out.data[i * d + c] += w * xv.data[(i * k + j) * d + c];
        }
      }
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    auto ws = std::make_shared<std::vector<T>>(std::move(weights));
    set_backward(r, {x}, [x, m, k, d, ws](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const T w = (*ws)[i * k + j];
          for (std::size_t c = 0; c < d; ++c) {
            dX[(i * k + j) * d + c] += w * dY[i * d + c];
          }
        }
      }
    });
    return r;
  }

  // ------------------------------------------------------------ reductions

  Ref sum_all(Ref x) {
    const auto& xv = value(x);
    T s = T(0);
    for (T v : xv.data) s += v;
    Ref r = push(ValueGrid<T>::scalar(s), wants_grad(x), nullptr);
    set_backward(r, {x}, [x](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const T g = t.nodes_[idx(self)].grad.data[0];
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < t.value(x).numel(); ++i) dX[i] += g;
    });
    return r;
  }

  // Scalar projection against a fixed grid; the standard scalarizer for
  // gradient checks.
  Ref inner_with_const(Ref x, ValueGrid<T> c) {
    const auto& xv = value(x);
    if (!xv.same_shape(c)) {
      throw std::invalid_argument("inner_with_const: shape mismatch");
    }
    T s = T(0);
    for (std::size_t i = 0; i < xv.numel(); ++i) s += xv.data[i] * c.data[i];
    Ref r = push(ValueGrid<T>::scalar(s), wants_grad(x), nullptr);
    auto cc = std::make_shared<ValueGrid<T>>(std::move(c));
    set_backward(r, {x}, [x, cc](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const T g = t.nodes_[idx(self)].grad.data[0];
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < cc->numel(); ++i) dX[i] += g * cc->data[i];
    });
    return r;
  }

  // Escape hatch for fused domain ops (losses) built outside this header:
  // the caller provides the forward result and an adjoint closure.
  Ref custom(ValueGrid<T> out, std::initializer_list<Ref> parents,
             std::function<void(Tape&, Ref)> bwd) {
    Ref r = push(std::move(out), any_grad(parents), nullptr);
    if (nodes_[idx(r)].needs_grad) nodes_[idx(r)].backward = std::move(bwd);
    return r;
  }

  // -------------------------------------------------------------- backward

  void backward(Ref loss) {
    auto& ln = nodes_[idx(loss)];
    if (ln.value.numel() != 1) {
      throw std::invalid_argument("backward: loss must be scalar, got " +
                                  shape_str(ln.value.shape));
    }
    grad_buf(loss).data[0] = T(1);
    for (std::int32_t i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.numel() == 0) continue;  // no incoming gradient
      if (n.backward) n.backward(*this, i);
      if (n.sink) {
        for (std::size_t j = 0; j < n.grad.numel(); ++j) {
          n.sink->data[j] += n.grad.data[j];
        }
      }
    }
  }

  ValueGrid<T>& grad_buf(Ref r) {
    Node& n = nodes_[idx(r)];
    if (n.grad.numel() == 0) n.grad = ValueGrid<T>::zeros(n.value.shape);
    return n.grad;
  }

  bool wants_grad(Ref r) const {
    return r >= 0 && nodes_[idx(r)].needs_grad;
  }

 private:
  enum class Bin { Add, Sub, Mul };

  struct Node {
    ValueGrid<T> value;
    ValueGrid<T> grad;
    bool needs_grad = false;
    std::function<void(Tape&, Ref)> backward;
    ValueGrid<T>* sink = nullptr;
  };

  static std::size_t idx(Ref r) { return static_cast<std::size_t>(r); }

  static double normal_cdf(double v) {
    return 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
  }

  bool any_grad(std::initializer_list<Ref> refs) const {
    for (Ref r : refs) {
      if (r >= 0 && nodes_[idx(r)].needs_grad) return true;
    }
    return false;
  }

  Ref push(ValueGrid<T> v, bool needs_grad, ValueGrid<T>* sink) {
    if (check_finite && !v.all_finite()) {
      throw NumericsError("non-finite value produced at node " +
                          std::to_string(nodes_.size()));
    }
    nodes_.push_back(Node{std::move(v), {}, needs_grad, nullptr, sink});
    return static_cast<Ref>(nodes_.size() - 1);
  }

  template <typename F>
  void set_backward(Ref r, std::initializer_list<Ref>, F&& f) {
    if (nodes_[idx(r)].needs_grad) {
      nodes_[idx(r)].backward = std::forward<F>(f);
    }
  }

  Ref binary(Ref a, Ref b, Bin op) {
    const auto& av = value(a);
    const auto& bv = value(b);
    if (!av.same_shape(bv)) {
      throw std::invalid_argument("elementwise op: shape mismatch " +
                                  shape_str(av.shape) + " vs " +
                                  shape_str(bv.shape));
    }
    ValueGrid<T> out = av;
    for (std::size_t i = 0; i < out.numel(); ++i) {
      switch (op) {
        case Bin::Add: out.data[i] = av.data[i] + bv.data[i]; break;
        case Bin::Sub: out.data[i] = av.data[i] - bv.data[i]; break;
        case Bin::Mul: out.data[i] = av.data[i] * bv.data[i]; break;
      }
    }
    Ref r = push(std::move(out), any_grad({a, b}), nullptr);
    set_backward(r, {a, b}, [a, b, op](Tape& t, Ref self) {
      const auto& g = t.nodes_[idx(self)].grad;
      if (t.wants_grad(a)) {
        T* dA = t.grad_buf(a).data.data();
        for (std::size_t i = 0; i < g.numel(); ++i) {
          switch (op) {
            case Bin::Add:
            case Bin::Sub: dA[i] += g.data[i]; break;
            case Bin::Mul: dA[i] += g.data[i] * t.value(b).data[i]; break;
          }
        }
      }
      if (t.wants_grad(b)) {
        T* dB = t.grad_buf(b).data.data();
        for (std::size_t i = 0; i < g.numel(); ++i) {
          switch (op) {
            case Bin::Add: dB[i] += g.data[i]; break;
            case Bin::Sub: dB[i] -= g.data[i]; break;
            case Bin::Mul: dB[i] += g.data[i] * t.value(a).data[i]; break;
          }
        }
      }
    });
    return r;
  }

  // Generic softmax over "rows" of given length with inner stride 1
  // (softmax_last); kept separate from the [M,k,D] mid-axis variant.
  Ref softmax_strided(Ref x, std::size_t rows, std::size_t len,
                      std::size_t inner_stride, std::size_t row_stride) {
    const auto& xv = value(x);
    ValueGrid<T> out = ValueGrid<T>::zeros(xv.shape);
    for (std::size_t r = 0; r < rows; ++r) {
      const T* src = xv.data.data() + r * row_stride;
      T* dst = out.data.data() + r * row_stride;
      T mx = src[0];
      for (std::size_t i = 1; i < len; ++i) {
        mx = std::max(mx, src[i * inner_stride]);
      }
      T denom = T(0);
      for (std::size_t i = 0; i < len; ++i) {
        denom += std::exp(src[i * inner_stride] - mx);
      }
      for (std::size_t i = 0; i < len; ++i) {
        dst[i * inner_stride] = std::exp(src[i * inner_stride] - mx) / denom;
      }
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    set_backward(r, {x},
                 [x, rows, len, inner_stride, row_stride](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const auto& sv = t.value(self);
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t r2 = 0; r2 < rows; ++r2) {
        const T* s = sv.data.data() + r2 * row_stride;
        const T* gy = dY + r2 * row_stride;
        T* gx = dX + r2 * row_stride;
        T dot = T(0);
        for (std::size_t i = 0; i < len; ++i) {
          dot += gy[i * inner_stride] * s[i * inner_stride];
        }
        for (std::size_t i = 0; i < len; ++i) {
          gx[i * inner_stride] +=
              s[i * inner_stride] * (gy[i * inner_stride] - dot);
        }
      }
    });
    return r;
  }

  Ref softmax_strided_md(Ref x, std::size_t m, std::size_t k, std::size_t d) {
    const auto& xv = value(x);
    ValueGrid<T> out = ValueGrid<T>::zeros(xv.shape);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        const std::size_t base = i * k * d + c;
        T mx = xv.data[base];
        for (std::size_t j = 1; j < k; ++j) {
          mx = std::max(mx, xv.data[base + j * d]);
        }
        T denom = T(0);
        for (std::size_t j = 0; j < k; ++j) {
          denom += std::exp(xv.data[base + j * d] - mx);
        }
        for (std::size_t j = 0; j < k; ++j) {
          out.data[base + j * d] = std::exp(xv.data[base + j * d] - mx) / denom;
        }
      }
    }
    Ref r = push(std::move(out), wants_grad(x), nullptr);
    set_backward(r, {x}, [x, m, k, d](Tape& t, Ref self) {
      if (!t.wants_grad(x)) return;
      const auto& sv = t.value(self);
      const T* dY = t.nodes_[idx(self)].grad.data.data();
      T* dX = t.grad_buf(x).data.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
          const std::size_t base = i * k * d + c;
          T dot = T(0);
          for (std::size_t j = 0; j < k; ++j) {
            dot += dY[base + j * d] * sv.data[base + j * d];
          }
          for (std::size_t j = 0; j < k; ++j) {
            dX[base + j * d] +=
                sv.data[base + j * d] * (dY[base + j * d] - dot);
          }
        }
      }
    });
    return r;
  }

  std::vector<Node> nodes_;
};

}  // namespace grt
