// Loop-nest reference evaluations of the attention and sampling layers,
// written directly from the math on plain vectors. They share parameter
// VALUES with the implementation via the store, but no code path.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "grt/geometry.hpp"
#include "grt/param_store.hpp"
#include "oracles.hpp"

namespace grt::test {

using Vec = std::vector<double>;

inline const Vec& pval(const ParamStore<double>& s, const std::string& name) {
  return s.at(name).value.data;
}

inline Vec fc_ref(const Vec& x, std::size_t rows, std::size_t din,
                  const Vec& w, const Vec& b, std::size_t dout) {
  Vec y(rows * dout, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < dout; ++o) {
      double acc = b.empty() ? 0.0 : b[o];
      for (std::size_t i = 0; i < din; ++i) {
        acc += x[r * din + i] * w[i * dout + o];
      }
      y[r * dout + o] = acc;
    }
  }
  return y;
}

inline double gelu_ref(double v) {
  return v * 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
}

inline double gaussian_ref(double v) { return std::exp(-v * v / 2.0); }

inline Vec layer_norm_ref(const Vec& x, std::size_t rows, std::size_t d,
                          const Vec& scale, const Vec& shift,
                          double eps = 1e-5) {
  Vec y(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0, var = 0;
    for (std::size_t j = 0; j < d; ++j) mean += x[r * d + j];
    mean /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x[r * d + j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      y[r * d + j] =
          scale[j] * (x[r * d + j] - mean) / std::sqrt(var + eps) + shift[j];
    }
  }
  return y;
}

// GTL reference: per center j and neighbor slot i,
//   score = (q_j - k_i) + posenc(p_j - p_i), elementwise over D,
//   weight = G(score) or softmax over the neighbor slots per channel,
//   out_j  = sum_i weight * v_i.
inline Vec gtl_ref(const Vec& features, const std::vector<Point2>& coords,
                   const NeighborTable& nbr, const ParamStore<double>& s,
                   const std::string& prefix, std::size_t d, bool gaussian) {
  const std::size_t n = coords.size(), k = nbr.k;
  const Vec qkv = fc_ref(features, n, d, pval(s, prefix + ".qkv.w"),
                         pval(s, prefix + ".qkv.b"), 3 * d);

  Vec out(n * d, 0.0);
  std::vector<Vec> scores(k, Vec(d));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      const auto nb = static_cast<std::size_t>(nbr.at(j, i));
      Vec rp = {coords[j].x - coords[nb].x, coords[j].y - coords[nb].y};
      Vec h = fc_ref(rp, 1, 2, pval(s, prefix + ".pos1.w"),
                     pval(s, prefix + ".pos1.b"), d);
      for (auto& v : h) v = gelu_ref(v);
      Vec enc = fc_ref(h, 1, d, pval(s, prefix + ".pos2.w"),
                       pval(s, prefix + ".pos2.b"), d);
      for (std::size_t c = 0; c < d; ++c) {
        const double q = qkv[j * 3 * d + c];
        const double key = qkv[nb * 3 * d + d + c];
        scores[i][c] = (q - key) + enc[c];
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      std::vector<double> w(k);
      if (gaussian) {
        for (std::size_t i = 0; i < k; ++i) w[i] = gaussian_ref(scores[i][c]);
      } else {
        double mx = scores[0][c];
        for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, scores[i][c]);
        double denom = 0;
        for (std::size_t i = 0; i < k; ++i) denom += std::exp(scores[i][c] - mx);
        for (std::size_t i = 0; i < k; ++i) {
          w[i] = std::exp(scores[i][c] - mx) / denom;
        }
      }
      for (std::size_t i = 0; i < k; ++i) {
        const auto nb = static_cast<std::size_t>(nbr.at(j, i));
        out[j * d + c] += w[i] * qkv[nb * 3 * d + 2 * d + c];
      }
    }
  }
  return out;
}

// ADS reference over a single cloud: concat coords, score FC, per-channel
// softmax over all N points, FPS + kNN via the test oracles, weighted sum of
// input features, then FC + LayerNorm + GELU.
struct AdsRefResult {
  Vec features;
  std::vector<std::int32_t> centers;
};

inline AdsRefResult ads_ref(const Vec& features, const std::vector<Point2>& pts,
                            const ParamStore<double>& s, const std::string& prefix,
                            std::size_t din, std::size_t dout, std::size_t k,
                            std::size_t target) {
  const std::size_t n = pts.size();
  Vec cat(n * (din + 2));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < din; ++j) cat[i * (din + 2) + j] = features[i * din + j];
    cat[i * (din + 2) + din] = pts[i].x;
    cat[i * (din + 2) + din + 1] = pts[i].y;
  }
  const Vec raw = fc_ref(cat, n, din + 2, pval(s, prefix + ".score.w"),
                         pval(s, prefix + ".score.b"), din);
  Vec weights(n * din);
  for (std::size_t c = 0; c < din; ++c) {
    double mx = raw[c];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, raw[i * din + c]);
    double denom = 0;
    for (std::size_t i = 0; i < n; ++i) denom += std::exp(raw[i * din + c] - mx);
    for (std::size_t i = 0; i < n; ++i) {
      weights[i * din + c] = std::exp(raw[i * din + c] - mx) / denom;
    }
  }

  auto centers = fps_oracle(pts, target);
  std::vector<Point2> center_pts;
  for (auto idx : centers) center_pts.push_back(pts[(std::size_t)idx]);
  auto nbrs = knn_oracle(center_pts, pts, k);

  Vec agg(target * din, 0.0);
  for (std::size_t i = 0; i < target; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto nb = static_cast<std::size_t>(nbrs[i * k + j]);
      for (std::size_t c = 0; c < din; ++c) {
        agg[i * din + c] += weights[nb * din + c] * features[nb * din + c];
      }
    }
  }
  Vec head = fc_ref(agg, target, din, pval(s, prefix + ".out.w"),
                    pval(s, prefix + ".out.b"), dout);
  head = layer_norm_ref(head, target, dout, pval(s, prefix + ".ln.scale"),
                        pval(s, prefix + ".ln.shift"));
  for (auto& v : head) v = gelu_ref(v);
  return {std::move(head), std::move(centers)};
}

// AUS reference over a single cloud pair.
inline Vec aus_ref(const Vec& skip_feats, const std::vector<Point2>& skip_pts,
                   const Vec& coarse_feats, const std::vector<Point2>& coarse_pts,
                   const ParamStore<double>& s, const std::string& prefix,
                   std::size_t d_skip, std::size_t d_coarse, std::size_t d_out,
                   std::size_t k) {
  const std::size_t ns = skip_pts.size(), nc = coarse_pts.size();
  Vec sp = fc_ref(skip_feats, ns, d_skip, pval(s, prefix + ".skip.w"),
                  pval(s, prefix + ".skip.b"), d_out);
  sp = layer_norm_ref(sp, ns, d_out, pval(s, prefix + ".skip_ln.scale"),
                      pval(s, prefix + ".skip_ln.shift"));
  for (auto& v : sp) v = gelu_ref(v);

  Vec cp = fc_ref(coarse_feats, nc, d_coarse, pval(s, prefix + ".coarse.w"),
                  pval(s, prefix + ".coarse.b"), d_out);
  cp = layer_norm_ref(cp, nc, d_out, pval(s, prefix + ".coarse_ln.scale"),
                      pval(s, prefix + ".coarse_ln.shift"));
  for (auto& v : cp) v = gelu_ref(v);

  auto nbrs = knn_oracle(skip_pts, coarse_pts, k);

  Vec merged(ns * d_out, 0.0);
  std::vector<Vec> scores(k, Vec(d_out));
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto nb = static_cast<std::size_t>(nbrs[i * k + j]);
      Vec cat(d_out + 2);
      for (std::size_t c = 0; c < d_out; ++c) cat[c] = cp[nb * d_out + c];
      cat[d_out] = coarse_pts[nb].x - skip_pts[i].x;
      cat[d_out + 1] = coarse_pts[nb].y - skip_pts[i].y;
      scores[j] = fc_ref(cat, 1, d_out + 2, pval(s, prefix + ".attn.w"),
                         pval(s, prefix + ".attn.b"), d_out);
    }
    for (std::size_t c = 0; c < d_out; ++c) {
      double mx = scores[0][c];
      for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, scores[j][c]);
      double denom = 0;
      for (std::size_t j = 0; j < k; ++j) denom += std::exp(scores[j][c] - mx);
      for (std::size_t j = 0; j < k; ++j) {
        const auto nb = static_cast<std::size_t>(nbrs[i * k + j]);
        merged[i * d_out + c] +=
            std::exp(scores[j][c] - mx) / denom * cp[nb * d_out + c];
      }
    }
    for (std::size_t c = 0; c < d_out; ++c) {
      merged[i * d_out + c] += sp[i * d_out + c];
    }
  }
  Vec out = fc_ref(merged, ns, d_out, pval(s, prefix + ".out.w"),
                   pval(s, prefix + ".out.b"), d_out);
  out = layer_norm_ref(out, ns, d_out, pval(s, prefix + ".ln.scale"),
                       pval(s, prefix + ".ln.shift"));
  for (auto& v : out) v = gelu_ref(v);
  return out;
}

// Direct inverse-distance formula with the exact-hit rule.
inline Vec trilinear_ref(const Vec& coarse_feats,
                         const std::vector<Point2>& coarse_pts,
                         const std::vector<Point2>& skip_pts, std::size_t d,
                         std::size_t k) {
  k = std::min(k, coarse_pts.size());
  auto nbrs = knn_oracle(skip_pts, coarse_pts, k);
  Vec out(skip_pts.size() * d, 0.0);
  for (std::size_t i = 0; i < skip_pts.size(); ++i) {
    std::size_t hit = coarse_pts.size();
    for (std::size_t j = 0; j < k; ++j) {
      const auto nb = static_cast<std::size_t>(nbrs[i * k + j]);
      if (dist2(skip_pts[i], coarse_pts[nb]) == 0.0) {
        hit = nb;
        break;
      }
    }
    if (hit < coarse_pts.size()) {
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] = coarse_feats[hit * d + c];
      continue;
    }
    double inv_sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const auto nb = static_cast<std::size_t>(nbrs[i * k + j]);
      inv_sum += 1.0 / std::sqrt(dist2(skip_pts[i], coarse_pts[nb]));
    }
    for (std::size_t j = 0; j < k; ++j) {
      const auto nb = static_cast<std::size_t>(nbrs[i * k + j]);
      const double w =
          (1.0 / std::sqrt(dist2(skip_pts[i], coarse_pts[nb]))) / inv_sum;
      for (std::size_t c = 0; c < d; ++c) {
        out[i * d + c] += w * coarse_feats[nb * d + c];
      }
    }
  }
  return out;
}

}  // namespace grt::test
