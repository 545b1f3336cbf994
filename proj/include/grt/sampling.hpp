#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "grt/geometry.hpp"
#include "grt/layers.hpp"
#include "grt/tape.hpp"

namespace grt {

template <typename T>
struct SampledCloud {
  typename Tape<T>::Ref features;
  CloudGeometry geometry;
  std::vector<std::int32_t> selected;  // global indices into the input cloud
};

namespace detail {

inline std::vector<std::size_t> half_counts(const CloudGeometry& geom) {
  std::vector<std::size_t> m(geom.num_clouds());
  for (std::size_t c = 0; c < geom.num_clouds(); ++c) {
    m[c] = (geom.cloud_size(c) + 1) / 2;
  }
  return m;
}

template <typename T>
ValueGrid<T> coords_grid(const CloudGeometry& geom) {
  ValueGrid<T> g = ValueGrid<T>::zeros({geom.num_points(), 2});
  for (std::size_t i = 0; i < geom.num_points(); ++i) {
    g.data[i * 2] = static_cast<T>(geom.coords[i].x);
    g.data[i * 2 + 1] = static_cast<T>(geom.coords[i].y);
  }
  return g;
}

}  // namespace detail

// Attentive downsampling: scores from a single FC over (features, coords),
// normalized per channel over the whole cloud, then gathered around FPS
// centers and used to weight the input features of the k nearest neighbors.
// The closing FC + LayerNorm + GELU carries the dimension change.
template <typename T>
struct AdsLayer {
  using Ref = typename Tape<T>::Ref;

  FcLayer<T> score_fc;  // (Din+2) -> Din
  FcLayer<T> out_fc;    // Din -> Dout
  LayerNormLayer<T> out_ln;
  std::size_t din = 0, dout = 0;

  static AdsLayer create(ParamStore<T>& store, const std::string& prefix,
                         std::size_t din, std::size_t dout, Rng& rng) {
    AdsLayer l;
    l.din = din;
    l.dout = dout;
    l.score_fc = FcLayer<T>::create(store, prefix + ".score", din + 2, din, rng);
    l.out_fc = FcLayer<T>::create(store, prefix + ".out", din, dout, rng);
    l.out_ln = LayerNormLayer<T>::create(store, prefix + ".ln", dout);
    return l;
  }

  SampledCloud<T> forward(Tape<T>& tape, ParamStore<T>& store, Ref features,
                          const CloudGeometry& geom, std::size_t k,
                          std::vector<std::size_t> target_counts = {}) const {
    const auto& fv = tape.value(features);
    if (fv.rank() != 2 || fv.shape[1] != din ||
        fv.shape[0] != geom.num_points()) {
      throw std::invalid_argument("ads: features must be [N,Din] over geom");
    }
    if (target_counts.empty()) target_counts = detail::half_counts(geom);

    auto coords = tape.constant(detail::coords_grid<T>(geom));
    auto scores =
        score_fc.forward(tape, store, tape.concat_last(features, coords));
    auto weights = tape.segment_softmax_rows(scores, geom.cloud_offsets,
                                             canonical_order(geom));

    auto picks = farthest_point_sampling(geom, target_counts);
    auto coarse = subset(geom, picks, target_counts);
    auto nbr = knn(coarse, geom, k);

    auto wn = tape.gather_neighbors(weights, nbr);
    auto xn = tape.gather_neighbors(features, nbr);
    auto agg = tape.sum_neighbors(tape.mul(wn, xn));

    auto out = tape.gelu(out_ln.forward(tape, store,
                                        out_fc.forward(tape, store, agg)));
    return SampledCloud<T>{out, std::move(coarse), std::move(picks)};
  }
};

// Ablation substitute: FPS centers with per-channel max over the kNN
// neighborhood, then the same FC + LayerNorm + GELU head for shape parity.
template <typename T>
struct MaxPoolDownsample {
  using Ref = typename Tape<T>::Ref;

  FcLayer<T> out_fc;
  LayerNormLayer<T> out_ln;
  std::size_t din = 0, dout = 0;

  static MaxPoolDownsample create(ParamStore<T>& store, const std::string& prefix,
                                  std::size_t din, std::size_t dout, Rng& rng) {
    MaxPoolDownsample l;
    l.din = din;
    l.dout = dout;
    l.out_fc = FcLayer<T>::create(store, prefix + ".out", din, dout, rng);
    l.out_ln = LayerNormLayer<T>::create(store, prefix + ".ln", dout);
    return l;
  }

  SampledCloud<T> forward(Tape<T>& tape, ParamStore<T>& store, Ref features,
                          const CloudGeometry& geom, std::size_t k,
                          std::vector<std::size_t> target_counts = {}) const {
    const auto& fv = tape.value(features);
    if (fv.rank() != 2 || fv.shape[1] != din ||
        fv.shape[0] != geom.num_points()) {
      throw std::invalid_argument("maxpool_ds: features must be [N,Din]");
    }
    if (target_counts.empty()) target_counts = detail::half_counts(geom);

    auto picks = farthest_point_sampling(geom, target_counts);
    auto coarse = subset(geom, picks, target_counts);
    auto nbr = knn(coarse, geom, k);

    auto pooled = tape.max_neighbors(tape.gather_neighbors(features, nbr));
    auto out = tape.gelu(out_ln.forward(tape, store,
                                        out_fc.forward(tape, store, pooled)));
    return SampledCloud<T>{out, std::move(coarse), std::move(picks)};
  }
};

// Attentive upsampling: inter-attention from each skip point into its k
// nearest coarse points. Both inputs are first processed by FC + LayerNorm +
// GELU; scores come from an FC over (processed coarse neighbor, relative
// position) and are normalized per skip point and channel over the k coarse
// neighbors; the processed skip features are added after aggregation.
template <typename T>
struct AusLayer {
  using Ref = typename Tape<T>::Ref;

  FcLayer<T> skip_fc;    // Ds -> Dout
  LayerNormLayer<T> skip_ln;
  FcLayer<T> coarse_fc;  // Dl -> Dout
  LayerNormLayer<T> coarse_ln;
  FcLayer<T> attn_fc;    // (Dout+2) -> Dout
  FcLayer<T> out_fc;     // Dout -> Dout
  LayerNormLayer<T> out_ln;
  std::size_t d_skip = 0, d_coarse = 0, d_out = 0;

  static AusLayer create(ParamStore<T>& store, const std::string& prefix,
                         std::size_t d_skip, std::size_t d_coarse,
                         std::size_t d_out, Rng& rng) {
    AusLayer l;
    l.d_skip = d_skip;
    l.d_coarse = d_coarse;
    l.d_out = d_out;
    l.skip_fc = FcLayer<T>::create(store, prefix + ".skip", d_skip, d_out, rng);
    l.skip_ln = LayerNormLayer<T>::create(store, prefix + ".skip_ln", d_out);
    l.coarse_fc =
        FcLayer<T>::create(store, prefix + ".coarse", d_coarse, d_out, rng);
    l.coarse_ln = LayerNormLayer<T>::create(store, prefix + ".coarse_ln", d_out);
    l.attn_fc =
        FcLayer<T>::create(store, prefix + ".attn", d_out + 2, d_out, rng);
    l.out_fc = FcLayer<T>::create(store, prefix + ".out", d_out, d_out, rng);
    l.out_ln = LayerNormLayer<T>::create(store, prefix + ".ln", d_out);
    return l;
  }

  Ref forward(Tape<T>& tape, ParamStore<T>& store, Ref skip_features,
              const CloudGeometry& skip_geom, Ref coarse_features,
              const CloudGeometry& coarse_geom, std::size_t k) const {
    const auto& sv = tape.value(skip_features);
    const auto& cv = tape.value(coarse_features);
    if (sv.rank() != 2 || sv.shape[1] != d_skip ||
        sv.shape[0] != skip_geom.num_points()) {
      throw std::invalid_argument("aus: skip features must be [Ns,Ds]");
    }
    if (cv.rank() != 2 || cv.shape[1] != d_coarse ||
        cv.shape[0] != coarse_geom.num_points()) {
      throw std::invalid_argument("aus: coarse features must be [Nc,Dl]");
    }
    for (std::size_t c = 0; c < coarse_geom.num_clouds(); ++c) {
      if (k > coarse_geom.cloud_size(c)) {
        throw std::invalid_argument("aus: k exceeds coarse cloud size");
      }
    }

    auto s = tape.gelu(
        skip_ln.forward(tape, store, skip_fc.forward(tape, store, skip_features)));
    auto c = tape.gelu(coarse_ln.forward(
        tape, store, coarse_fc.forward(tape, store, coarse_features)));

    auto nbr = knn(skip_geom, coarse_geom, k);
    auto cn = tape.gather_neighbors(c, nbr);

    // relative position of the coarse neighbor w.r.t. the skip query
    auto disp = relative_positions(skip_geom, nbr, coarse_geom);
    ValueGrid<T> rgrid = ValueGrid<T>::zeros({disp.rows(), disp.k, 2});
    for (std::size_t i = 0; i < disp.r.size(); ++i) {
      rgrid.data[i] = static_cast<T>(-disp.r[i]);
    }

    auto cat = tape.concat_last(cn, tape.constant(std::move(rgrid)));
    auto scores = attn_fc.forward(tape, store, cat);
    auto weights = tape.softmax_mid(scores);
    auto agg = tape.sum_neighbors(tape.mul(weights, cn));

    auto merged = tape.add(agg, s);
    return tape.gelu(out_ln.forward(tape, store,
                                    out_fc.forward(tape, store, merged)));
  }
};

// Inverse-distance interpolation of the k nearest coarse points at each skip
// location; an exact positional hit copies that point's feature verbatim.
// k clamps to the smallest coarse cloud so tiny test clouds stay usable.
template <typename T>
typename Tape<T>::Ref trilinear_upsample(Tape<T>& tape,
                                         typename Tape<T>::Ref coarse_features,
                                         const CloudGeometry& coarse_geom,
                                         const CloudGeometry& skip_geom,
                                         std::size_t k = 3) {
  const auto& cv = tape.value(coarse_features);
  if (cv.rank() != 2 || cv.shape[0] != coarse_geom.num_points()) {
    throw std::invalid_argument("trilinear: features must be [Nc,D]");
  }
  std::size_t k_eff = k;
  for (std::size_t c = 0; c < coarse_geom.num_clouds(); ++c) {
    k_eff = std::min(k_eff, coarse_geom.cloud_size(c));
  }
  auto nbr = knn(skip_geom, coarse_geom, k_eff);

  const std::size_t ns = skip_geom.num_points();
  std::vector<T> weights(ns * k_eff, T(0));
  for (std::size_t i = 0; i < ns; ++i) {
    bool exact = false;
    for (std::size_t j = 0; j < k_eff && !exact; ++j) {
      const auto nb = static_cast<std::size_t>(nbr.at(i, j));
      if (dist2(skip_geom.coords[i], coarse_geom.coords[nb]) == 0.0) {
        weights[i * k_eff + j] = T(1);
        exact = true;
      }
    }
    if (exact) continue;
    double inv_sum = 0.0;
    for (std::size_t j = 0; j < k_eff; ++j) {
      const auto nb = static_cast<std::size_t>(nbr.at(i, j));
      inv_sum += 1.0 / std::sqrt(dist2(skip_geom.coords[i], coarse_geom.coords[nb]));
    }
    for (std::size_t j = 0; j < k_eff; ++j) {
      const auto nb = static_cast<std::size_t>(nbr.at(i, j));
      const double inv =
          1.0 / std::sqrt(dist2(skip_geom.coords[i], coarse_geom.coords[nb]));
      weights[i * k_eff + j] = static_cast<T>(inv / inv_sum);
    }
  }
  return tape.weighted_sum_neighbors(tape.gather_neighbors(coarse_features, nbr),
                                     std::move(weights));
}

}  // namespace grt
