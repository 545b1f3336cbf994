#pragma once

#include <string>

#include "grt/geometry.hpp"
#include "grt/layers.hpp"
#include "grt/tape.hpp"

namespace grt {

enum class AttentionNorm { Gaussian, Softmax };

struct GTLConfig {
  std::size_t feature_dim = 0;    // D
  std::size_t neighborhood = 16;  // N_l, neighbor rows per point
  AttentionNorm norm = AttentionNorm::Gaussian;
  // Scaling dimension of scalar dot-product attention; vector attention has
  // no dot product, so the softmax variant carries it without reading it.
  std::size_t dot_scale_dim = 0;

  void validate() const {
    if (feature_dim < 1 || neighborhood < 1) {
      throw std::invalid_argument("GTLConfig: dims must be >= 1");
    }
  }
};

// Vector self-attention over local neighborhoods. Queries/keys/values come
// from one D -> 3D projection; the score for (center j, neighbor i) is
// (q_j - k_i) + encoding(p_j - p_i), normalized elementwise by the Gaussian
// (or by softmax over neighbors in the ablation variant), and the output is
// the weight-modulated sum of neighbor values with no trailing linear layer.
template <typename T>
struct GtlLayer {
  using Ref = typename Tape<T>::Ref;

  GTLConfig cfg;
  FcLayer<T> qkv;      // D -> 3D
  FcLayer<T> pos_fc1;  // 2 -> D
  FcLayer<T> pos_fc2;  // D -> D

  static GtlLayer create(ParamStore<T>& store, const std::string& prefix,
                         const GTLConfig& cfg, Rng& rng) {
    cfg.validate();
    GtlLayer layer;
    layer.cfg = cfg;
    const std::size_t d = cfg.feature_dim;
    layer.qkv = FcLayer<T>::create(store, prefix + ".qkv", d, 3 * d, rng);
    layer.pos_fc1 = FcLayer<T>::create(store, prefix + ".pos1", 2, d, rng);
    layer.pos_fc2 = FcLayer<T>::create(store, prefix + ".pos2", d, d, rng);
    return layer;
  }

  // Per-pair encoding of relative positions: FC(2->D), GELU, FC(D->D).
  Ref positional_encoding(Tape<T>& tape, ParamStore<T>& store,
                          const Displacement& disp) const {
    ValueGrid<T> grid({disp.rows(), disp.k, 2},
                      std::vector<T>(disp.r.begin(), disp.r.end()));
    auto h = pos_fc1.forward(tape, store, tape.constant(std::move(grid)));
    return pos_fc2.forward(tape, store, tape.gelu(h));
  }

  struct Detailed {
    Ref output;
    Ref attention;  // [N, N_l, D]
    Ref scores;     // pre-normalization
  };

  Detailed forward_detailed(Tape<T>& tape, ParamStore<T>& store, Ref features,
                            const CloudGeometry& geom,
                            const NeighborTable& neighbors) const {
    const auto& fv = tape.value(features);
    if (fv.rank() != 2 || fv.shape[1] != cfg.feature_dim) {
      throw std::invalid_argument("gtl: features must be [N,D], got " +
                                  shape_str(fv.shape));
    }
    if (neighbors.k != cfg.neighborhood) {
      throw std::invalid_argument(
          "gtl: neighbor width " + std::to_string(neighbors.k) +
          " does not match configured N_l " + std::to_string(cfg.neighborhood));
    }
    if (neighbors.rows() != fv.shape[0] || geom.num_points() != fv.shape[0]) {
      throw std::invalid_argument("gtl: geometry/feature row mismatch");
    }
    const std::size_t d = cfg.feature_dim;

    auto proj = qkv.forward(tape, store, features);  // [N, 3D]
    auto q = tape.slice_last(proj, 0, d);
    auto k = tape.slice_last(proj, d, 2 * d);
    auto v = tape.slice_last(proj, 2 * d, 3 * d);

    auto kn = tape.gather_neighbors(k, neighbors);
    auto vn = tape.gather_neighbors(v, neighbors);
    auto qe = tape.expand_neighbors(q, neighbors.k);

    auto disp = relative_positions(geom, neighbors, geom);
    auto enc = positional_encoding(tape, store, disp);

    auto scores = tape.add(tape.sub(qe, kn), enc);
    Ref attn = cfg.norm == AttentionNorm::Gaussian ? tape.gaussian(scores)
                                                   : tape.softmax_mid(scores);
    auto out = tape.sum_neighbors(tape.mul(attn, vn));
    return Detailed{out, attn, scores};
  }

  Ref forward(Tape<T>& tape, ParamStore<T>& store, Ref features,
              const CloudGeometry& geom, const NeighborTable& neighbors) const {
    return forward_detailed(tape, store, features, geom, neighbors).output;
  }
};

// Residual block around a GTL: FC + GELU in, FC + GELU out, identity skip.
// The closing FC starts at zero so a freshly built block is the identity.
// Coordinates are never transformed.
template <typename T>
struct GtbBlock {
  using Ref = typename Tape<T>::Ref;

  FcLayer<T> fc_in;
  GtlLayer<T> gtl;
  FcLayer<T> fc_out;

  static GtbBlock create(ParamStore<T>& store, const std::string& prefix,
                         const GTLConfig& cfg, Rng& rng) {
    GtbBlock block;
    const std::size_t d = cfg.feature_dim;
    block.fc_in = FcLayer<T>::create(store, prefix + ".fc_in", d, d, rng);
    block.gtl = GtlLayer<T>::create(store, prefix + ".gtl", cfg, rng);
    block.fc_out =
        FcLayer<T>::create(store, prefix + ".fc_out", d, d, rng, WeightInit::Zero);
    return block;
  }

  Ref forward(Tape<T>& tape, ParamStore<T>& store, Ref features,
              const CloudGeometry& geom, const NeighborTable& neighbors) const {
    auto h = tape.gelu(fc_in.forward(tape, store, features));
    auto g = gtl.forward(tape, store, h, geom, neighbors);
    auto z = tape.gelu(fc_out.forward(tape, store, g));
    return tape.add(features, z);
  }
};

}  // namespace grt
