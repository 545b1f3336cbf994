#pragma once

#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "grt/attention.hpp"
#include "grt/checkpoint.hpp"
#include "grt/radar_data.hpp"
#include "grt/sampling.hpp"

namespace grt {

enum class DownVariant { Attentive, MaxPool };
enum class UpVariant { Attentive, Trilinear };

struct GRTConfig {
  std::array<std::size_t, 5> stage_dims = {32, 64, 128, 256, 512};
  std::size_t num_classes = kNumClasses;
  std::size_t n_local = 16;   // GTL neighborhood
  std::size_t sampler_k = 9;  // kNN width of the sampling layers
  AttentionNorm attention = AttentionNorm::Gaussian;
  DownVariant down = DownVariant::Attentive;
  UpVariant up = UpVariant::Attentive;
  FeatureMask features;

  // smallest cloud the 4-stage halving cascade accepts
  static constexpr std::size_t kMinCloudSize = 16;

  std::size_t input_dim() const { return features.dim(); }

  void validate() const {
    for (std::size_t d : stage_dims) {
      if (d < 1) throw std::invalid_argument("GRTConfig: zero stage dim");
    }
    if (num_classes < 1 || n_local < 1 || sampler_k < 1) {
      throw std::invalid_argument("GRTConfig: counts must be >= 1");
    }
  }

  std::string serialize() const;
  static GRTConfig deserialize(const std::string& text);
  bool operator==(const GRTConfig&) const = default;
};

inline std::string GRTConfig::serialize() const {
  std::ostringstream os;
  os << "stage_dims=";
  for (std::size_t i = 0; i < 5; ++i) os << (i ? "," : "") << stage_dims[i];
  os << "\nnum_classes=" << num_classes << "\nn_local=" << n_local
     << "\nsampler_k=" << sampler_k << "\nattention="
     << (attention == AttentionNorm::Gaussian ? "gaussian" : "softmax")
     << "\ndown=" << (down == DownVariant::Attentive ? "attentive" : "maxpool")
     << "\nup=" << (up == UpVariant::Attentive ? "attentive" : "trilinear")
     << "\nfeatures=" << features.str() << "\n";
  return os.str();
}

inline GRTConfig GRTConfig::deserialize(const std::string& text) {
  GRTConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "stage_dims") {
      std::istringstream vs(val);
      std::string tok;
      std::size_t i = 0;
      while (std::getline(vs, tok, ',') && i < 5) {
        cfg.stage_dims[i++] = std::stoul(tok);
      }
      if (i != 5) throw std::invalid_argument("GRTConfig: need 5 stage dims");
    } else if (key == "num_classes") {
      cfg.num_classes = std::stoul(val);
    } else if (key == "n_local") {
      cfg.n_local = std::stoul(val);
    } else if (key == "sampler_k") {
      cfg.sampler_k = std::stoul(val);
    } else if (key == "attention") {
      cfg.attention = val == "softmax" ? AttentionNorm::Softmax
                                       : AttentionNorm::Gaussian;
    } else if (key == "down") {
      cfg.down = val == "maxpool" ? DownVariant::MaxPool : DownVariant::Attentive;
    } else if (key == "up") {
      cfg.up = val == "trilinear" ? UpVariant::Trilinear : UpVariant::Attentive;
    } else if (key == "features") {
      cfg.features = FeatureMask::parse(val);
    } else {
      throw std::invalid_argument("GRTConfig: unknown key " + key);
    }
  }
  cfg.validate();
  return cfg;
}

// U-shaped fully attentive backbone: an embedding block at full resolution,
// four halving encoder stages, four decoder stages walking the skip ladder
// back up, and a two-layer head. Coordinates pass through untransformed; the
// variant flags swap the attention normalization and the two samplers for
// their conventional substitutes.
template <typename T>
class GaussianRadarTransformer {
 public:
  using Ref = typename Tape<T>::Ref;

  static GaussianRadarTransformer build(const GRTConfig& cfg,
                                        ParamStore<T>& store,
                                        std::uint64_t seed) {
    cfg.validate();
    GaussianRadarTransformer net;
    net.cfg_ = cfg;
    auto rng = make_rng(seed, 0x6e7ULL);

    const auto& dims = cfg.stage_dims;
    net.embed_ = FcLayer<T>::create(store, "embed", cfg.input_dim(), dims[0], rng);

    for (std::size_t s = 0; s < 5; ++s) {
      GTLConfig gcfg{dims[s], cfg.n_local, cfg.attention, dims[s]};
      net.gtb_[s] = GtbBlock<T>::create(store, "enc" + std::to_string(s) + ".gtb",
                                        gcfg, rng);
    }
    for (std::size_t s = 0; s < 4; ++s) {
      const std::string prefix = "enc" + std::to_string(s + 1) + ".down";
      if (cfg.down == DownVariant::Attentive) {
        net.ads_[s] = AdsLayer<T>::create(store, prefix, dims[s], dims[s + 1], rng);
      } else {
        net.maxpool_[s] =
            MaxPoolDownsample<T>::create(store, prefix, dims[s], dims[s + 1], rng);
      }
    }
    for (std::size_t s = 0; s < 4; ++s) {
      // decoder stage producing level s output from level s+1
      const std::string prefix = "dec" + std::to_string(s) + ".up";
      if (cfg.up == UpVariant::Attentive) {
        net.aus_[s] = AusLayer<T>::create(store, prefix, dims[s], dims[s + 1],
                                          dims[s], rng);
      } else {
        net.tri_fc_[s] = FcLayer<T>::create(store, prefix + ".merge",
                                            dims[s] + dims[s + 1], dims[s], rng);
        net.tri_ln_[s] =
            LayerNormLayer<T>::create(store, prefix + ".merge_ln", dims[s]);
      }
      GTLConfig gcfg{dims[s], cfg.n_local, cfg.attention, dims[s]};
      net.dec_gtb_[s] = GtbBlock<T>::create(
          store, "dec" + std::to_string(s) + ".gtb", gcfg, rng);
    }
    net.head_fc1_ =
        FcLayer<T>::create(store, "head.fc1", dims[0], dims[0], rng);
    net.head_fc2_ = FcLayer<T>::create(store, "head.fc2", dims[0],
                                       cfg.num_classes, rng, WeightInit::Zero);
    return net;
  }

  const GRTConfig& config() const { return cfg_; }

  // Encoder-stage geometries per cloud, recorded when requested.
  struct ForwardTrace {
    std::vector<std::vector<CloudGeometry>> stages;  // [cloud][level 0..4]
  };

  // Per-point logits [N, C] for a batch of concatenated clouds. Every cloud
  // runs the full cascade independently.
  Ref forward(Tape<T>& tape, ParamStore<T>& store, const ValueGrid<T>& features,
              const CloudGeometry& geom, ForwardTrace* trace = nullptr) const {
    if (features.rank() != 2 || features.shape[1] != cfg_.input_dim() ||
        features.shape[0] != geom.num_points()) {
      throw std::invalid_argument("forward: features must be [N," +
                                  std::to_string(cfg_.input_dim()) +
                                  "] matching the geometry");
    }
    geom.validate();
    std::vector<Ref> parts;
    for (std::size_t c = 0; c < geom.num_clouds(); ++c) {
      if (geom.cloud_size(c) < GRTConfig::kMinCloudSize) {
        throw std::invalid_argument(
            "forward: cloud " + std::to_string(c) + " has " +
            std::to_string(geom.cloud_size(c)) + " points, minimum is " +
            std::to_string(GRTConfig::kMinCloudSize));
      }
      const std::size_t b = geom.cloud_begin(c), n = geom.cloud_size(c);
      ValueGrid<T> sub = ValueGrid<T>::zeros({n, cfg_.input_dim()});
      std::copy_n(features.data.begin() +
                      static_cast<long>(b * cfg_.input_dim()),
                  n * cfg_.input_dim(), sub.data.begin());
      std::vector<Point2> pts(geom.coords.begin() + static_cast<long>(b),
                              geom.coords.begin() + static_cast<long>(b + n));
      parts.push_back(forward_single(tape, store, std::move(sub),
                                     CloudGeometry::single(std::move(pts)),
                                     trace));
    }
    Ref out = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) {
      out = concat_rows(tape, out, parts[i]);
    }
    return out;
  }

 private:
  // GTB with the neighborhood clamped to the cloud size (coarse stages of
  // small clouds have fewer points than N_l).
  Ref run_gtb(Tape<T>& tape, ParamStore<T>& store, const GtbBlock<T>& block,
              Ref feats, const CloudGeometry& geom) const {
    const std::size_t width = std::min<std::size_t>(cfg_.n_local,
                                                    geom.num_points());
    GtbBlock<T> local = block;
    local.gtl.cfg.neighborhood = width;
    return local.forward(tape, store, feats, geom, knn_self(geom, width));
  }

  Ref forward_single(Tape<T>& tape, ParamStore<T>& store, ValueGrid<T> features,
                     CloudGeometry geom, ForwardTrace* trace) const {
    auto x = tape.gelu(embed_.forward(tape, store,
                                      tape.constant(std::move(features))));
    struct Level {
      Ref feats;
      CloudGeometry geom;
    };
    std::vector<Level> skip;
    skip.push_back({run_gtb(tape, store, gtb_[0], x, geom), geom});

    for (std::size_t s = 0; s < 4; ++s) {
      const auto& level = skip.back();
      const std::size_t k =
          std::min<std::size_t>(cfg_.sampler_k, level.geom.num_points());
      SampledCloud<T> down =
          cfg_.down == DownVariant::Attentive
              ? ads_[s]->forward(tape, store, level.feats, level.geom, k)
              : maxpool_[s]->forward(tape, store, level.feats, level.geom, k);
      Ref f = run_gtb(tape, store, gtb_[s + 1], down.features, down.geometry);
      skip.push_back({f, std::move(down.geometry)});
    }
    if (trace) {
      trace->stages.emplace_back();
      for (const auto& level : skip) trace->stages.back().push_back(level.geom);
    }

    Ref cur = skip[4].feats;
    const CloudGeometry* cur_geom = &skip[4].geom;
    for (std::size_t s = 4; s-- > 0;) {
      const auto& target = skip[s];
      Ref merged;
      if (cfg_.up == UpVariant::Attentive) {
        const std::size_t k =
            std::min<std::size_t>(cfg_.sampler_k, cur_geom->num_points());
        merged = aus_[s]->forward(tape, store, target.feats, target.geom, cur,
                                  *cur_geom, k);
      } else {
        auto interp = trilinear_upsample(tape, cur, *cur_geom, target.geom, 3);
        auto cat = tape.concat_last(target.feats, interp);
        merged = tape.gelu(tri_ln_[s]->forward(
            tape, store, tri_fc_[s]->forward(tape, store, cat)));
      }
      cur = run_gtb(tape, store, dec_gtb_[s], merged, target.geom);
      cur_geom = &target.geom;
    }

    auto h = tape.gelu(head_fc1_.forward(tape, store, cur));
    return head_fc2_.forward(tape, store, h);
  }

  static Ref concat_rows(Tape<T>& tape, Ref a, Ref b) {
    // stack [Na,C] over [Nb,C]; plain copy op with split backward
    const auto& av = tape.value(a);
    const auto& bv = tape.value(b);
    ValueGrid<T> out =
        ValueGrid<T>::zeros({av.shape[0] + bv.shape[0], av.shape[1]});
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(),
              out.data.begin() + static_cast<long>(av.numel()));
    const std::size_t na = av.numel();
    return tape.custom(std::move(out), {a, b},
                       [a, b, na](Tape<T>& t, Ref self) {
                         const auto& g = t.grad_buf(self);
                         if (t.wants_grad(a)) {
                           auto& da = t.grad_buf(a);
                           for (std::size_t i = 0; i < na; ++i) {
                             da.data[i] += g.data[i];
                           }
                         }
                         if (t.wants_grad(b)) {
                           auto& db = t.grad_buf(b);
                           for (std::size_t i = 0; i < db.numel(); ++i) {
                             db.data[i] += g.data[na + i];
                           }
                         }
                       });
  }

  GRTConfig cfg_;
  FcLayer<T> embed_;
  std::array<GtbBlock<T>, 5> gtb_;
  std::array<std::optional<AdsLayer<T>>, 4> ads_;
  std::array<std::optional<MaxPoolDownsample<T>>, 4> maxpool_;
  std::array<std::optional<AusLayer<T>>, 4> aus_;
  std::array<std::optional<FcLayer<T>>, 4> tri_fc_;
  std::array<std::optional<LayerNormLayer<T>>, 4> tri_ln_;
  std::array<GtbBlock<T>, 4> dec_gtb_;
  FcLayer<T> head_fc1_;
  FcLayer<T> head_fc2_;
};

// Argmax per point; ties take the smallest class id.
template <typename T>
std::vector<int> predict(const ValueGrid<T>& logits) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("predict: logits must be [N,C]");
  }
  const std::size_t n = logits.shape[0], c = logits.shape[1];
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (logits.data[i * c + j] > logits.data[i * c + best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

// ------------------------------------------------------ model checkpointing

inline constexpr char kMetaFeatureStats[] = "feature_stats";
inline constexpr char kMetaEpoch[] = "epoch";
inline constexpr char kMetaBestMiou[] = "best_val_miou";

template <typename T>
void save_model(const std::string& path, const GRTConfig& cfg,
                const ParamStore<T>& store,
                std::map<std::string, std::string> metadata) {
  save_checkpoint(path, store, cfg.serialize(), std::move(metadata));
}

template <typename T>
struct LoadedModel {
  GRTConfig config;
  ParamStore<T> store;
  GaussianRadarTransformer<T> net;
  std::map<std::string, std::string> metadata;
};

template <typename T>
LoadedModel<T> load_model(const std::string& path) {
  auto ckpt = load_checkpoint<T>(path);
  LoadedModel<T> out;
  try {
    out.config = GRTConfig::deserialize(ckpt.config_echo);
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint: bad embedded config: ") + e.what());
  }
  out.net = GaussianRadarTransformer<T>::build(out.config, out.store, 0);
  restore_params(out.store, ckpt);
  out.metadata = std::move(ckpt.metadata);
  return out;
}

}  // namespace grt
