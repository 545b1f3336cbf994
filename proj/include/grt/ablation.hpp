#pragma once

#include <cmath>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "grt/run_config.hpp"
#include "grt/trainer.hpp"

namespace grt {

// One benchmark run grid: named model variants trained over several seeds on
// identical synthetic datasets, scored by validation mIoU / macro F1.
struct AblationSettings {
  SyntheticSceneConfig scene = SyntheticSceneConfig::benchmark_default();
  std::size_t train_scenes = 200;
  std::size_t val_scenes = 50;
  std::size_t num_seeds = 3;
  std::uint64_t base_seed = 1;
  GRTConfig base_model;  // fully attentive reference configuration
  OptimConfig optim;
  LossConfig loss = LossConfig::radar_default(kNumClasses);
  AugmentConfig augment;
  std::size_t threads = 1;

  // Desk-scale defaults: small dims and a short schedule, enough for the
  // component and feature orderings to resolve.
  static AblationSettings desk_default() {
    AblationSettings s;
    s.base_model.stage_dims = {8, 16, 24, 32, 48};
    s.base_model.n_local = 8;
    s.base_model.sampler_k = 6;
    s.optim.epochs = 40;
    s.optim.batch_size = 16;
    s.augment.jitter_sigma = 0.02;
    s.augment.instance_prob = 0.25;
    return s;
  }
};

struct VariantScore {
  std::string name;
  GRTConfig model;
  std::vector<double> miou;
  std::vector<double> macro_f1;

  static double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
  static double spread(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  }
  double mean_miou() const { return mean(miou); }
  double spread_miou() const { return spread(miou); }
  double mean_f1() const { return mean(macro_f1); }
  double spread_f1() const { return spread(macro_f1); }
};

// Table rows: the full model (E) against the conventional substitutes,
// added one group at a time.
inline std::vector<std::pair<std::string, GRTConfig>> component_variants(
    const GRTConfig& base) {
  auto make = [&](AttentionNorm norm, DownVariant down, UpVariant up) {
    GRTConfig cfg = base;
    cfg.attention = norm;
    cfg.down = down;
    cfg.up = up;
    return cfg;
  };
  return {
      {"A", make(AttentionNorm::Softmax, DownVariant::MaxPool, UpVariant::Trilinear)},
      {"B", make(AttentionNorm::Softmax, DownVariant::Attentive, UpVariant::Trilinear)},
      {"C", make(AttentionNorm::Softmax, DownVariant::MaxPool, UpVariant::Attentive)},
      {"D", make(AttentionNorm::Softmax, DownVariant::Attentive, UpVariant::Attentive)},
      {"E", make(AttentionNorm::Gaussian, DownVariant::Attentive, UpVariant::Attentive)},
  };
}

inline std::vector<std::pair<std::string, GRTConfig>> feature_variants(
    const GRTConfig& base) {
  auto make = [&](bool doppler, bool rcs) {
    GRTConfig cfg = base;
    cfg.features = FeatureMask{doppler, rcs};
    return cfg;
  };
  return {
      {"x,y", make(false, false)},
      {"x,y,sigma", make(false, true)},
      {"x,y,v", make(true, false)},
      {"x,y,v,sigma", make(true, true)},
  };
}

// Trains every (variant, seed) pair on shared per-seed datasets and scores
// the best-validation checkpoint. Runs are independent, so they parallelize
// at the run level without affecting results.
inline std::vector<VariantScore> run_ablation(
    const AblationSettings& settings,
    const std::vector<std::pair<std::string, GRTConfig>>& variants,
    const std::function<void(const std::string&)>& progress = {}) {
  struct SeedData {
    std::vector<RadarPointCloud> train;
    std::vector<RadarPointCloud> val;
  };
  std::vector<SeedData> data(settings.num_seeds);
  for (std::size_t i = 0; i < settings.num_seeds; ++i) {
    const std::uint64_t seed = settings.base_seed + i;
    data[i].train = synth_generate(settings.scene, settings.train_scenes,
                                   stream_seed(seed, 0x7a11));
    data[i].val = synth_generate(settings.scene, settings.val_scenes,
                                 stream_seed(seed, 0x7a12));
  }

  std::vector<VariantScore> scores(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    scores[v].name = variants[v].first;
    scores[v].model = variants[v].second;
    scores[v].miou.resize(settings.num_seeds);
    scores[v].macro_f1.resize(settings.num_seeds);
  }

  const std::size_t jobs = variants.size() * settings.num_seeds;
  std::mutex progress_mu;
  parallel_for(jobs, settings.threads, [&](std::size_t job) {
    const std::size_t v = job / settings.num_seeds;
    const std::size_t s = job % settings.num_seeds;
    const std::uint64_t seed = settings.base_seed + s;

    const GRTConfig& mcfg = variants[v].second;
    ParamStore<float> store;
    auto net = GaussianRadarTransformer<float>::build(mcfg, store, seed);
    auto stats = FeatureStats::estimate(data[s].train, mcfg.features);

    TrainConfig tcfg;
    tcfg.optim = settings.optim;
    tcfg.loss = settings.loss;
    tcfg.augment = settings.augment;
    tcfg.seed = seed;
    tcfg.threads = 1;  // parallelism lives at the run level
    auto result = train(net, store, data[s].train, data[s].val, tcfg, stats);
    restore_best(store, result);

    auto cm = evaluate(net, store, data[s].val, stats);
    scores[v].miou[s] = iou(cm).mean;
    scores[v].macro_f1[s] = f1(cm).mean;

    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mu);
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-12s seed %llu: mIoU %.4f  F1 %.4f",
                    variants[v].first.c_str(),
                    static_cast<unsigned long long>(seed), scores[v].miou[s],
                    scores[v].macro_f1[s]);
      progress(buf);
    }
  });
  return scores;
}

struct AblationTables {
  std::vector<VariantScore> components;  // rows A..E
  std::vector<VariantScore> features;    // x,y | x,y,sigma | x,y,v | x,y,v,sigma
};

// Both tables; the full-feature row reuses the E runs when the configs
// coincide, so the grid costs 8 distinct runs per seed.
inline AblationTables run_full_ablation(
    const AblationSettings& settings,
    const std::function<void(const std::string&)>& progress = {}) {
  AblationTables tables;
  tables.components = run_ablation(settings, component_variants(settings.base_model),
                                   progress);
  const GRTConfig* e_cfg = nullptr;
  const VariantScore* e_score = nullptr;
  for (const auto& row : tables.components) {
    if (row.name == "E") {
      e_cfg = &row.model;
      e_score = &row;
    }
  }
  std::vector<std::pair<std::string, GRTConfig>> to_run;
  auto all_features = feature_variants(settings.base_model);
  for (const auto& [name, cfg] : all_features) {
    if (e_cfg && cfg.serialize() == e_cfg->serialize()) continue;
    to_run.emplace_back(name, cfg);
  }
  auto ran = run_ablation(settings, to_run, progress);
  std::size_t ri = 0;
  for (const auto& [name, cfg] : all_features) {
    if (e_cfg && cfg.serialize() == e_cfg->serialize()) {
      VariantScore copy = *e_score;
      copy.name = name;
      tables.features.push_back(std::move(copy));
    } else {
      tables.features.push_back(ran[ri++]);
    }
  }
  return tables;
}

inline std::string format_ablation_report(
    const std::vector<VariantScore>& component_rows,
    const std::vector<VariantScore>& feature_rows) {
  std::string out;
  char buf[200];
  auto section = [&](const char* title, const std::vector<VariantScore>& rows) {
    out += title;
    out += "\nvariant\tmean_miou\tspread_miou\tmean_f1\tspread_f1\tper_seed_miou\n";
    for (const auto& r : rows) {
      std::string per_seed;
      for (std::size_t i = 0; i < r.miou.size(); ++i) {
        char sbuf[32];
        std::snprintf(sbuf, sizeof(sbuf), "%s%.4f", i ? "," : "", r.miou[i]);
        per_seed += sbuf;
      }
      std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\t%.4f\t%.4f\t%s\n",
                    r.name.c_str(), r.mean_miou(), r.spread_miou(), r.mean_f1(),
                    r.spread_f1(), per_seed.c_str());
      out += buf;
    }
  };
  section("component ablation", component_rows);
  out += "\n";
  section("feature ablation", feature_rows);
  return out;
}

}  // namespace grt
