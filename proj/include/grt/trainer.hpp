#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

#include "grt/augment.hpp"
#include "grt/backbone.hpp"
#include "grt/losses.hpp"
#include "grt/metrics.hpp"
#include "grt/optimizer.hpp"

namespace grt {

struct TrainConfig {
  OptimConfig optim;
  LossConfig loss = LossConfig::radar_default(kNumClasses);
  AugmentConfig augment;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::size_t start_epoch = 0;  // nonzero when resuming a checkpoint
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_miou = 0.0;
  double val_macro_f1 = 0.0;
};

template <typename T>
struct TrainResult {
  std::vector<EpochRecord> trace;
  std::size_t best_epoch = 0;
  double best_val_miou = -1.0;
  std::map<std::string, ValueGrid<T>> best_params;
};

// Runs tasks 0..n-1 across the pool; results land in caller-owned slots, so
// the outcome is independent of the thread count.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& task) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, n);
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

template <typename T>
struct PreparedScene {
  CloudGeometry geometry;
  ValueGrid<T> features;
  std::vector<int> labels;
  std::vector<bool> valid;  // false on padding duplicates
};

template <typename T>
PreparedScene<T> prepare_scene(const RadarPointCloud& raw,
                               const FeatureMask& mask,
                               const FeatureStats& stats) {
  RadarPointCloud cloud = pad_to_min(raw, GRTConfig::kMinCloudSize);
  PreparedScene<T> p;
  p.geometry = cloud.geometry();
  p.features = feature_grid<T>(cloud, mask, stats);
  p.labels = cloud.labels();
  p.valid.assign(cloud.size(), true);
  for (std::size_t i = cloud.real_count; i < cloud.size(); ++i) {
    p.valid[i] = false;
  }
  return p;
}

template <typename T>
ConfusionMatrix evaluate(const GaussianRadarTransformer<T>& net,
                         ParamStore<T>& store,
                         const std::vector<RadarPointCloud>& scenes,
                         const FeatureStats& stats, std::size_t threads = 1) {
  const FeatureMask mask = net.config().features;
  std::vector<ConfusionMatrix> cms(scenes.size(),
                                   ConfusionMatrix(net.config().num_classes));
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    auto prep = prepare_scene<T>(scenes[i], mask, stats);
    Tape<T> tape;
    tape.record = false;
    auto logits = net.forward(tape, store, prep.features, prep.geometry);
    cms[i].update(predict(tape.value(logits)), prep.labels, prep.valid);
  });
  ConfusionMatrix total(net.config().num_classes);
  for (const auto& cm : cms) total.merge(cm);
  return total;
}

// Epoch loop: shuffled mini-batches of whole clouds, per-cloud gradients
// reduced in batch order (bitwise reproducible for any thread count), SGD
// with momentum under the cosine schedule, per-epoch validation, best
// checkpoint retained by validation mIoU.
template <typename T>
TrainResult<T> train(const GaussianRadarTransformer<T>& net,
                     ParamStore<T>& store,
                     const std::vector<RadarPointCloud>& train_scenes,
                     const std::vector<RadarPointCloud>& val_scenes,
                     const TrainConfig& cfg, const FeatureStats& stats,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train_scenes.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }
  const FeatureMask mask = net.config().features;
  SgdMomentum<T> sgd(cfg.optim.momentum);
  TrainResult<T> result;

  std::vector<std::size_t> order(train_scenes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = cfg.start_epoch; epoch < cfg.optim.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.optim);
    auto shuffle_rng = make_rng(cfg.seed, 0x0e90c4ULL, epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::uint64_t correct = 0, seen = 0;

    for (std::size_t start = 0; start < order.size();
         start += cfg.optim.batch_size) {
      const std::size_t bsize =
          std::min(cfg.optim.batch_size, order.size() - start);

      struct CloudResult {
        std::map<std::string, ValueGrid<T>> grads;
        double loss = 0.0;
        std::uint64_t correct = 0, total = 0;
      };
      std::vector<CloudResult> results(bsize);

      parallel_for(bsize, cfg.threads, [&](std::size_t bi) {
        const std::size_t scene_id = order[start + bi];
        auto scene_rng = make_rng(cfg.seed, 0xa06ULL, scene_id, epoch);
        auto augmented = augment(train_scenes[scene_id], cfg.augment, scene_rng);
        auto prep = prepare_scene<T>(augmented, mask, stats);

        Tape<T> tape;
        tape.grad_sink_override = &results[bi].grads;
        auto logits = net.forward(tape, store, prep.features, prep.geometry);
        auto loss = total_loss(tape, logits, prep.labels, cfg.loss);
        tape.backward(loss);
        results[bi].loss = static_cast<double>(tape.value(loss).data[0]);

        auto preds = predict(tape.value(logits));
        for (std::size_t i = 0; i < preds.size(); ++i) {
          if (!prep.valid[i]) continue;
          ++results[bi].total;
          if (preds[i] == prep.labels[i]) ++results[bi].correct;
        }
      });

      store.zero_grads();
      const T inv_b = T(1) / static_cast<T>(bsize);
      for (const auto& r : results) {
        for (const auto& [name, g] : r.grads) {
          auto& dst = store.grad(name);
          for (std::size_t i = 0; i < g.numel(); ++i) {
            dst.data[i] += inv_b * g.data[i];
          }
        }
        loss_sum += r.loss;
        ++loss_count;
        correct += r.correct;
        seen += r.total;
      }
      sgd.step(store, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0;
    rec.train_acc = seen ? static_cast<double>(correct) / static_cast<double>(seen)
                         : 0;
    if (!val_scenes.empty()) {
      auto cm = evaluate(net, store, val_scenes, stats, cfg.threads);
      rec.val_miou = iou(cm).mean;
      rec.val_macro_f1 = f1(cm).mean;
    }
    result.trace.push_back(rec);

    if (val_scenes.empty() ? true : rec.val_miou >= result.best_val_miou) {
      // >= keeps the latest epoch among ties
      result.best_val_miou = val_scenes.empty() ? 0.0 : rec.val_miou;
      result.best_epoch = epoch;
      result.best_params.clear();
      for (const auto& [name, p] : store) {
        result.best_params.emplace(name, p.value);
      }
    }
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

template <typename T>
void restore_best(ParamStore<T>& store, const TrainResult<T>& result) {
  for (const auto& [name, value] : result.best_params) {
    store.at(name).value = value;
  }
}

}  // namespace grt
