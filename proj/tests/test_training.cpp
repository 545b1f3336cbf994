#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>

#include "grt/gradcheck.hpp"
#include "grt/synth.hpp"
#include "grt/trainer.hpp"
#include "oracles.hpp"

using namespace grt;

namespace {

ValueGrid<double> random_grid(std::vector<std::size_t> shape, Rng& rng,
                              double scale = 1.0) {
  auto g = ValueGrid<double>::zeros(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : g.data) v = u(rng);
  return g;
}

}  // namespace

TEST_CASE("uniform logits with unit weights give ln C") {
  Tape<double> t;
  auto logits = t.constant(ValueGrid<double>::zeros({4, 6}));
  std::vector<int> labels = {0, 2, 4, 5};
  auto loss = weighted_cross_entropy(t, logits, labels,
                                     std::vector<double>(6, 1.0));
  CHECK(std::abs(t.value(loss).data[0] - std::log(6.0)) < 1e-9);
}

TEST_CASE("cross entropy decreases as the true logit scales up") {
  std::vector<int> labels = {3};
  double prev = 1e9;
  for (double scale : {1.0, 10.0, 100.0}) {
    Tape<double> t;
    auto lg = ValueGrid<double>::zeros({1, 6});
    lg.data[3] = scale;
    auto loss = weighted_cross_entropy(t, t.constant(lg), labels,
                                       std::vector<double>(6, 1.0));
    CHECK(t.value(loss).data[0] < prev);
    prev = t.value(loss).data[0];
  }
  CHECK(prev < 1e-6);  // near zero in the high-confidence limit
}

TEST_CASE("weighted cross entropy is nonnegative on random inputs") {
  auto rng = make_rng(59);
  std::uniform_int_distribution<int> lab(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    Tape<double> t;
    auto logits = random_grid({10, 6}, rng, 4.0);
    std::vector<int> labels(10);
    for (auto& y : labels) y = lab(rng);
    auto loss = weighted_cross_entropy(t, t.constant(logits), labels,
                                       {0.5, 8, 8, 8, 8, 8});
    CHECK(t.value(loss).data[0] >= 0.0);
  }
}

TEST_CASE("weighted cross entropy matches a 5-point hand evaluation") {
  auto rng = make_rng(61);
  auto logits = random_grid({5, 3}, rng, 2.0);
  std::vector<int> labels = {0, 2, 1, 1, 0};
  std::vector<double> weights = {0.5, 8.0, 8.0};

  double wsum = 0, acc = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    double mx = logits.data[i * 3];
    for (std::size_t j = 1; j < 3; ++j) mx = std::max(mx, logits.data[i * 3 + j]);
    double denom = 0;
    for (std::size_t j = 0; j < 3; ++j) denom += std::exp(logits.data[i * 3 + j] - mx);
    const auto y = static_cast<std::size_t>(labels[i]);
    const double logp = logits.data[i * 3 + y] - mx - std::log(denom);
    acc += weights[y] * (-logp);
    wsum += weights[y];
  }

  Tape<double> t;
  auto loss = weighted_cross_entropy(t, t.constant(logits), labels, weights);
  CHECK(t.value(loss).data[0] == doctest::Approx(acc / wsum).epsilon(1e-12));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  Tape<double> t;
  auto logits = t.constant(ValueGrid<double>::zeros({1, 3}));
  CHECK_THROWS_AS(weighted_cross_entropy(t, logits, {7},
                                         std::vector<double>(3, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("lovasz softmax of a perfect prediction is zero") {
  Tape<double> t;
  ValueGrid<double> probs({3, 4}, {1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0});
  auto loss = lovasz_softmax(t, t.constant(probs), {0, 2, 1});
  CHECK(t.value(loss).data[0] == 0.0);
}

TEST_CASE("single point lovasz equals one minus the true probability") {
  Tape<double> t;
  ValueGrid<double> probs({1, 2}, {0.3, 0.7});
  auto loss = lovasz_softmax(t, t.constant(probs), {0});
  CHECK(t.value(loss).data[0] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("lovasz rejects non-normalized probability rows") {
  Tape<double> t;
  ValueGrid<double> probs({1, 2}, {0.9, 0.4});
  CHECK_THROWS_AS(lovasz_softmax(t, t.constant(probs), {0}),
                  std::invalid_argument);
}

// Lovasz extension via its set definition: loss = sum_t m[t] (F(S_t) -
// F(S_t-1)) where S_t holds the t largest errors and F is the discrete
// Jaccard loss of predicting the complement of S on the ground truth.
namespace {
double lovasz_threshold_oracle(const std::vector<double>& probs_row_major,
                               const std::vector<int>& labels, std::size_t n,
                               std::size_t c) {
  double total = 0;
  std::size_t n_present = 0;
  for (std::size_t cls = 0; cls < c; ++cls) {
    std::size_t gts = 0;
    for (int y : labels) gts += static_cast<std::size_t>(y) == cls ? 1 : 0;
    if (gts == 0) continue;
    ++n_present;
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool is_gt = static_cast<std::size_t>(labels[i]) == cls;
      const double p = probs_row_major[i * c + cls];
      m[i] = is_gt ? 1.0 - p : p;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return m[a] > m[b]; });
    auto jaccard_loss_of_prefix = [&](std::size_t t) {
      // S_t = top-t errors flipped; intersection & union of prediction vs gt
      std::size_t fn = 0, fp = 0;
      for (std::size_t r = 0; r < t; ++r) {
        if (static_cast<std::size_t>(labels[order[r]]) == cls) {
          ++fn;
        } else {
          ++fp;
        }
      }
      const double inter = static_cast<double>(gts - fn);
      const double uni = static_cast<double>(gts + fp);
      return 1.0 - inter / uni;
    };
    double class_loss = 0;
    for (std::size_t tstep = 1; tstep <= n; ++tstep) {
      class_loss += m[order[tstep - 1]] *
                    (jaccard_loss_of_prefix(tstep) - jaccard_loss_of_prefix(tstep - 1));
    }
    total += class_loss;
  }
  return total / static_cast<double>(n_present);
}
}  // namespace

TEST_CASE("lovasz matches the exhaustive threshold-set oracle") {
  auto rng = make_rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4, c = 3;
    // random normalized rows
    ValueGrid<double> probs = ValueGrid<double>::zeros({n, c});
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < c; ++j) {
        probs.data[i * c + j] = u(rng);
        s += probs.data[i * c + j];
      }
      for (std::size_t j = 0; j < c; ++j) probs.data[i * c + j] /= s;
    }
    std::vector<int> labels(n);
    std::uniform_int_distribution<int> lab(0, 2);
    for (auto& y : labels) y = lab(rng);

    Tape<double> t;
    auto loss = lovasz_softmax(t, t.constant(probs), labels);
    const double want = lovasz_threshold_oracle(probs.data, labels, n, c);
    CHECK(t.value(loss).data[0] == doctest::Approx(want).epsilon(1e-12));
    CHECK(t.value(loss).data[0] >= 0.0);
    CHECK(t.value(loss).data[0] <= 1.0);
  }
}

TEST_CASE("total loss reduces to cross entropy when lovasz is disabled") {
  auto rng = make_rng(71);
  auto logits = random_grid({6, 6}, rng, 2.0);
  std::vector<int> labels = {0, 1, 2, 3, 4, 5};
  LossConfig cfg = LossConfig::radar_default(6);
  cfg.lovasz_enabled = false;

  Tape<double> t;
  auto total = total_loss(t, t.constant(logits), labels, cfg);
  std::vector<double> w(cfg.class_weights.begin(), cfg.class_weights.end());
  auto ce = weighted_cross_entropy(t, t.constant(logits), labels, w);
  CHECK(t.value(total).data[0] == t.value(ce).data[0]);
}

TEST_CASE("total loss gradients pass the finite-difference check") {
  auto rng = make_rng(73);
  ParamStore<double> store;
  store.create("logits", {8, 6}) = random_grid({8, 6}, rng, 1.5);
  std::vector<int> labels = {0, 1, 0, 2, 3, 4, 5, 0};
  auto report = grad_check(
      store,
      [&](Tape<double>& t, ParamStore<double>& s) {
        return total_loss(t, t.param(s, "logits"), labels,
                          LossConfig::radar_default(6));
      },
      1e-4);
  CHECK(report.pass);
}

TEST_CASE("sgd momentum closed forms") {
  // momentum 0, lr 1, gradient = value drives a scalar to zero
  ParamStore<double> s1;
  s1.create("p", {1}).data = {3.5};
  s1.grad("p").data = {3.5};
  SgdMomentum<double> plain(0.0);
  plain.step(s1, 1.0);
  CHECK(s1.value("p").data[0] == 0.0);

  // two steps with constant gradient: displacement lr*(g + 1.9 g)
  ParamStore<double> s2;
  s2.create("q", {1}).data = {0.0};
  SgdMomentum<double> mom(0.9);
  s2.grad("q").data = {2.0};
  mom.step(s2, 0.1);
  s2.grad("q").data = {2.0};
  mom.step(s2, 0.1);
  CHECK(s2.value("q").data[0] == doctest::Approx(-0.1 * (2.0 + 1.9 * 2.0)));
}

TEST_CASE("sgd ten-step trajectory matches a scalar recurrence") {
  auto rng = make_rng(79);
  std::uniform_real_distribution<double> u(-1, 1);
  ParamStore<double> store;
  store.create("p", {1}).data = {1.25};
  SgdMomentum<double> sgd(0.9);
  double ref_p = 1.25, ref_v = 0;
  for (int step = 0; step < 10; ++step) {
    const double g = u(rng);
    store.grad("p").data = {g};
    sgd.step(store, 0.05);
    ref_v = 0.9 * ref_v + g;
    ref_p -= 0.05 * ref_v;
    CHECK(store.value("p").data[0] == doctest::Approx(ref_p).epsilon(1e-15));
  }
}

TEST_CASE("sgd descends a quadratic for small learning rates") {
  ParamStore<double> store;
  store.create("p", {3}).data = {1.0, -2.0, 0.5};
  SgdMomentum<double> sgd(0.0);
  double prev = 1e18;
  for (int it = 0; it < 20; ++it) {
    double loss = 0;
    for (double v : store.value("p").data) loss += 0.5 * v * v;
    CHECK(loss < prev);
    prev = loss;
    store.grad("p").data = store.value("p").data;  // d(0.5 p^2) = p
    sgd.step(store, 0.1);
  }
}

TEST_CASE("cosine schedule anchors and monotone decay") {
  OptimConfig cfg;  // lr0 0.05, T 50
  CHECK(cosine_lr(0, cfg) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(cosine_lr(50, cfg) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_lr(25, cfg) == doctest::Approx(0.025).epsilon(1e-12));
  double prev = 1e9;
  for (std::size_t t = 0; t <= 50; ++t) {
    CHECK(cosine_lr(t, cfg) <= prev);
    prev = cosine_lr(t, cfg);
  }
}

TEST_CASE("augment with zeroed magnitudes is the identity") {
  auto scenes = synth_generate(SyntheticSceneConfig::benchmark_default(), 1, 5);
  auto rng = make_rng(81);
  auto out = augment(scenes[0], AugmentConfig::off(), rng);
  REQUIRE(out.size() == scenes[0].size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out.detections[i].x == scenes[0].detections[i].x);
    CHECK(out.detections[i].y == scenes[0].detections[i].y);
    CHECK(out.detections[i].v == scenes[0].detections[i].v);
  }
}

TEST_CASE("rotation by pi flips coordinates and preserves v, sigma, labels") {
  RadarPointCloud cloud;
  cloud.detections.push_back({1.0, 0.0, 3.25, -7.5, kCar, 4, 1, 0});
  cloud.real_count = 1;
  // force theta = pi by sampling: use a config with rotate only and a
  // custom rng replayed until theta lands on pi is impractical; instead
  // check the rigid-rotation property on a fixed angle via two points.
  // A rotation preserves pairwise distance and the origin distance.
  cloud.detections.push_back({0.0, 2.0, -1.0, 3.0, kStatic, kNoTrack, 2, 0});
  cloud.real_count = 2;
  AugmentConfig cfg;
  cfg.scale_lo = cfg.scale_hi = 1.0;
  cfg.jitter_sigma = 0.0;
  cfg.instance_prob = 0.0;
  auto rng = make_rng(83);
  auto out = augment(cloud, cfg, rng);
  auto r2 = [](const RadarDetection& d) { return d.x * d.x + d.y * d.y; };
  CHECK(r2(out.detections[0]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r2(out.detections[1]) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(out.detections[0].v == 3.25);
  CHECK(out.detections[0].sigma == -7.5);
  CHECK(out.detections[0].label == kCar);
  CHECK(out.detections[0].track_id == 4);
}

TEST_CASE("scaling scales every pairwise distance by the same factor") {
  auto scenes = synth_generate(SyntheticSceneConfig::benchmark_default(), 1, 7);
  AugmentConfig cfg;
  cfg.scale_lo = cfg.scale_hi = 1.1;
  cfg.rotate = false;
  cfg.jitter_sigma = 0.0;
  cfg.instance_prob = 0.0;
  auto rng = make_rng(87);
  auto out = augment(scenes[0], cfg, rng);
  const auto& a = scenes[0].detections;
  const auto& b = out.detections;
  for (std::size_t i = 1; i < std::min<std::size_t>(a.size(), 10); ++i) {
    const double d0 = std::hypot(a[i].x - a[0].x, a[i].y - a[0].y);
    const double d1 = std::hypot(b[i].x - b[0].x, b[i].y - b[0].y);
    CHECK(d1 == doctest::Approx(1.1 * d0).epsilon(1e-9));
  }
}

TEST_CASE("instance augmentation strictly adds points and keeps labels") {
  SyntheticSceneConfig scfg = SyntheticSceneConfig::dense(80);
  auto scenes = synth_generate(scfg, 1, 11);
  AugmentConfig cfg;
  cfg.scale_lo = cfg.scale_hi = 1.0;
  cfg.rotate = false;
  cfg.jitter_sigma = 0.0;
  cfg.instance_prob = 1.0;
  auto rng = make_rng(91);
  auto out = augment(scenes[0], cfg, rng);
  CHECK(out.size() > scenes[0].size());
  // the added points replicate one moving instance's labels
  std::map<int, int> added;
  for (std::size_t i = scenes[0].size(); i < out.size(); ++i) {
    added[out.detections[i].label]++;
    CHECK(out.detections[i].label != kStatic);
  }
  CHECK(added.size() == 1);
}

TEST_CASE("one epoch smoke run produces a trace and a reloadable checkpoint") {
  auto scenes = synth_generate(SyntheticSceneConfig::benchmark_default(), 2, 3);
  GRTConfig mcfg;
  mcfg.stage_dims = {4, 8, 8, 8, 8};
  mcfg.n_local = 4;
  mcfg.sampler_k = 3;
  ParamStore<float> store;
  auto net = GaussianRadarTransformer<float>::build(mcfg, store, 2);
  auto stats = FeatureStats::estimate(scenes, mcfg.features);

  TrainConfig tcfg;
  tcfg.optim.epochs = 1;
  tcfg.optim.batch_size = 2;
  tcfg.augment = AugmentConfig::off();
  auto result = train(net, store, scenes, scenes, tcfg, stats);
  REQUIRE(result.trace.size() == 1);

  save_model("train_smoke_ckpt.bin", mcfg, store,
             {{kMetaFeatureStats, stats.serialize()}});
  auto loaded = load_model<float>("train_smoke_ckpt.bin");
  for (auto& [name, p] : store) {
    CHECK(loaded.store.value(name).data == p.value.data);  // bitwise
  }
  std::filesystem::remove("train_smoke_ckpt.bin");
}

TEST_CASE("identical seeds give identical loss traces and predictions") {
  auto scenes = synth_generate(SyntheticSceneConfig::benchmark_default(), 3, 13);
  GRTConfig mcfg;
  mcfg.stage_dims = {4, 8, 8, 8, 8};
  mcfg.n_local = 4;
  mcfg.sampler_k = 3;
  auto stats = FeatureStats::estimate(scenes, mcfg.features);

  auto run = [&](std::size_t threads) {
    ParamStore<float> store;
    auto net = GaussianRadarTransformer<float>::build(mcfg, store, 5);
    TrainConfig tcfg;
    tcfg.optim.epochs = 2;
    tcfg.optim.batch_size = 2;
    tcfg.seed = 77;
    tcfg.threads = threads;
    auto result = train(net, store, scenes, {}, tcfg, stats);
    std::vector<double> losses;
    for (const auto& r : result.trace) losses.push_back(r.train_loss);
    // final predictions on scene 0
    auto prep = prepare_scene<float>(scenes[0], mcfg.features, stats);
    Tape<float> t;
    t.record = false;
    auto preds = predict(t.value(net.forward(t, store, prep.features,
                                             prep.geometry)));
    return std::make_pair(losses, preds);
  };

  auto [l1, p1] = run(1);
  auto [l2, p2] = run(2);  // thread count must not change anything
  CHECK(l1 == l2);
  CHECK(p1 == p2);
}

TEST_CASE("train rejects an empty dataset") {
  GRTConfig mcfg;
  mcfg.stage_dims = {4, 8, 8, 8, 8};
  ParamStore<float> store;
  auto net = GaussianRadarTransformer<float>::build(mcfg, store, 2);
  TrainConfig tcfg;
  CHECK_THROWS_AS(train(net, store, {}, {}, tcfg,
                        FeatureStats::identity(mcfg.input_dim())),
                  std::invalid_argument);
}
