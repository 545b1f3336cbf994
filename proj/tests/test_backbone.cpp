#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "grt/backbone.hpp"
#include "grt/gradcheck.hpp"
#include "grt/rng.hpp"
#include "oracles.hpp"

using namespace grt;

namespace {

GRTConfig toy_config() {
  GRTConfig cfg;
  cfg.stage_dims = {8, 16, 32, 64, 128};
  cfg.n_local = 16;
  cfg.sampler_k = 9;
  return cfg;
}

ValueGrid<double> random_features(std::size_t n, std::size_t dim, Rng& rng) {
  auto g = ValueGrid<double>::zeros({n, dim});
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (auto& v : g.data) v = u(rng);
  return g;
}

// closed-form parameter count from the layer shape formulas
std::size_t expected_param_count(const GRTConfig& cfg) {
  auto fc = [](std::size_t din, std::size_t dout) { return din * dout + dout; };
  auto gtb = [&](std::size_t d) {
    return fc(d, d) + fc(d, 3 * d) + fc(2, d) + fc(d, d) + fc(d, d);
  };
  const auto& dm = cfg.stage_dims;
  std::size_t total = fc(cfg.input_dim(), dm[0]);
  for (std::size_t s = 0; s < 5; ++s) total += gtb(dm[s]);
  for (std::size_t s = 0; s < 4; ++s) {
    if (cfg.down == DownVariant::Attentive) {
      total += fc(dm[s] + 2, dm[s]);  // score
    }
    total += fc(dm[s], dm[s + 1]) + 2 * dm[s + 1];  // head FC + layer norm
  }
  for (std::size_t s = 0; s < 4; ++s) {
    if (cfg.up == UpVariant::Attentive) {
      total += fc(dm[s], dm[s]) + 2 * dm[s];          // skip path
      total += fc(dm[s + 1], dm[s]) + 2 * dm[s];      // coarse path
      total += fc(dm[s] + 2, dm[s]);                  // attention scores
      total += fc(dm[s], dm[s]) + 2 * dm[s];          // out
    } else {
      total += fc(dm[s] + dm[s + 1], dm[s]) + 2 * dm[s];
    }
    total += gtb(dm[s]);
  }
  total += fc(dm[0], dm[0]) + fc(dm[0], cfg.num_classes);
  return total;
}

}  // namespace

TEST_CASE("build is deterministic given the seed") {
  auto cfg = toy_config();
  ParamStore<double> a, b;
  GaussianRadarTransformer<double>::build(cfg, a, 99);
  GaussianRadarTransformer<double>::build(cfg, b, 99);
  REQUIRE(a.size() == b.size());
  for (auto& [name, p] : a) {
    CHECK(b.value(name).data == p.value.data);  // bitwise
  }
  ParamStore<double> c;
  GaussianRadarTransformer<double>::build(cfg, c, 100);
  bool any_diff = false;
  for (auto& [name, p] : a) {
    if (c.value(name).data != p.value.data) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("parameter count matches the closed-form shape audit") {
  for (auto down : {DownVariant::Attentive, DownVariant::MaxPool}) {
    for (auto up : {UpVariant::Attentive, UpVariant::Trilinear}) {
      auto cfg = toy_config();
      cfg.down = down;
      cfg.up = up;
      ParamStore<double> store;
      GaussianRadarTransformer<double>::build(cfg, store, 1);
      CHECK(store.total_parameters() == expected_param_count(cfg));
    }
  }
  GRTConfig full;  // default 32..512 dims
  ParamStore<double> store;
  GaussianRadarTransformer<double>::build(full, store, 1);
  CHECK(store.total_parameters() == expected_param_count(full));
}

TEST_CASE("stage cardinalities halve and logits cover every point") {
  auto cfg = toy_config();
  ParamStore<double> store;
  auto net = GaussianRadarTransformer<double>::build(cfg, store, 5);
  auto rng = make_rng(1);
  auto pts = test::random_points(32, rng);
  auto geom = CloudGeometry::single(pts);
  auto feats = random_features(32, cfg.input_dim(), rng);

  Tape<double> t;
  t.record = false;
  GaussianRadarTransformer<double>::ForwardTrace trace;
  auto logits = net.forward(t, store, feats, geom, &trace);
  CHECK(t.value(logits).shape == std::vector<std::size_t>{32, 6});
  REQUIRE(trace.stages.size() == 1);
  std::vector<std::size_t> sizes;
  for (const auto& g : trace.stages[0]) sizes.push_back(g.num_points());
  CHECK(sizes == std::vector<std::size_t>{32, 16, 8, 4, 2});

  // every stage's coordinates are a subset of the input coordinates
  std::set<std::pair<double, double>> input_set;
  for (const auto& p : pts) input_set.insert({p.x, p.y});
  for (const auto& g : trace.stages[0]) {
    for (const auto& p : g.coords) {
      CHECK(input_set.count({p.x, p.y}) == 1);
    }
  }
}

TEST_CASE("undersized clouds are rejected with the cloud named") {
  auto cfg = toy_config();
  ParamStore<double> store;
  auto net = GaussianRadarTransformer<double>::build(cfg, store, 5);
  auto rng = make_rng(2);
  CloudGeometry g;
  auto p1 = test::random_points(20, rng);
  auto p2 = test::random_points(7, rng);
  g.coords = p1;
  g.coords.insert(g.coords.end(), p2.begin(), p2.end());
  g.cloud_offsets = {0, 20, 27};
  auto feats = random_features(27, cfg.input_dim(), rng);
  Tape<double> t;
  try {
    net.forward(t, store, feats, g);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("cloud 1") != std::string::npos);
  }
}

TEST_CASE("permuting a cloud permutes the logits identically") {
  auto cfg = toy_config();
  cfg.n_local = 8;
  cfg.sampler_k = 5;
  ParamStore<double> store;
  auto net = GaussianRadarTransformer<double>::build(cfg, store, 6);
  auto rng = make_rng(3);
  auto pts = test::random_points(20, rng);
  auto feats = random_features(20, cfg.input_dim(), rng);

  Tape<double> t;
  t.record = false;
  auto out = t.value(net.forward(t, store, feats, CloudGeometry::single(pts)));

  std::vector<std::size_t> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Point2> pts2(20);
  auto feats2 = ValueGrid<double>::zeros({20, cfg.input_dim()});
  for (std::size_t i = 0; i < 20; ++i) {
    pts2[i] = pts[perm[i]];
    for (std::size_t c = 0; c < cfg.input_dim(); ++c) {
      feats2.data[i * cfg.input_dim() + c] =
          feats.data[perm[i] * cfg.input_dim() + c];
    }
  }
  Tape<double> t2;
  t2.record = false;
  auto out2 = t2.value(net.forward(t2, store, feats2, CloudGeometry::single(pts2)));
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t c = 0; c < 6; ++c) {
      CHECK(out2.data[i * 6 + c] == out.data[perm[i] * 6 + c]);  // bitwise
    }
  }
}

TEST_CASE("zero-initialized head produces uniform class posteriors") {
  auto cfg = toy_config();
  ParamStore<double> store;
  auto net = GaussianRadarTransformer<double>::build(cfg, store, 7);
  auto rng = make_rng(4);
  auto pts = test::random_points(16, rng);
  auto feats = random_features(16, cfg.input_dim(), rng);
  Tape<double> t;
  t.record = false;
  auto logits = net.forward(t, store, feats, CloudGeometry::single(pts));
  for (double v : t.value(logits).data) CHECK(v == 0.0);
}

TEST_CASE("predict breaks ties toward the smallest class id") {
  ValueGrid<double> logits({2, 6}, {0, 0, 0, 0, 0, 0, 1, 3, 3, 0, 0, 0});
  auto p = predict(logits);
  CHECK(p[0] == 0);
  CHECK(p[1] == 1);
}

TEST_CASE("predict matches a direct scan oracle on random logits") {
  auto rng = make_rng(8);
  std::uniform_real_distribution<double> u(-4, 4);
  auto logits = ValueGrid<double>::zeros({40, 6});
  for (auto& v : logits.data) v = u(rng);
  auto p = predict(logits);
  for (std::size_t i = 0; i < 40; ++i) {
    int best = 0;
    for (int j = 1; j < 6; ++j) {
      if (logits.data[i * 6 + (std::size_t)j] >
          logits.data[i * 6 + (std::size_t)best]) {
        best = j;
      }
    }
    CHECK(p[i] == best);
  }
}

TEST_CASE("one-hot scaled logits predict that class") {
  ValueGrid<double> logits({1, 6}, {0, 0, 0, 0, 7.5, 0});
  CHECK(predict(logits)[0] == 4);
}

TEST_CASE("multi-cloud batches concatenate per-cloud results") {
  auto cfg = toy_config();
  cfg.n_local = 6;
  cfg.sampler_k = 4;
  ParamStore<double> store;
  auto net = GaussianRadarTransformer<double>::build(cfg, store, 11);
  auto rng = make_rng(9);
  auto p1 = test::random_points(17, rng);
  auto p2 = test::random_points(19, rng);
  auto f1 = random_features(17, cfg.input_dim(), rng);
  auto f2 = random_features(19, cfg.input_dim(), rng);

  CloudGeometry batch;
  batch.coords = p1;
  batch.coords.insert(batch.coords.end(), p2.begin(), p2.end());
  batch.cloud_offsets = {0, 17, 36};
  auto fb = ValueGrid<double>::zeros({36, cfg.input_dim()});
  std::copy(f1.data.begin(), f1.data.end(), fb.data.begin());
  std::copy(f2.data.begin(), f2.data.end(),
            fb.data.begin() + static_cast<long>(f1.numel()));

  Tape<double> t;
  t.record = false;
  auto out = t.value(net.forward(t, store, fb, batch));

  Tape<double> ta;
  ta.record = false;
  auto oa = ta.value(net.forward(ta, store, f1, CloudGeometry::single(p1)));
  Tape<double> tb;
  tb.record = false;
  auto ob = tb.value(net.forward(tb, store, f2, CloudGeometry::single(p2)));

  for (std::size_t i = 0; i < oa.numel(); ++i) CHECK(out.data[i] == oa.data[i]);
  for (std::size_t i = 0; i < ob.numel(); ++i) {
    CHECK(out.data[oa.numel() + i] == ob.data[i]);
  }
}

TEST_CASE("end-to-end toy gradient check stays under 1e-4") {
  GRTConfig cfg;
  cfg.stage_dims = {4, 8, 8, 8, 8};
  cfg.n_local = 4;
  cfg.sampler_k = 3;
  ParamStore<double> store;
  auto net = GaussianRadarTransformer<double>::build(cfg, store, 21);
  auto rng = make_rng(10);
  auto pts = test::random_points(24, rng);
  auto geom = CloudGeometry::single(pts);
  auto feats = random_features(24, cfg.input_dim(), rng);
  auto proj = ValueGrid<double>::zeros({24, 6});
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : proj.data) v = u(rng);

  // reduced coordinate sampling here; the acceptance suite runs the full
  // sweep over seeds
  auto report = grad_check(
      store,
      [&](Tape<double>& t, ParamStore<double>& s) {
        return t.inner_with_const(net.forward(t, s, feats, geom), proj);
      },
      1e-4, 1e-5, 6);
  CHECK(report.pass);
  CHECK(report.max_err <= 1e-4);
}

TEST_CASE("model checkpoints restore config and parameters") {
  auto cfg = toy_config();
  cfg.attention = AttentionNorm::Softmax;
  cfg.features = FeatureMask{true, false};
  ParamStore<double> store;
  auto net = GaussianRadarTransformer<double>::build(cfg, store, 33);
  const std::string path = "model_roundtrip_test.bin";
  save_model(path, cfg, store, {{kMetaEpoch, "3"}});

  auto loaded = load_model<double>(path);
  CHECK(loaded.config == cfg);
  CHECK(loaded.metadata.at(kMetaEpoch) == "3");
  for (auto& [name, p] : store) {
    CHECK(loaded.store.value(name).data == p.value.data);
  }
  std::filesystem::remove(path);
}
