#pragma once

#include <functional>
#include <string>
#include <vector>

#include "grt/attention.hpp"
#include "grt/backbone.hpp"
#include "grt/gradcheck.hpp"
#include "grt/losses.hpp"
#include "grt/sampling.hpp"

namespace grt {

struct SuiteEntry {
  std::string name;
  double max_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<std::string> offending;
};

struct SuiteReport {
  std::vector<SuiteEntry> entries;
  bool pass = true;
  double max_err = 0.0;

  void add(const std::string& name, const GradCheckReport& r) {
    entries.push_back({name, r.max_err, r.tolerance, r.pass, r.offending()});
    pass = pass && r.pass;
    max_err = std::max(max_err, r.max_err);
  }
};

namespace gradcheck_detail {

inline ValueGrid<double> rand_grid(std::vector<std::size_t> shape, Rng& rng,
                                   double scale = 1.0) {
  auto g = ValueGrid<double>::zeros(std::move(shape));
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& v : g.data) v = u(rng);
  return g;
}

inline std::vector<Point2> rand_points(std::size_t n, Rng& rng,
                                       double extent = 5.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return pts;
}

}  // namespace gradcheck_detail

// Finite-difference verification of every primitive and composite layer.
// scope: "primitives", "attention", "sampling", "losses", "backbone" or
// "all". With inject_fault, one deliberately wrong adjoint is added, which
// must turn the report red.
inline SuiteReport run_gradcheck_suite(const std::string& scope,
                                       std::size_t seeds, double tolerance,
                                       bool inject_fault = false,
                                       std::size_t max_coords = 64) {
  using gradcheck_detail::rand_grid;
  using gradcheck_detail::rand_points;
  SuiteReport suite;
  const bool all = scope == "all";

  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const std::string tag = " (seed " + std::to_string(seed) + ")";

    if (all || scope == "primitives") {
      {
        auto rng = make_rng(seed, 1);
        ParamStore<double> s;
        s.create("x", {5, 3}) = rand_grid({5, 3}, rng);
        s.create("w", {3, 4}) = rand_grid({3, 4}, rng);
        s.create("b", {4}) = rand_grid({4}, rng);
        auto proj = rand_grid({5, 4}, rng);
        suite.add("fully_connected" + tag,
                  grad_check(s,
                             [&](Tape<double>& t, ParamStore<double>& ps) {
                               return t.inner_with_const(
                                   t.fully_connected(t.param(ps, "x"),
                                                     t.param(ps, "w"),
                                                     t.param(ps, "b")),
                                   proj);
                             },
                             tolerance, 1e-5, max_coords, seed));
      }
      {
        auto rng = make_rng(seed, 2);
        ParamStore<double> s;
        s.create("x", {4, 6}) = rand_grid({4, 6}, rng, 2.0);
        s.create("scale", {6}) = rand_grid({6}, rng);
        s.create("shift", {6}) = rand_grid({6}, rng);
        auto proj = rand_grid({4, 6}, rng);
        suite.add("layer_norm" + tag,
                  grad_check(s,
                             [&](Tape<double>& t, ParamStore<double>& ps) {
                               return t.inner_with_const(
                                   t.layer_norm(t.param(ps, "x"),
                                                t.param(ps, "scale"),
                                                t.param(ps, "shift"), 1e-5),
                                   proj);
                             },
                             tolerance, 1e-5, max_coords, seed));
      }
      {
        auto rng = make_rng(seed, 3);
        ParamStore<double> s;
        s.create("x", {40}) = rand_grid({40}, rng, 3.0);
        auto proj = rand_grid({40}, rng);
        suite.add("gelu" + tag,
                  grad_check(s,
                             [&](Tape<double>& t, ParamStore<double>& ps) {
                               return t.inner_with_const(
                                   t.gelu(t.param(ps, "x")), proj);
                             },
                             tolerance, 1e-5, max_coords, seed));
        suite.add("gaussian_activation" + tag,
                  grad_check(s,
                             [&](Tape<double>& t, ParamStore<double>& ps) {
                               return t.inner_with_const(
                                   t.gaussian(t.param(ps, "x")), proj);
                             },
                             tolerance, 1e-5, max_coords, seed));
      }
      {
        auto rng = make_rng(seed, 4);
        ParamStore<double> s;
        s.create("x", {5, 7}) = rand_grid({5, 7}, rng, 2.0);
        auto proj = rand_grid({5, 7}, rng);
        suite.add("softmax" + tag,
                  grad_check(s,
                             [&](Tape<double>& t, ParamStore<double>& ps) {
                               return t.inner_with_const(
                                   t.softmax_last(t.param(ps, "x")), proj);
                             },
                             tolerance, 1e-5, max_coords, seed));
      }
    }

    if (all || scope == "attention") {
      for (auto norm : {AttentionNorm::Gaussian, AttentionNorm::Softmax}) {
        auto rng = make_rng(seed, 5);
        ParamStore<double> s;
        GTLConfig cfg{8, 4, norm, 8};
        auto gtl = GtlLayer<double>::create(s, "gtl", cfg, rng);
        auto pts = rand_points(10, rng);
        auto geom = CloudGeometry::single(pts);
        auto nbr = knn_self(geom, 4);
        auto feats = rand_grid({10, 8}, rng);
        auto proj = rand_grid({10, 8}, rng);
        const std::string name =
            norm == AttentionNorm::Gaussian ? "gtl_gaussian" : "gtl_softmax";
        suite.add(name + tag,
                  grad_check(s,
                             [&](Tape<double>& t, ParamStore<double>& ps) {
                               return t.inner_with_const(
                                   gtl.forward(t, ps, t.constant(feats), geom,
                                               nbr),
                                   proj);
                             },
                             tolerance, 1e-5, max_coords, seed));
      }
      {
        auto rng = make_rng(seed, 6);
        ParamStore<double> s;
        GTLConfig cfg{8, 4, AttentionNorm::Gaussian, 8};
        auto gtb = GtbBlock<double>::create(s, "gtb", cfg, rng);
        init_fan_in_uniform(s.value("gtb.fc_out.w"), 8, rng);
        auto pts = rand_points(12, rng);
        auto geom = CloudGeometry::single(pts);
        auto nbr = knn_self(geom, 4);
        auto feats = rand_grid({12, 8}, rng);
        auto proj = rand_grid({12, 8}, rng);
        suite.add("gtb" + tag,
                  grad_check(s,
                             [&](Tape<double>& t, ParamStore<double>& ps) {
                               return t.inner_with_const(
                                   gtb.forward(t, ps, t.constant(feats), geom,
                                               nbr),
                                   proj);
                             },
                             tolerance, 1e-5, max_coords, seed));
      }
    }

    if (all || scope == "sampling") {
      {
        auto rng = make_rng(seed, 7);
        ParamStore<double> s;
        auto ads = AdsLayer<double>::create(s, "ads", 5, 6, rng);
        auto pts = rand_points(12, rng);
        auto geom = CloudGeometry::single(pts);
        auto feats = rand_grid({12, 5}, rng);
        auto proj = rand_grid({6, 6}, rng);
        suite.add("attentive_downsample" + tag,
                  grad_check(s,
                             [&](Tape<double>& t, ParamStore<double>& ps) {
                               auto got =
                                   ads.forward(t, ps, t.constant(feats), geom, 4);
                               return t.inner_with_const(got.features, proj);
                             },
                             tolerance, 1e-5, max_coords, seed));
      }
      {
        auto rng = make_rng(seed, 8);
        ParamStore<double> s;
        auto aus = AusLayer<double>::create(s, "aus", 4, 6, 4, rng);
        auto skip_geom = CloudGeometry::single(rand_points(10, rng));
        auto coarse_geom = CloudGeometry::single(rand_points(5, rng));
        auto sf = rand_grid({10, 4}, rng);
        auto cf = rand_grid({5, 6}, rng);
        auto proj = rand_grid({10, 4}, rng);
        suite.add("attentive_upsample" + tag,
                  grad_check(s,
                             [&](Tape<double>& t, ParamStore<double>& ps) {
                               auto out = aus.forward(
                                   t, ps, t.constant(sf), skip_geom,
                                   t.constant(cf), coarse_geom, 3);
                               return t.inner_with_const(out, proj);
                             },
                             tolerance, 1e-5, max_coords, seed));
      }
    }

    if (all || scope == "losses") {
      {
        auto rng = make_rng(seed, 9);
        ParamStore<double> s;
        s.create("logits", {9, 6}) = rand_grid({9, 6}, rng, 1.5);
        std::vector<int> labels;
        std::uniform_int_distribution<int> lab(0, 5);
        for (int i = 0; i < 9; ++i) labels.push_back(lab(rng));
        suite.add(
            "weighted_cross_entropy" + tag,
            grad_check(s,
                       [&](Tape<double>& t, ParamStore<double>& ps) {
                         LossConfig cfg = LossConfig::radar_default(6);
                         cfg.lovasz_enabled = false;
                         return total_loss(t, t.param(ps, "logits"), labels, cfg);
                       },
                       tolerance, 1e-5, max_coords, seed));
        suite.add(
            "lovasz_softmax" + tag,
            grad_check(s,
                       [&](Tape<double>& t, ParamStore<double>& ps) {
                         auto probs = t.softmax_last(t.param(ps, "logits"));
                         return lovasz_softmax(t, probs, labels);
                       },
                       tolerance, 1e-5, max_coords, seed));
        suite.add(
            "total_loss" + tag,
            grad_check(s,
                       [&](Tape<double>& t, ParamStore<double>& ps) {
                         return total_loss(t, t.param(ps, "logits"), labels,
                                           LossConfig::radar_default(6));
                       },
                       tolerance, 1e-5, max_coords, seed));
      }
    }

    if (all || scope == "backbone") {
      auto rng = make_rng(seed, 10);
      GRTConfig cfg;
      cfg.stage_dims = {4, 8, 8, 8, 8};
      cfg.n_local = 4;
      cfg.sampler_k = 3;
      ParamStore<double> s;
      auto net = GaussianRadarTransformer<double>::build(cfg, s, seed);
      auto pts = rand_points(24, rng);
      auto geom = CloudGeometry::single(pts);
      auto feats = rand_grid({24, cfg.input_dim()}, rng);
      std::vector<int> labels;
      std::uniform_int_distribution<int> lab(0, 5);
      for (int i = 0; i < 24; ++i) labels.push_back(lab(rng));
      // composite check over ~46 tensors; per-layer sweeps above carry the
      // full coordinate budget
      suite.add(
          "backbone_end_to_end" + tag,
          grad_check(s,
                     [&](Tape<double>& t, ParamStore<double>& ps) {
                       auto logits = net.forward(t, ps, feats, geom);
                       return total_loss(t, logits, labels,
                                         LossConfig::radar_default(6));
                     },
                     tolerance, 1e-5, 16, seed));
    }
  }

  if (inject_fault) {
    auto rng = make_rng(999);
    ParamStore<double> s;
    s.create("p", {6}) = gradcheck_detail::rand_grid({6}, rng);
    suite.add("injected_fault",
              grad_check(s,
                         [&](Tape<double>& t, ParamStore<double>& ps) {
                           auto p = t.param(ps, "p");
                           double sum = 0;
                           for (double v : t.value(p).data) sum += v;
                           return t.custom(
                               ValueGrid<double>::scalar(sum), {p},
                               [p](Tape<double>& tt, Tape<double>::Ref self) {
                                 const double g = tt.grad_buf(self).data[0];
                                 auto& d = tt.grad_buf(p);
                                 for (auto& v : d.data) v -= g;  // wrong sign
                               });
                         },
                         tolerance, 1e-5, max_coords, 999));
  }
  return suite;
}

inline std::string format_suite_report(const SuiteReport& suite) {
  std::string out;
  char buf[256];
  for (const auto& e : suite.entries) {
    std::snprintf(buf, sizeof(buf), "%-44s max_err %.3e  tol %.1e  %s\n",
                  e.name.c_str(), e.max_err, e.tolerance,
                  e.pass ? "pass" : "FAIL");
    out += buf;
    for (const auto& p : e.offending) {
      out += "    offending: " + p + "\n";
    }
  }
  std::snprintf(buf, sizeof(buf), "overall max_err %.3e  %s\n", suite.max_err,
                suite.pass ? "PASS" : "FAIL");
  out += buf;
  return out;
}

}  // namespace grt
