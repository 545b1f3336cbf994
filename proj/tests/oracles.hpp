// Independent reference implementations used only by tests. These evaluate
// the same contracts as the library through a different route (full sorts,
// per-step recomputation, direct loop nests) so they stay meaningful as
// oracles.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "grt/geometry.hpp"
#include "grt/rng.hpp"

namespace grt::test {

// FPS reference: recomputes the minimum distance to the selected set from
// scratch at every step (O(N^2 m)), same seed and tie rules as the contract.
inline std::vector<std::int32_t> fps_oracle(const std::vector<Point2>& pts,
                                            std::size_t m) {
  const std::size_t n = pts.size();
  auto better = [&](double da, std::size_t ia, double db, std::size_t ib) {
    if (da != db) return da > db;
    const Point2 &a = pts[ia], &b = pts[ib];
    if (a.x != b.x || a.y != b.y) return lex_less(a, b);
    return ia < ib;
  };

  Point2 centroid{0, 0};
  for (const auto& p : pts) {
    centroid.x += p.x;
    centroid.y += p.y;
  }
  centroid.x /= static_cast<double>(n);
  centroid.y /= static_cast<double>(n);

  std::vector<std::int32_t> sel;
  std::vector<char> used(n, 0);
  std::size_t seed = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (better(dist2(pts[i], centroid), i, dist2(pts[seed], centroid), seed)) {
      seed = i;
    }
  }
  sel.push_back(static_cast<std::int32_t>(seed));
  used[seed] = 1;

  while (sel.size() < m) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::int32_t s : sel) {
        d = std::min(d, dist2(pts[i], pts[static_cast<std::size_t>(s)]));
      }
      if (best == n || better(d, i, best_d, best)) {
        best = i;
        best_d = d;
      }
    }
    sel.push_back(static_cast<std::int32_t>(best));
    used[best] = 1;
  }
  return sel;
}

// kNN reference: full sort of every reference point per query.
inline std::vector<std::int32_t> knn_oracle(const std::vector<Point2>& queries,
                                            const std::vector<Point2>& refs,
                                            std::size_t k) {
  std::vector<std::int32_t> out;
  for (const Point2& q : queries) {
    std::vector<std::size_t> order(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = dist2(q, refs[a]), db = dist2(q, refs[b]);
      if (da != db) return da < db;
      if (refs[a].x != refs[b].x || refs[a].y != refs[b].y) {
        return lex_less(refs[a], refs[b]);
      }
      return a < b;
    });
    for (std::size_t j = 0; j < k; ++j) {
      out.push_back(static_cast<std::int32_t>(order[j]));
    }
  }
  return out;
}

inline std::vector<Point2> random_points(std::size_t n, Rng& rng,
                                         double extent = 10.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return pts;
}

}  // namespace grt::test
