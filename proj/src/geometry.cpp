#include "grt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace grt {

CloudGeometry CloudGeometry::single(std::vector<Point2> pts) {
  CloudGeometry g;
  g.cloud_offsets = {0, pts.size()};
  g.coords = std::move(pts);
  return g;
}

std::size_t CloudGeometry::cloud_of(std::size_t i) const {
  auto it = std::upper_bound(cloud_offsets.begin(), cloud_offsets.end(), i);
  return static_cast<std::size_t>(it - cloud_offsets.begin()) - 1;
}

void CloudGeometry::validate() const {
  if (cloud_offsets.size() < 2 || cloud_offsets.front() != 0 ||
      cloud_offsets.back() != coords.size()) {
    throw std::invalid_argument("CloudGeometry: malformed cloud_offsets");
  }
  for (std::size_t c = 0; c + 1 < cloud_offsets.size(); ++c) {
    if (cloud_offsets[c + 1] <= cloud_offsets[c]) {
      throw std::invalid_argument("CloudGeometry: empty cloud in batch");
    }
  }
  for (const Point2& p : coords) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw std::invalid_argument("CloudGeometry: non-finite coordinate");
    }
  }
}

namespace {

// Candidate ordering shared by FPS argmax and kNN sorting. For "farthest"
// selection we want max distance with ties going to lexicographically
// smaller coordinates, then smaller index.
bool better_far(double d_a, const Point2& p_a, std::size_t i_a, double d_b,
                const Point2& p_b, std::size_t i_b) {
  if (d_a != d_b) return d_a > d_b;
  if (p_a.x != p_b.x || p_a.y != p_b.y) return lex_less(p_a, p_b);
  return i_a < i_b;
}

}  // namespace

std::vector<std::int32_t> farthest_point_sampling(
    const CloudGeometry& geom, std::span<const std::size_t> m_per_cloud) {
  geom.validate();
  if (m_per_cloud.size() != geom.num_clouds()) {
    throw std::invalid_argument("fps: one sample count per cloud required");
  }
  std::vector<std::int32_t> out;
  for (std::size_t c = 0; c < geom.num_clouds(); ++c) {
    const std::size_t begin = geom.cloud_begin(c);
    const std::size_t end = geom.cloud_end(c);
    const std::size_t n = end - begin;
    const std::size_t m = m_per_cloud[c];
    if (m < 1 || m > n) {
      throw std::invalid_argument("fps: sample count " + std::to_string(m) +
                                  " out of range for cloud of " +
                                  std::to_string(n) + " points");
    }

    Point2 centroid{0.0, 0.0};
    for (std::size_t i = begin; i < end; ++i) {
      centroid.x += geom.coords[i].x;
      centroid.y += geom.coords[i].y;
    }
    centroid.x /= static_cast<double>(n);
    centroid.y /= static_cast<double>(n);

    std::size_t seed = begin;
    double seed_d = -1.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = dist2(geom.coords[i], centroid);
      if (seed_d < 0.0 ||
          better_far(d, geom.coords[i], i, seed_d, geom.coords[seed], seed)) {
        seed = i;
        seed_d = d;
      }
    }

    std::vector<char> selected(n, 0);
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    std::size_t current = seed;
    out.push_back(static_cast<std::int32_t>(current));
    selected[current - begin] = 1;

    for (std::size_t t = 1; t < m; ++t) {
      std::size_t best = begin;
      double best_d = -1.0;
      bool have = false;
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t li = i - begin;
        const double d = dist2(geom.coords[i], geom.coords[current]);
        if (d < min_d[li]) min_d[li] = d;
        if (selected[li]) continue;
        if (!have || better_far(min_d[li], geom.coords[i], i, best_d,
                                geom.coords[best], best)) {
          best = i;
          best_d = min_d[li];
          have = true;
        }
      }
      current = best;
      out.push_back(static_cast<std::int32_t>(current));
      selected[current - begin] = 1;
    }
  }
  return out;
}

std::vector<std::int32_t> farthest_point_sampling(const CloudGeometry& geom,
                                                  std::size_t m) {
  std::vector<std::size_t> ms(geom.num_clouds(), m);
  return farthest_point_sampling(geom, ms);
}

NeighborTable knn(const CloudGeometry& queries, const CloudGeometry& references,
                  std::size_t k) {
  queries.validate();
  references.validate();
  if (queries.num_clouds() != references.num_clouds()) {
    throw std::invalid_argument("knn: query/reference cloud counts differ");
  }
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  for (std::size_t c = 0; c < references.num_clouds(); ++c) {
    if (references.cloud_size(c) < k) {
      throw std::invalid_argument(
          "knn: k=" + std::to_string(k) + " exceeds reference cloud of " +
          std::to_string(references.cloud_size(c)) + " points");
    }
  }

  NeighborTable table;
  table.k = k;
  table.indices.resize(queries.num_points() * k);

  struct Cand {
    double d;
    std::int32_t idx;
  };
  std::vector<Cand> cands;

  for (std::size_t c = 0; c < queries.num_clouds(); ++c) {
    const std::size_t rb = references.cloud_begin(c);
    const std::size_t re = references.cloud_end(c);
    for (std::size_t qi = queries.cloud_begin(c); qi < queries.cloud_end(c);
         ++qi) {
      const Point2& q = queries.coords[qi];
      cands.clear();
      cands.reserve(re - rb);
      for (std::size_t ri = rb; ri < re; ++ri) {
        cands.push_back({dist2(q, references.coords[ri]),
                         static_cast<std::int32_t>(ri)});
      }
      auto cmp = [&](const Cand& a, const Cand& b) {
        if (a.d != b.d) return a.d < b.d;
        const Point2& pa = references.coords[static_cast<std::size_t>(a.idx)];
        const Point2& pb = references.coords[static_cast<std::size_t>(b.idx)];
        if (pa.x != pb.x || pa.y != pb.y) return lex_less(pa, pb);
        return a.idx < b.idx;
      };
      std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(k),
                        cands.end(), cmp);
      for (std::size_t j = 0; j < k; ++j) {
        table.indices[qi * k + j] = cands[j].idx;
      }
    }
  }
  return table;
}

Displacement relative_positions(const CloudGeometry& queries,
                                const NeighborTable& neighbors,
                                const CloudGeometry& references) {
  if (neighbors.rows() != queries.num_points()) {
    throw std::invalid_argument("relative_positions: table row count mismatch");
  }
  Displacement d;
  d.k = neighbors.k;
  d.r.resize(queries.num_points() * neighbors.k * 2);
  for (std::size_t i = 0; i < queries.num_points(); ++i) {
    for (std::size_t j = 0; j < neighbors.k; ++j) {
      const auto nb = static_cast<std::size_t>(neighbors.at(i, j));
      if (nb >= references.num_points()) {
        throw std::invalid_argument("relative_positions: neighbor index range");
      }
      d.r[(i * neighbors.k + j) * 2] = queries.coords[i].x - references.coords[nb].x;
      d.r[(i * neighbors.k + j) * 2 + 1] =
          queries.coords[i].y - references.coords[nb].y;
    }
  }
  return d;
}

std::vector<std::int32_t> canonical_order(const CloudGeometry& geom) {
  std::vector<std::int32_t> order(geom.num_points());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<std::int32_t>(i);
  }
  for (std::size_t c = 0; c < geom.num_clouds(); ++c) {
    std::sort(order.begin() + static_cast<long>(geom.cloud_begin(c)),
              order.begin() + static_cast<long>(geom.cloud_end(c)),
              [&](std::int32_t a, std::int32_t b) {
                const Point2& pa = geom.coords[static_cast<std::size_t>(a)];
                const Point2& pb = geom.coords[static_cast<std::size_t>(b)];
                if (pa.x != pb.x || pa.y != pb.y) return lex_less(pa, pb);
                return a < b;
              });
  }
  return order;
}

CloudGeometry subset(const CloudGeometry& geom,
                     std::span<const std::int32_t> indices,
                     std::span<const std::size_t> counts_per_cloud) {
  CloudGeometry out;
  out.coords.reserve(indices.size());
  out.cloud_offsets.push_back(0);
  std::size_t pos = 0;
  for (std::size_t count : counts_per_cloud) {
    for (std::size_t j = 0; j < count; ++j, ++pos) {
      out.coords.push_back(geom.coords[static_cast<std::size_t>(indices[pos])]);
    }
    out.cloud_offsets.push_back(out.coords.size());
  }
  if (pos != indices.size()) {
    throw std::invalid_argument("subset: counts do not cover index list");
  }
  return out;
}

}  // namespace grt
