#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace grt {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline bool lex_less(const Point2& a, const Point2& b) {
  return a.x < b.x || (a.x == b.x && a.y < b.y);
}

inline double dist2(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// A batch of concatenated point clouds. cloud_offsets has one entry per cloud
// boundary, starting at 0 and ending at coords.size(); cloud c spans
// [cloud_offsets[c], cloud_offsets[c+1]).
struct CloudGeometry {
  std::vector<Point2> coords;
  std::vector<std::size_t> cloud_offsets;

  static CloudGeometry single(std::vector<Point2> pts);

  std::size_t num_points() const { return coords.size(); }
  std::size_t num_clouds() const {
    return cloud_offsets.empty() ? 0 : cloud_offsets.size() - 1;
  }
  std::size_t cloud_begin(std::size_t c) const { return cloud_offsets[c]; }
  std::size_t cloud_end(std::size_t c) const { return cloud_offsets[c + 1]; }
  std::size_t cloud_size(std::size_t c) const {
    return cloud_end(c) - cloud_begin(c);
  }
  // Cloud that point index i belongs to.
  std::size_t cloud_of(std::size_t i) const;

  // Throws std::invalid_argument on malformed offsets or non-finite coords.
  void validate() const;
};

// Per-query neighbor index lists; indices are global into the reference
// batch, each row sorted by (distance, lexicographic (x, y), index).
struct NeighborTable {
  std::vector<std::int32_t> indices;  // rows() * k
  std::size_t k = 0;

  std::size_t rows() const { return k == 0 ? 0 : indices.size() / k; }
  std::int32_t at(std::size_t row, std::size_t j) const {
    return indices[row * k + j];
  }
};

// Row-wise coordinate differences p_query(i) - p_neighbor(i, j), meters.
struct Displacement {
  std::vector<double> r;  // rows() * k * 2
  std::size_t k = 0;

  std::size_t rows() const { return k == 0 ? 0 : r.size() / (2 * k); }
  double dx(std::size_t i, std::size_t j) const { return r[(i * k + j) * 2]; }
  double dy(std::size_t i, std::size_t j) const {
    return r[(i * k + j) * 2 + 1];
  }
};

// Greedy farthest point sampling, m indices per cloud, concatenated in cloud
// order. The seed is the point farthest from the cloud centroid; every later
// pick maximizes the minimum distance to the already selected set. Ties break
// on lexicographic (x, y), then raw index, which makes the selected
// coordinate sequence invariant under input permutation.
std::vector<std::int32_t> farthest_point_sampling(
    const CloudGeometry& geom, std::span<const std::size_t> m_per_cloud);
std::vector<std::int32_t> farthest_point_sampling(const CloudGeometry& geom,
                                                  std::size_t m);

// Exact k nearest neighbors of each query within the same cloud of the
// reference batch. queries and references must have the same cloud count;
// throws std::invalid_argument if any reference cloud has fewer than k points
// (no clamping here; callers clamp where their contract allows it).
NeighborTable knn(const CloudGeometry& queries, const CloudGeometry& references,
                  std::size_t k);
inline NeighborTable knn_self(const CloudGeometry& geom, std::size_t k) {
  return knn(geom, geom, k);
}

Displacement relative_positions(const CloudGeometry& queries,
                                const NeighborTable& neighbors,
                                const CloudGeometry& references);

// New geometry holding the given global indices, split into clouds by
// counts_per_cloud (used for FPS-selected centers).
CloudGeometry subset(const CloudGeometry& geom,
                     std::span<const std::int32_t> indices,
                     std::span<const std::size_t> counts_per_cloud);

// Global point indices ordered by (x, y, index) within each cloud. Cloud-wide
// reductions that iterate in this order give results independent of the
// input point order (for distinct coordinates).
std::vector<std::int32_t> canonical_order(const CloudGeometry& geom);

}  // namespace grt
