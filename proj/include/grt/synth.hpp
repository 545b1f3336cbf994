#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "grt/radar_data.hpp"

namespace grt {

// Shape, population and signal ranges for one moving-object class of the
// synthetic scene generator.
struct ObjectClassSpec {
  std::size_t min_count = 0;
  std::size_t max_count = 0;
  double extent_x = 1.0;  // m, along heading
  double extent_y = 1.0;  // m, across heading
  std::size_t min_points = 1;
  std::size_t max_points = 4;
  double min_speed = 0.5;  // m/s
  double max_speed = 2.0;
  double rcs_lo = -10.0;  // dBsm
  double rcs_hi = 0.0;
};

struct SyntheticSceneConfig {
  double region_half = 20.0;  // scene spans [-region_half, region_half]^2
  std::size_t clutter_min = 24;
  std::size_t clutter_max = 40;
  double static_v_sigma = 0.15;
  double moving_v_sigma = 0.10;
  double static_rcs_lo = -18.0;
  double static_rcs_hi = 8.0;
  // compact static structures (parked vehicles, guard rails): object-like
  // geometry and reflectivity but no Doppler
  std::size_t cluster_min = 1;
  std::size_t cluster_max = 3;
  double cluster_extent_lo = 2.0;
  double cluster_extent_hi = 7.0;
  std::size_t cluster_points_min = 3;
  std::size_t cluster_points_max = 9;
  double cluster_rcs_lo = -6.0;
  double cluster_rcs_hi = 16.0;
  // indexed by SemanticClass - 1: car, pedestrian, pedestrian group, bike,
  // truck
  std::array<ObjectClassSpec, 5> classes{};

  void validate() const;

  // Mixed urban-style scenes: sparse objects over moderate clutter.
  static SyntheticSceneConfig benchmark_default();
  // Denser variant aimed at roughly the given point count per scene.
  static SyntheticSceneConfig dense(std::size_t approx_points);
};

// Deterministic per (config, seed); scene i draws from a stream keyed by
// (seed, i) so generation order and parallelism cannot change the output.
std::vector<RadarPointCloud> synth_generate(const SyntheticSceneConfig& cfg,
                                            std::size_t scene_count,
                                            std::uint64_t seed);

}  // namespace grt
