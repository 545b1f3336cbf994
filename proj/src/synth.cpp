#include "grt/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "grt/rng.hpp"

namespace grt {

void SyntheticSceneConfig::validate() const {
  if (region_half <= 0 || clutter_min > clutter_max ||
      static_rcs_lo > static_rcs_hi) {
    throw std::invalid_argument("synth config: degenerate ranges");
  }
  if (cluster_min > cluster_max || cluster_points_min > cluster_points_max ||
      cluster_points_min < 1 || cluster_extent_lo > cluster_extent_hi ||
      cluster_rcs_lo > cluster_rcs_hi) {
    throw std::invalid_argument("synth config: degenerate cluster ranges");
  }
  for (const auto& c : classes) {
    if (c.min_count > c.max_count || c.min_points > c.max_points ||
        c.min_points < 1 || c.min_speed > c.max_speed || c.rcs_lo > c.rcs_hi ||
        c.extent_x <= 0 || c.extent_y <= 0) {
      throw std::invalid_argument("synth config: degenerate class spec");
    }
  }
}

SyntheticSceneConfig SyntheticSceneConfig::benchmark_default() {
  SyntheticSceneConfig cfg;
  // overlapping reflectivity bands: RCS informs but does not identify
  // car
  cfg.classes[0] = {0, 2, 4.5, 1.8, 3, 8, 3.0, 14.0, -6.0, 12.0};
  // pedestrian: often a single reflection
  cfg.classes[1] = {0, 2, 0.5, 0.5, 1, 3, 0.6, 2.0, -17.0, -3.0};
  // pedestrian group
  cfg.classes[2] = {0, 1, 2.5, 2.5, 4, 10, 0.6, 2.0, -14.0, 0.0};
  // bike
  cfg.classes[3] = {0, 1, 1.8, 0.6, 2, 4, 2.0, 8.0, -12.0, 2.0};
  // truck
  cfg.classes[4] = {0, 1, 9.0, 2.6, 6, 14, 3.0, 12.0, 0.0, 18.0};
  return cfg;
}

SyntheticSceneConfig SyntheticSceneConfig::dense(std::size_t approx_points) {
  SyntheticSceneConfig cfg = benchmark_default();
  // objects contribute ~45 points on average at these counts
  const std::size_t object_budget = 48;
  const std::size_t clutter =
      approx_points > object_budget ? approx_points - object_budget : 8;
  cfg.clutter_min = clutter > 10 ? clutter - 10 : 1;
  cfg.clutter_max = clutter + 10;
  cfg.classes[0].min_count = 1;
  cfg.classes[0].max_count = 3;
  cfg.classes[1].min_count = 1;
  cfg.classes[1].max_count = 3;
  cfg.classes[2].max_count = 2;
  cfg.classes[3].max_count = 2;
  cfg.classes[4].max_count = 2;
  return cfg;
}

namespace {

std::size_t draw_count(Rng& rng, std::size_t lo, std::size_t hi) {
  if (lo == hi) return lo;
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double draw_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Radial velocity seen by a virtual sensor at the origin.
double line_of_sight_velocity(double px, double py, double vx, double vy) {
  const double norm = std::sqrt(px * px + py * py);
  if (norm < 1e-9) return 0.0;
  return (px * vx + py * vy) / norm;
}

}  // namespace

std::vector<RadarPointCloud> synth_generate(const SyntheticSceneConfig& cfg,
                                            std::size_t scene_count,
                                            std::uint64_t seed) {
  cfg.validate();
  std::vector<RadarPointCloud> scenes;
  scenes.reserve(scene_count);
  for (std::size_t scene = 0; scene < scene_count; ++scene) {
    auto rng = make_rng(seed, 0x5ce4e5ULL, scene);
    std::normal_distribution<double> static_noise(0.0, cfg.static_v_sigma);
    std::normal_distribution<double> moving_noise(0.0, cfg.moving_v_sigma);

    RadarPointCloud cloud;
    std::int64_t next_track = 0;

    const std::size_t clutter = draw_count(rng, cfg.clutter_min, cfg.clutter_max);
    for (std::size_t i = 0; i < clutter; ++i) {
      RadarDetection d;
      d.x = draw_real(rng, -cfg.region_half, cfg.region_half);
      d.y = draw_real(rng, -cfg.region_half, cfg.region_half);
      d.v = static_noise(rng);
      d.sigma = draw_real(rng, cfg.static_rcs_lo, cfg.static_rcs_hi);
      d.label = kStatic;
      d.sensor_id = 1 + static_cast<int>(i % 4);
      cloud.detections.push_back(d);
    }

    // object-shaped static structures; only the Doppler signature separates
    // them from movers
    const std::size_t clusters = draw_count(rng, cfg.cluster_min, cfg.cluster_max);
    for (std::size_t i = 0; i < clusters; ++i) {
      const double cx = draw_real(rng, -cfg.region_half * 0.85,
                                  cfg.region_half * 0.85);
      const double cy = draw_real(rng, -cfg.region_half * 0.85,
                                  cfg.region_half * 0.85);
      const double extent =
          draw_real(rng, cfg.cluster_extent_lo, cfg.cluster_extent_hi);
      const double heading = draw_real(rng, 0.0, 2.0 * std::numbers::pi);
      const std::size_t points =
          draw_count(rng, cfg.cluster_points_min, cfg.cluster_points_max);
      for (std::size_t p = 0; p < points; ++p) {
        const double ax = draw_real(rng, -extent / 2, extent / 2);
        const double ay = draw_real(rng, -extent / 8, extent / 8);
        RadarDetection d;
        d.x = cx + ax * std::cos(heading) - ay * std::sin(heading);
        d.y = cy + ax * std::sin(heading) + ay * std::cos(heading);
        d.v = static_noise(rng);
        d.sigma = draw_real(rng, cfg.cluster_rcs_lo, cfg.cluster_rcs_hi);
        d.label = kStatic;
        d.sensor_id = 1 + static_cast<int>(p % 4);
        cloud.detections.push_back(d);
      }
    }

    for (std::size_t cls = 0; cls < cfg.classes.size(); ++cls) {
      const auto& spec = cfg.classes[cls];
      const std::size_t count = draw_count(rng, spec.min_count, spec.max_count);
      for (std::size_t obj = 0; obj < count; ++obj) {
        const double margin = 0.85;
        const double cx = draw_real(rng, -cfg.region_half * margin,
                                    cfg.region_half * margin);
        const double cy = draw_real(rng, -cfg.region_half * margin,
                                    cfg.region_half * margin);
        const double heading = draw_real(rng, 0.0, 2.0 * std::numbers::pi);
        const double speed = draw_real(rng, spec.min_speed, spec.max_speed);
        const double vx = speed * std::cos(heading);
        const double vy = speed * std::sin(heading);
        const std::size_t points =
            draw_count(rng, spec.min_points, spec.max_points);
        const std::int64_t track = next_track++;
        for (std::size_t p = 0; p < points; ++p) {
          const double ax = draw_real(rng, -spec.extent_x / 2, spec.extent_x / 2);
          const double ay = draw_real(rng, -spec.extent_y / 2, spec.extent_y / 2);
          RadarDetection d;
          d.x = cx + ax * std::cos(heading) - ay * std::sin(heading);
          d.y = cy + ax * std::sin(heading) + ay * std::cos(heading);
          d.v = line_of_sight_velocity(d.x, d.y, vx, vy) + moving_noise(rng);
          d.sigma = draw_real(rng, spec.rcs_lo, spec.rcs_hi);
          d.label = static_cast<int>(cls) + 1;
          d.track_id = track;
          d.sensor_id = 1 + static_cast<int>(p % 4);
          cloud.detections.push_back(d);
        }
      }
    }
    cloud.real_count = cloud.detections.size();
    scenes.push_back(std::move(cloud));
  }
  return scenes;
}

}  // namespace grt
