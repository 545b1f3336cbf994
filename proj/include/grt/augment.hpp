#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "grt/radar_data.hpp"
#include "grt/rng.hpp"

namespace grt {

struct AugmentConfig {
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  bool rotate = true;          // uniform [0, 2*pi) about the origin
  double jitter_sigma = 0.05;  // m, coordinates only
  double instance_prob = 0.5;  // per-scene chance of duplicating one instance

  static AugmentConfig off() { return {1.0, 1.0, false, 0.0, 0.0}; }

  void validate() const {
    if (scale_lo <= 0 || scale_lo > scale_hi || jitter_sigma < 0 ||
        instance_prob < 0 || instance_prob > 1) {
      throw std::invalid_argument("AugmentConfig: bad ranges");
    }
  }
};

// Scale, rotate about the origin, jitter coordinates, then possibly duplicate
// one moving instance at a collision-free spot. Doppler and RCS are never
// touched: the compensated radial velocity cannot be remapped without the
// sensor geometry, and reflectivity is pose-independent here.
inline RadarPointCloud augment(const RadarPointCloud& cloud,
                               const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  RadarPointCloud out = cloud;

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double s = cfg.scale_lo == cfg.scale_hi
                       ? cfg.scale_lo
                       : std::uniform_real_distribution<double>(
                             cfg.scale_lo, cfg.scale_hi)(rng);
  const double theta =
      cfg.rotate ? std::uniform_real_distribution<double>(
                       0.0, 2.0 * std::numbers::pi)(rng)
                 : 0.0;
  const double c = std::cos(theta), sn = std::sin(theta);
  std::normal_distribution<double> jitter(0.0, cfg.jitter_sigma);

  for (auto& d : out.detections) {
    double x = d.x * s, y = d.y * s;
    const double rx = c * x - sn * y;
    const double ry = sn * x + c * y;
    d.x = rx + (cfg.jitter_sigma > 0 ? jitter(rng) : 0.0);
    d.y = ry + (cfg.jitter_sigma > 0 ? jitter(rng) : 0.0);
  }

  if (cfg.instance_prob > 0 && u01(rng) < cfg.instance_prob) {
    // moving instances among the real points
    std::set<std::int64_t> tracks;
    for (std::size_t i = 0; i < out.real_count; ++i) {
      const auto& d = out.detections[i];
      if (d.label != kStatic && d.track_id != kNoTrack) tracks.insert(d.track_id);
    }
    if (!tracks.empty()) {
      std::vector<std::int64_t> ids(tracks.begin(), tracks.end());
      const std::int64_t chosen = ids[std::uniform_int_distribution<std::size_t>(
          0, ids.size() - 1)(rng)];

      std::vector<RadarDetection> copy;
      double cx = 0, cy = 0;
      for (std::size_t i = 0; i < out.real_count; ++i) {
        if (out.detections[i].track_id == chosen) {
          copy.push_back(out.detections[i]);
          cx += out.detections[i].x;
          cy += out.detections[i].y;
        }
      }
      cx /= static_cast<double>(copy.size());
      cy /= static_cast<double>(copy.size());

      double min_x = out.detections[0].x, max_x = min_x;
      double min_y = out.detections[0].y, max_y = min_y;
      for (const auto& d : out.detections) {
        min_x = std::min(min_x, d.x);
        max_x = std::max(max_x, d.x);
        min_y = std::min(min_y, d.y);
        max_y = std::max(max_y, d.y);
      }

      const double clearance = 0.3;  // m to any existing point
      for (int attempt = 0; attempt < 20; ++attempt) {
        const double phi = std::uniform_real_distribution<double>(
            0.0, 2.0 * std::numbers::pi)(rng);
        const double nx =
            std::uniform_real_distribution<double>(min_x, max_x)(rng);
        const double ny =
            std::uniform_real_distribution<double>(min_y, max_y)(rng);
        const double pc = std::cos(phi), ps = std::sin(phi);

        std::vector<RadarDetection> placed = copy;
        bool ok = true;
        for (auto& d : placed) {
          const double lx = d.x - cx, ly = d.y - cy;
          d.x = pc * lx - ps * ly + nx;
          d.y = ps * lx + pc * ly + ny;
          for (const auto& existing : out.detections) {
            const double dx = existing.x - d.x, dy = existing.y - d.y;
            if (dx * dx + dy * dy < clearance * clearance) {
              ok = false;
              break;
            }
          }
          if (!ok) break;
        }
        if (ok) {
          std::int64_t next_track = 0;
          for (const auto& d : out.detections) {
            next_track = std::max(next_track, d.track_id + 1);
          }
          for (auto& d : placed) {
            d.track_id = next_track;
            out.detections.push_back(d);
          }
          out.real_count = out.detections.size();
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace grt
