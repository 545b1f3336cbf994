#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "grt/geometry.hpp"
#include "grt/value_grid.hpp"

namespace grt {

inline constexpr std::size_t kNumClasses = 6;
inline constexpr int kNoTrack = -1;

// Class ids of the model space.
enum SemanticClass : int {
  kStatic = 0,
  kCar = 1,
  kPedestrian = 2,
  kPedestrianGroup = 3,
  kBike = 4,
  kTruck = 5,
};

// One radar reflection: position in the common frame, ego-motion compensated
// Doppler velocity, radar cross section, semantic label and optional
// instance track.
struct RadarDetection {
  double x = 0.0;          // m
  double y = 0.0;          // m
  double v = 0.0;          // m/s
  double sigma = 0.0;      // dBsm
  int label = kStatic;
  std::int64_t track_id = kNoTrack;
  int sensor_id = 1;       // 1..4
  std::int64_t timestamp_us = 0;
};

// A labeled cloud; detections past real_count are padding duplicates added
// to satisfy the backbone's minimum size and are excluded from metrics.
struct RadarPointCloud {
  std::vector<RadarDetection> detections;
  std::size_t real_count = 0;

  std::size_t size() const { return detections.size(); }
  bool is_padding(std::size_t i) const { return i >= real_count; }

  CloudGeometry geometry() const;
  std::vector<int> labels() const;
  void validate(std::size_t num_classes = kNumClasses) const;
};

// Which of the non-coordinate inputs feed the network; (x, y) are always on.
struct FeatureMask {
  bool doppler = true;
  bool rcs = true;

  bool operator==(const FeatureMask&) const = default;

  std::size_t dim() const {
    return 2 + (doppler ? 1 : 0) + (rcs ? 1 : 0);
  }
  std::string str() const;
  static FeatureMask parse(const std::string& spec);
};

// Per-feature affine standardization, estimated once on the training set and
// stored with the checkpoint.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stdev;

  static FeatureStats identity(std::size_t dim);
  static FeatureStats estimate(const std::vector<RadarPointCloud>& clouds,
                               const FeatureMask& mask);
  std::string serialize() const;
  static FeatureStats deserialize(const std::string& text);
};

// Row-major [N x mask.dim()] standardized feature rows.
std::vector<double> feature_rows(const RadarPointCloud& cloud,
                                 const FeatureMask& mask,
                                 const FeatureStats& stats);

template <typename T>
ValueGrid<T> feature_grid(const RadarPointCloud& cloud, const FeatureMask& mask,
                          const FeatureStats& stats) {
  auto rows = feature_rows(cloud, mask, stats);
  ValueGrid<T> g = ValueGrid<T>::zeros({cloud.size(), mask.dim()});
  for (std::size_t i = 0; i < rows.size(); ++i) g.data[i] = static_cast<T>(rows[i]);
  return g;
}

// Rigid 2D transform of a sensor into the common frame.
struct SensorPose {
  int sensor_id = 0;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // rad
};

struct SensorScan {
  int sensor_id = 0;
  std::int64_t timestamp_us = 0;
  std::vector<RadarDetection> detections;
};

// --------------------------------------------------------------- file I/O
//
// Scan file: UTF-8 text, header "grt-scan<TAB>1", then one record per line,
// tab-separated: x_cc y_cc vr_compensated rcs label_id track_id sensor_id
// timestamp. Floats use shortest round-trip formatting.

void write_scan_file(const std::string& path,
                     const std::vector<RadarDetection>& records);
std::vector<RadarDetection> read_scan_records(const std::string& path);

// Groups consecutive records of equal (sensor_id, timestamp) into scans,
// preserving order.
std::vector<SensorScan> load_scans(const std::string& path);

// Whole file as one labeled cloud.
RadarPointCloud load_scene_cloud(const std::string& path);
void write_scene_cloud(const std::string& path, const RadarPointCloud& cloud);

// Pose file: one line per sensor: id x y yaw.
std::vector<SensorPose> load_pose_file(const std::string& path);
void write_pose_file(const std::string& path,
                     const std::vector<SensorPose>& poses);

// ----------------------------------------------------------------- merging

// Applies each sensor's rigid transform to its detections and concatenates
// into one cloud; labels, Doppler and RCS pass through untouched. Exactly one
// scan per sensor id 1..4 is required.
RadarPointCloud merge_four_scans(const std::vector<SensorScan>& scans,
                                 const std::vector<SensorPose>& poses);

// Latest scan per sensor within the file, then merge.
RadarPointCloud merge_latest_scans(const std::vector<SensorScan>& scans,
                                   const std::vector<SensorPose>& poses);

// ------------------------------------------------------------- class labels

// raw dataset label id -> model class id; editable copy ships under assets/.
struct ClassMap {
  std::vector<int> to_model;  // indexed by raw id

  int map(int raw_label) const;
};

ClassMap default_class_map();
ClassMap load_class_map(const std::string& path);

void map_labels(RadarPointCloud& cloud, const ClassMap& map);

// ----------------------------------------------------------------- datasets

// Manifest: "grt-manifest<TAB>1" header, "#cfg "-prefixed config echo lines,
// then one scene file per line (relative to the manifest's directory).
struct DatasetManifest {
  std::string config_echo;
  std::vector<std::string> scene_files;  // resolved paths
};

void write_manifest(const std::string& path, const std::string& config_echo,
                    const std::vector<std::string>& scene_files);
DatasetManifest load_manifest(const std::string& path);
std::vector<RadarPointCloud> load_dataset(const std::string& manifest_path);

// ------------------------------------------------------------------ padding

// Duplicates points round-robin until the cloud has at least min_points;
// duplicates are flagged via real_count.
RadarPointCloud pad_to_min(RadarPointCloud cloud, std::size_t min_points);

}  // namespace grt
