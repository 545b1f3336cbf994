#include "grt/radar_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "grt/errors.hpp"

namespace grt {

namespace {

constexpr char kScanHeader[] = "grt-scan\t1";
// widest raw label space the loader accepts (RadarScenes uses 0..11)
constexpr int kMaxRawLabel = 11;

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view field, const char* name, std::size_t line) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc{} || ptr != field.data() + field.size() ||
      !std::isfinite(out)) {
    throw DataError("scan parse error at line " + std::to_string(line) +
                    ": bad value for field " + name);
  }
  return out;
}

std::int64_t parse_int(std::string_view field, const char* name,
                       std::size_t line) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DataError("scan parse error at line " + std::to_string(line) +
                    ": bad value for field " + name);
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

CloudGeometry RadarPointCloud::geometry() const {
  std::vector<Point2> pts(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    pts[i] = {detections[i].x, detections[i].y};
  }
  return CloudGeometry::single(std::move(pts));
}

std::vector<int> RadarPointCloud::labels() const {
  std::vector<int> out(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    out[i] = detections[i].label;
  }
  return out;
}

void RadarPointCloud::validate(std::size_t num_classes) const {
  if (detections.empty()) {
    throw std::invalid_argument("RadarPointCloud: empty cloud");
  }
  if (real_count == 0 || real_count > detections.size()) {
    throw std::invalid_argument("RadarPointCloud: bad real_count");
  }
  for (const auto& d : detections) {
    if (!std::isfinite(d.x) || !std::isfinite(d.y) || !std::isfinite(d.v) ||
        !std::isfinite(d.sigma)) {
      throw std::invalid_argument("RadarPointCloud: non-finite detection");
    }
    if (d.label < 0 || static_cast<std::size_t>(d.label) >= num_classes) {
      throw std::invalid_argument("RadarPointCloud: label out of range");
    }
  }
}

std::string FeatureMask::str() const {
  std::string s = "x,y";
  if (doppler) s += ",v";
  if (rcs) s += ",sigma";
  return s;
}

FeatureMask FeatureMask::parse(const std::string& spec) {
  if (spec == "x,y") return {false, false};
  if (spec == "x,y,v") return {true, false};
  if (spec == "x,y,sigma") return {false, true};
  if (spec == "x,y,v,sigma") return {true, true};
  throw std::invalid_argument("FeatureMask: unknown feature set " + spec);
}

FeatureStats FeatureStats::identity(std::size_t dim) {
  FeatureStats s;
  s.mean.assign(dim, 0.0);
  s.stdev.assign(dim, 1.0);
  return s;
}

FeatureStats FeatureStats::estimate(const std::vector<RadarPointCloud>& clouds,
                                    const FeatureMask& mask) {
  const std::size_t dim = mask.dim();
  FeatureStats s;
  s.mean.assign(dim, 0.0);
  s.stdev.assign(dim, 0.0);
  std::size_t n = 0;
  auto id = FeatureStats::identity(dim);
  for (const auto& c : clouds) {
    auto rows = feature_rows(c, mask, id);
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) s.mean[j] += rows[i * dim + j];
    }
    n += c.size();
  }
  if (n == 0) throw std::invalid_argument("FeatureStats: no points");
  for (auto& m : s.mean) m /= static_cast<double>(n);
  for (const auto& c : clouds) {
    auto rows = feature_rows(c, mask, id);
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = rows[i * dim + j] - s.mean[j];
        s.stdev[j] += d * d;
      }
    }
  }
  for (auto& v : s.stdev) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v < 1e-9) v = 1.0;  // constant feature; leave it centered only
  }
  return s;
}

std::string FeatureStats::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (i) out += " ";
    out += format_double(mean[i]) + "/" + format_double(stdev[i]);
  }
  return out;
}

FeatureStats FeatureStats::deserialize(const std::string& text) {
  FeatureStats s;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    const auto slash = tok.find('/');
    if (slash == std::string::npos) {
      throw DataError("FeatureStats: malformed entry " + tok);
    }
    s.mean.push_back(parse_double(tok.substr(0, slash), "mean", 0));
    s.stdev.push_back(parse_double(tok.substr(slash + 1), "stdev", 0));
  }
  if (s.mean.empty()) throw DataError("FeatureStats: empty text");
  return s;
}

std::vector<double> feature_rows(const RadarPointCloud& cloud,
                                 const FeatureMask& mask,
                                 const FeatureStats& stats) {
  const std::size_t dim = mask.dim();
  if (stats.mean.size() != dim || stats.stdev.size() != dim) {
    throw std::invalid_argument("feature_rows: stats dimension mismatch");
  }
  std::vector<double> rows(cloud.size() * dim);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& d = cloud.detections[i];
    std::size_t j = 0;
    rows[i * dim + j++] = d.x;
    rows[i * dim + j++] = d.y;
    if (mask.doppler) rows[i * dim + j++] = d.v;
    if (mask.rcs) rows[i * dim + j++] = d.sigma;
    for (std::size_t c = 0; c < dim; ++c) {
      rows[i * dim + c] = (rows[i * dim + c] - stats.mean[c]) / stats.stdev[c];
    }
  }
  return rows;
}

void write_scan_file(const std::string& path,
                     const std::vector<RadarDetection>& records) {
  std::ofstream os(path, std::ios::binary);  // binary: stable newlines
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << kScanHeader << "\n";
  for (const auto& d : records) {
    os << format_double(d.x) << '\t' << format_double(d.y) << '\t'
       << format_double(d.v) << '\t' << format_double(d.sigma) << '\t'
       << d.label << '\t' << d.track_id << '\t' << d.sensor_id << '\t'
       << d.timestamp_us << "\n";
  }
  if (!os) throw DataError("write failed for " + path);
}

std::vector<RadarDetection> read_scan_records(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open scan file " + path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<RadarDetection> out;
  bool saw_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kScanHeader) {
        throw DataError("scan parse error at line " + std::to_string(line_no) +
                        ": missing grt-scan header");
      }
      saw_header = true;
      continue;
    }
    auto fields = split_tabs(line);
    if (fields.size() != 8) {
      throw DataError("scan parse error at line " + std::to_string(line_no) +
                      ": expected 8 fields, got " +
                      std::to_string(fields.size()));
    }
    RadarDetection d;
    d.x = parse_double(fields[0], "x_cc", line_no);
    d.y = parse_double(fields[1], "y_cc", line_no);
    d.v = parse_double(fields[2], "vr_compensated", line_no);
    d.sigma = parse_double(fields[3], "rcs", line_no);
    d.label = static_cast<int>(parse_int(fields[4], "label_id", line_no));
    if (d.label < 0 || d.label > kMaxRawLabel) {
      throw DataError("scan parse error at line " + std::to_string(line_no) +
                      ": field label_id out of range: " +
                      std::to_string(d.label));
    }
    d.track_id = parse_int(fields[5], "track_id", line_no);
    d.sensor_id = static_cast<int>(parse_int(fields[6], "sensor_id", line_no));
    if (d.sensor_id < 1 || d.sensor_id > 4) {
      throw DataError("scan parse error at line " + std::to_string(line_no) +
                      ": field sensor_id out of range");
    }
    d.timestamp_us = parse_int(fields[7], "timestamp", line_no);
    out.push_back(d);
  }
  // an empty file yields an empty list; a file with only a header too
  return out;
}

std::vector<SensorScan> load_scans(const std::string& path) {
  auto records = read_scan_records(path);
  std::vector<SensorScan> scans;
  for (const auto& d : records) {
    if (scans.empty() || scans.back().sensor_id != d.sensor_id ||
        scans.back().timestamp_us != d.timestamp_us) {
      scans.push_back(SensorScan{d.sensor_id, d.timestamp_us, {}});
    }
    scans.back().detections.push_back(d);
  }
  return scans;
}

RadarPointCloud load_scene_cloud(const std::string& path) {
  RadarPointCloud cloud;
  cloud.detections = read_scan_records(path);
  cloud.real_count = cloud.detections.size();
  if (cloud.detections.empty()) {
    throw DataError("scene file " + path + " holds no detections");
  }
  return cloud;
}

void write_scene_cloud(const std::string& path, const RadarPointCloud& cloud) {
  std::vector<RadarDetection> real(cloud.detections.begin(),
                                   cloud.detections.begin() +
                                       static_cast<long>(cloud.real_count));
  write_scan_file(path, real);
}

std::vector<SensorPose> load_pose_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open pose file " + path);
  std::vector<SensorPose> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    SensorPose p;
    if (!(ls >> p.sensor_id >> p.x >> p.y >> p.yaw)) {
      throw DataError("pose parse error at line " + std::to_string(line_no));
    }
    poses.push_back(p);
  }
  return poses;
}

void write_pose_file(const std::string& path,
                     const std::vector<SensorPose>& poses) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path + " for writing");
  for (const auto& p : poses) {
    os << p.sensor_id << ' ' << format_double(p.x) << ' ' << format_double(p.y)
       << ' ' << format_double(p.yaw) << "\n";
  }
}

RadarPointCloud merge_four_scans(const std::vector<SensorScan>& scans,
                                 const std::vector<SensorPose>& poses) {
  std::map<int, const SensorScan*> by_sensor;
  for (const auto& s : scans) {
    if (by_sensor.count(s.sensor_id)) {
      throw std::invalid_argument("merge: duplicate scan for sensor " +
                                  std::to_string(s.sensor_id));
    }
    by_sensor[s.sensor_id] = &s;
  }
  std::string missing;
  for (int id = 1; id <= 4; ++id) {
    if (!by_sensor.count(id)) missing += (missing.empty() ? "" : ", ") +
                                         std::to_string(id);
  }
  if (!missing.empty()) {
    throw std::invalid_argument("merge: missing scans for sensors " + missing);
  }
  std::map<int, SensorPose> pose_by_id;
  for (const auto& p : poses) pose_by_id[p.sensor_id] = p;

  RadarPointCloud out;
  for (int id = 1; id <= 4; ++id) {
    auto it = pose_by_id.find(id);
    if (it == pose_by_id.end()) {
      throw std::invalid_argument("merge: no pose for sensor " +
                                  std::to_string(id));
    }
    const SensorPose& pose = it->second;
    const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
    for (RadarDetection d : by_sensor[id]->detections) {
      const double x = d.x, y = d.y;
      d.x = c * x - s * y + pose.x;
      d.y = s * x + c * y + pose.y;
      out.detections.push_back(d);
    }
  }
  out.real_count = out.detections.size();
  return out;
}

RadarPointCloud merge_latest_scans(const std::vector<SensorScan>& scans,
                                   const std::vector<SensorPose>& poses) {
  std::map<int, SensorScan> latest;
  for (const auto& s : scans) {
    auto it = latest.find(s.sensor_id);
    if (it == latest.end() || s.timestamp_us > it->second.timestamp_us) {
      latest[s.sensor_id] = s;
    }
  }
  std::vector<SensorScan> picked;
  for (auto& [id, scan] : latest) picked.push_back(std::move(scan));
  return merge_four_scans(picked, poses);
}

int ClassMap::map(int raw_label) const {
  if (raw_label < 0 || static_cast<std::size_t>(raw_label) >= to_model.size() ||
      to_model[static_cast<std::size_t>(raw_label)] < 0) {
    throw std::invalid_argument("class map: unknown raw label " +
                                std::to_string(raw_label));
  }
  return to_model[static_cast<std::size_t>(raw_label)];
}

ClassMap default_class_map() {
  // raw ids: 0 car, 1 large vehicle, 2 truck, 3 bus, 4 train, 5 bicycle,
  // 6 motorized two-wheeler, 7 pedestrian, 8 pedestrian group, 9 animal,
  // 10 other, 11 static
  ClassMap m;
  m.to_model = {kCar,  kTruck, kTruck,      kTruck,           kTruck, kBike,
                kBike, kPedestrian, kPedestrianGroup, kStatic, kStatic, kStatic};
  return m;
}

ClassMap load_class_map(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open class map " + path);
  ClassMap m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int raw = 0, model = 0;
    if (!(ls >> raw >> model)) {
      throw DataError("class map parse error at line " + std::to_string(line_no));
    }
    if (raw < 0 || model < 0 || static_cast<std::size_t>(model) >= kNumClasses) {
      throw DataError("class map: bad ids at line " + std::to_string(line_no));
    }
    if (static_cast<std::size_t>(raw) >= m.to_model.size()) {
      m.to_model.resize(static_cast<std::size_t>(raw) + 1, -1);
    }
    m.to_model[static_cast<std::size_t>(raw)] = model;
  }
  if (m.to_model.empty()) throw DataError("class map " + path + " is empty");
  return m;
}

void map_labels(RadarPointCloud& cloud, const ClassMap& map) {
  for (auto& d : cloud.detections) d.label = map.map(d.label);
}

void write_manifest(const std::string& path, const std::string& config_echo,
                    const std::vector<std::string>& scene_files) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << "grt-manifest\t1\n";
  std::istringstream echo(config_echo);
  std::string line;
  while (std::getline(echo, line)) os << "#cfg " << line << "\n";
  for (const auto& f : scene_files) os << f << "\n";
  if (!os) throw DataError("write failed for " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open manifest " + path);
  std::string dir;
  const auto slash = path.find_last_of('/');
  if (slash != std::string::npos) dir = path.substr(0, slash + 1);

  DatasetManifest m;
  std::string line;
  bool saw_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != "grt-manifest\t1") {
        throw DataError("manifest " + path + ": missing header");
      }
      saw_header = true;
      continue;
    }
    if (line.rfind("#cfg ", 0) == 0) {
      m.config_echo += line.substr(5) + "\n";
      continue;
    }
    if (line[0] == '#') continue;
    m.scene_files.push_back(line.front() == '/' ? line : dir + line);
  }
  if (!saw_header) throw DataError("manifest " + path + ": empty file");
  return m;
}

std::vector<RadarPointCloud> load_dataset(const std::string& manifest_path) {
  auto manifest = load_manifest(manifest_path);
  std::vector<RadarPointCloud> scenes;
  scenes.reserve(manifest.scene_files.size());
  for (const auto& f : manifest.scene_files) {
    scenes.push_back(load_scene_cloud(f));
  }
  return scenes;
}

RadarPointCloud pad_to_min(RadarPointCloud cloud, std::size_t min_points) {
  if (cloud.detections.empty()) {
    throw std::invalid_argument("pad_to_min: empty cloud");
  }
  cloud.real_count = cloud.detections.size();
  std::size_t src = 0;
  while (cloud.detections.size() < min_points) {
    cloud.detections.push_back(cloud.detections[src]);
    src = (src + 1) % cloud.real_count;
  }
  return cloud;
}

}  // namespace grt
