#include "ibmvs/cloud.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ibmvs/error.hpp"
#include "ibmvs/parallel.hpp"

namespace ibmvs {

namespace {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

std::optional<double> bilinear_depth(const ScalarMap& depth, const PixelCoord& q) {
  const int x0 = static_cast<int>(std::floor(q.x));
  const int y0 = static_cast<int>(std::floor(q.y));
  const int x1 = std::min(x0 + 1, depth.width() - 1);
  const int y1 = std::min(y0 + 1, depth.height() - 1);
  if (x0 < 0 || y0 < 0 || x0 >= depth.width() || y0 >= depth.height()) return std::nullopt;
  const double v00 = depth(x0, y0), v10 = depth(x1, y0), v01 = depth(x0, y1), v11 = depth(x1, y1);
  for (double v : {v00, v10, v01, v11})
    if (!std::isfinite(v) || !(v > 0.0)) return std::nullopt;
  const double fx = q.x - x0, fy = q.y - y0;
  return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

Color pixel_color(const Tensor& image, int x, int y) {
  Color c{0, 0, 0};
  if (image.channels() == 0) return c;
  for (int k = 0; k < 3; ++k) {
    const int ch = image.channels() >= 3 ? k : 0;
    const double v = std::clamp(static_cast<double>(image.at(ch, y, x)), 0.0, 1.0);
    c[k] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return c;
}

struct Candidate {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  int count = 0;  // consistent views
  std::vector<std::pair<int, std::pair<int, int>>> marks;
};

}  // namespace

void FusionParams::validate() const {
  if (min_views < 1) throw ConfigError("fusion: S_g must be >= 1");
  if (!(reproj_px > 0.0)) throw ConfigError("fusion: g must be > 0");
  if (!(depth_agreement > 0.0)) throw ConfigError("fusion: depth agreement must be > 0");
}

FusionParams fusion_preset(const std::string& name) {
  static const std::map<std::string, std::pair<int, double>> presets = {
      {"dtu", {3, 0.25}},
      {"eth3d_high", {1, 1.0}},
      {"eth3d_low", {3, 0.1}},
      {"tnt_intermediate", {4, 0.5}},
      {"tnt_advanced", {3, 0.5}},
  };
  const auto it = presets.find(name);
  if (it == presets.end()) throw ConfigError("unknown fusion preset '" + name + "'");
  FusionParams p;
  p.min_views = it->second.first;
  p.reproj_px = it->second.second;
  return p;
}

std::vector<std::string> fusion_preset_names() {
  return {"dtu", "eth3d_high", "eth3d_low", "tnt_intermediate", "tnt_advanced"};
}

std::optional<ConsistentMatch> consistency_check(const Camera& cam_a, const PixelCoord& p,
                                                 double d_a, const Camera& cam_b,
                                                 const ScalarMap& depth_b,
                                                 const FusionParams& params) {
  if (!std::isfinite(d_a) || !(d_a > 0.0)) return std::nullopt;
  const Eigen::Vector3d X = back_project(cam_a, p, d_a);
  const auto q = project_point(cam_b, X);
  if (!q || !cam_b.contains(*q)) return std::nullopt;
  const auto d_b = bilinear_depth(depth_b, *q);
  if (!d_b) return std::nullopt;
  const Eigen::Vector3d Xb = back_project(cam_b, *q, *d_b);
  const auto back = project_point(cam_a, Xb);
  if (!back) return std::nullopt;
  const double reproj = std::hypot(back->x - p.x, back->y - p.y);
  const double d_back = (cam_a.R * Xb + cam_a.t).z();
  const double rel = std::abs(d_back - d_a) / d_a;
  if (!(reproj <= params.reproj_px) || !(rel < params.depth_agreement)) return std::nullopt;
  return ConsistentMatch{*q, Xb, reproj, rel};
}

PointCloud fuse_cloud(std::span<const View> views, const FusionParams& params) {
  params.validate();
  const int n = static_cast<int>(views.size());
  for (const View& v : views) {
    if (!v.depth) throw ConfigError("fuse_cloud: every view needs a depth map");
    if (v.depth->width() != v.camera.width || v.depth->height() != v.camera.height)
      throw DimensionError("fuse_cloud: depth map does not match its camera");
  }
  PointCloud cloud;
  if (n < params.min_views + 1) return cloud;

  std::vector<MaskMap> used;
  for (const View& v : views) used.emplace_back(v.camera.width, v.camera.height, 0);

  for (int a = 0; a < n; ++a) {
    const View& va = views[a];
    const int w = va.camera.width, h = va.camera.height;
    std::vector<Candidate> cand(static_cast<std::size_t>(w) * h);
    // Candidates depend only on depths; consumption below is sequential.
    parallel_for(0, h, params.workers, [&](int y) {
      for (int x = 0; x < w; ++x) {
        Candidate& c = cand[static_cast<std::size_t>(y) * w + x];
        const double d = (*va.depth)(x, y);
        if (!std::isfinite(d) || !(d > 0.0)) continue;
        const PixelCoord p{double(x), double(y)};
        c.sum = back_project(va.camera, p, d);
        for (int b = 0; b < n; ++b) {
          if (b == a) continue;
          const auto m = consistency_check(va.camera, p, d, views[b].camera, *views[b].depth, params);
          if (!m) continue;
          c.sum += m->point_b;
          ++c.count;
          c.marks.push_back({b, {static_cast<int>(std::lround(m->q.x)), static_cast<int>(std::lround(m->q.y))}});
        }
      }
    });
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (used[a](x, y)) continue;
        const Candidate& c = cand[static_cast<std::size_t>(y) * w + x];
        if (c.count < params.min_views) continue;
        const Eigen::Vector3d mean = c.sum / static_cast<double>(c.count + 1);
        cloud.add(mean.cast<float>(), pixel_color(va.image, x, y));
        used[a](x, y) = 1;
        for (const auto& [b, q] : c.marks) used[b](q.first, q.second) = 1;
      }
    }
  }
  return cloud;
}

void write_ply(std::ostream& out, const PointCloud& cloud) {
  if (cloud.colors.size() != cloud.points.size())
    throw InvariantError("point cloud: colors and points differ in length");
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    char rec[15];
    std::memcpy(rec, cloud.points[i].data(), 12);
    std::memcpy(rec + 12, cloud.colors[i].data(), 3);
    out.write(rec, sizeof rec);
  }
  if (!out) throw FormatError("PLY write failed");
}

void write_ply(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_ply(out, cloud);
}

PointCloud read_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw FormatError("PLY: missing magic");
  long long count = -1;
  std::vector<std::string> props;
  bool format_ok = false;
  while (true) {
    if (!std::getline(in, line)) throw FormatError("PLY: header not terminated");
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "comment" || key == "obj_info" || key.empty()) continue;
    if (key == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt != "binary_little_endian" || ver != "1.0")
        throw FormatError("PLY: unsupported format '" + fmt + " " + ver + "'");
      format_ok = true;
    } else if (key == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex" || !ls || count < 0) throw FormatError("PLY: expected a single vertex element");
    } else if (key == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(type + " " + name);
    } else {
      throw FormatError("PLY: unexpected header line '" + line + "'");
    }
  }
  const std::vector<std::string> expected = {"float x",   "float y",     "float z",
                                             "uchar red", "uchar green", "uchar blue"};
  if (!format_ok || count < 0 || props != expected)
    throw FormatError("PLY: header must declare binary_little_endian xyz float + rgb uchar");
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(count));
  cloud.colors.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    char rec[15];
    if (!in.read(rec, sizeof rec)) throw FormatError("PLY: truncated vertex data");
    Eigen::Vector3f p;
    Color c;
    std::memcpy(p.data(), rec, 12);
    std::memcpy(c.data(), rec + 12, 3);
    if (!p.allFinite()) throw FormatError("PLY: non-finite vertex coordinate");
    cloud.add(p, c);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("PLY: trailing bytes after vertex data");
  return cloud;
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_ply(in);
}

}  // namespace ibmvs
