#include "ibmvs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "ibmvs/error.hpp"

namespace ibmvs {

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("camera: non-positive image size");
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0)
    throw ConfigError("camera: intrinsics are not upper-triangular");
  if (!(K(0, 0) > 0.0) || !(K(1, 1) > 0.0)) throw ConfigError("camera: non-positive focal length");
  if (K(2, 2) != 1.0) throw ConfigError("camera: K(2,2) must be 1");
  const double err = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= 1e-9)) throw ConfigError("camera: rotation is not orthonormal");
  if (!t.allFinite()) throw ConfigError("camera: non-finite translation");
}

Camera resize_camera(const Camera& cam, int width, int height) {
  const double sx = static_cast<double>(width) / cam.width;
  const double sy = static_cast<double>(height) / cam.height;
  Eigen::Matrix3d S;
  S << sx, 0.0, 0.5 * sx - 0.5, 0.0, sy, 0.5 * sy - 0.5, 0.0, 0.0, 1.0;
  Camera out = cam;
  out.K = S * cam.K;
  out.width = width;
  out.height = height;
  return out;
}

Camera look_at_camera(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                      const Eigen::Vector3d& down, double focal, int width, int height) {
  const Eigen::Vector3d z = (target - center).normalized();
  Eigen::Vector3d y = down - down.dot(z) * z;
  if (y.norm() < 1e-12) throw ConfigError("look_at: down vector parallel to viewing direction");
  y.normalize();
  const Eigen::Vector3d x = y.cross(z);
  Camera cam;
  cam.R.row(0) = x.transpose();
  cam.R.row(1) = y.transpose();
  cam.R.row(2) = z.transpose();
  cam.t = -cam.R * center;
  cam.K << focal, 0.0, 0.5 * (width - 1), 0.0, focal, 0.5 * (height - 1), 0.0, 0.0, 1.0;
  cam.width = width;
  cam.height = height;
  return cam;
}

double InverseDepthInterval::clamp(double H) const { return std::clamp(H, lower(), upper()); }

InverseDepthInterval make_interval(double d_min, double d_max) {
  if (!std::isfinite(d_min) || !std::isfinite(d_max) || !(d_min > 0.0) || !(d_max > 0.0))
    throw InvalidRangeError("depth range bounds must be positive and finite");
  if (d_min > d_max) throw InvalidRangeError("depth range requires d_min <= d_max");
  InverseDepthInterval iv;
  iv.d_min = d_min;
  iv.d_max = d_max;
  const double inv_near = 1.0 / d_min;
  const double inv_far = 1.0 / d_max;
  iv.R = (inv_far - inv_near) / 2.0;
  iv.midpoint = (inv_far + inv_near) / 2.0;
  // Endpoints are stored as evaluated from midpoint and R so that
  // midpoint -+ R reproduces them bit for bit. They differ from 1/d by at
  // most an ulp of the midpoint.
  iv.D_min = iv.midpoint - iv.R;
  iv.D_max = iv.midpoint + iv.R;
  return iv;
}

PairGeometry::PairGeometry(const Camera& ref, const Camera& src) {
  const Eigen::Matrix3d R_rel = src.R * ref.R.transpose();
  const Eigen::Vector3d t_rel = src.t - R_rel * ref.t;
  A_ = src.K * R_rel * ref.K.inverse();
  b_ = src.K * t_rel;
}

std::optional<PixelCoord> PairGeometry::project(const PixelCoord& p, double H) const {
  const Eigen::Vector3d h = A_ * Eigen::Vector3d(p.x, p.y, 1.0) + H * b_;
  if (!(h.z() > 0.0)) return std::nullopt;
  const PixelCoord q{h.x() / h.z(), h.y() / h.z()};
  if (!std::isfinite(q.x) || !std::isfinite(q.y)) return std::nullopt;
  return q;
}

double PairGeometry::source_depth(const PixelCoord& p, double H) const {
  // Row 2 of K_src is (0, 0, 1), so the homogeneous z scaled by depth 1/H is
  // the camera-frame depth.
  const Eigen::Vector3d h = A_ * Eigen::Vector3d(p.x, p.y, 1.0) + H * b_;
  return h.z() / H;
}

std::optional<PixelCoord> project(const Camera& ref, const Camera& src, const PixelCoord& p,
                                  double H) {
  return PairGeometry(ref, src).project(p, H);
}

std::optional<PixelCoord> project_point(const Camera& cam, const Eigen::Vector3d& X) {
  const Eigen::Vector3d h = cam.K * (cam.R * X + cam.t);
  if (!(h.z() > 0.0)) return std::nullopt;
  const PixelCoord q{h.x() / h.z(), h.y() / h.z()};
  if (!std::isfinite(q.x) || !std::isfinite(q.y)) return std::nullopt;
  return q;
}

Eigen::Vector3d back_project(const Camera& cam, const PixelCoord& p, double d) {
  const Eigen::Vector3d ray = cam.K.inverse() * Eigen::Vector3d(p.x, p.y, 1.0);
  return cam.R.transpose() * (d * ray - cam.t);
}

EpipolarStep epipolar_unit_step(const PairGeometry& pair, const PixelCoord& p, double H) {
  const double dH = kEpipolarRelativeEpsilon * H;
  const auto ahead = pair.project(p, H + dH);
  const auto behind = pair.project(p, H - dH);
  EpipolarStep step;
  if (!ahead || !behind) {
    step.degenerate = true;
    return step;
  }
  const Eigen::Vector2d tangent(ahead->x - behind->x, ahead->y - behind->y);
  const double norm = tangent.norm();
  if (!(norm >= kDegenerateTangentNorm) || !std::isfinite(norm)) {
    step.degenerate = true;
    return step;
  }
  step.direction = tangent / norm;
  return step;
}

EpipolarStep epipolar_unit_step(const Camera& ref, const Camera& src, const PixelCoord& p,
                                double H) {
  return epipolar_unit_step(PairGeometry(ref, src), p, H);
}

namespace {

struct BilinearTaps {
  int x0, y0, x1, y1;
  double fx, fy;
};

BilinearTaps bilinear_taps(int width, int height, const PixelCoord& p) {
  const double x = std::clamp(p.x, 0.0, static_cast<double>(width - 1));
  const double y = std::clamp(p.y, 0.0, static_cast<double>(height - 1));
  BilinearTaps taps;
  taps.x0 = static_cast<int>(std::floor(x));
  taps.y0 = static_cast<int>(std::floor(y));
  taps.x1 = std::min(taps.x0 + 1, width - 1);
  taps.y1 = std::min(taps.y0 + 1, height - 1);
  taps.fx = x - taps.x0;
  taps.fy = y - taps.y0;
  return taps;
}

}  // namespace

double bilinear_sample(const ScalarMap& map, const PixelCoord& p) {
  const auto k = bilinear_taps(map.width(), map.height(), p);
  const double top = (1.0 - k.fx) * map(k.x0, k.y0) + k.fx * map(k.x1, k.y0);
  const double bottom = (1.0 - k.fx) * map(k.x0, k.y1) + k.fx * map(k.x1, k.y1);
  return (1.0 - k.fy) * top + k.fy * bottom;
}

float bilinear_sample(const Tensor& map, int channel, const PixelCoord& p) {
  const auto k = bilinear_taps(map.width(), map.height(), p);
  const double top = (1.0 - k.fx) * map.at(channel, k.y0, k.x0) + k.fx * map.at(channel, k.y0, k.x1);
  const double bottom =
      (1.0 - k.fx) * map.at(channel, k.y1, k.x0) + k.fx * map.at(channel, k.y1, k.x1);
  return static_cast<float>((1.0 - k.fy) * top + k.fy * bottom);
}

void bilinear_sample(const Tensor& map, const PixelCoord& p, std::span<float> out) {
  const auto k = bilinear_taps(map.width(), map.height(), p);
  const double w00 = (1.0 - k.fx) * (1.0 - k.fy);
  const double w10 = k.fx * (1.0 - k.fy);
  const double w01 = (1.0 - k.fx) * k.fy;
  const double w11 = k.fx * k.fy;
  for (int c = 0; c < map.channels(); ++c) {
    out[c] = static_cast<float>(w00 * map.at(c, k.y0, k.x0) + w10 * map.at(c, k.y0, k.x1) +
                                w01 * map.at(c, k.y1, k.x0) + w11 * map.at(c, k.y1, k.x1));
  }
}

std::vector<Camera> read_cameras(std::istream& in) {
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string token;
    while (tokens >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw FormatError("camera file: not a number: '" + token + "'");
      }
    }
  }
  constexpr std::size_t kPerCamera = 9 + 12 + 2;
  if (values.empty() || values.size() % kPerCamera != 0)
    throw FormatError("camera file: expected a multiple of 23 values, got " +
                      std::to_string(values.size()));
  std::vector<Camera> cameras;
  for (std::size_t base = 0; base < values.size(); base += kPerCamera) {
    Camera cam;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) cam.K(r, c) = values[base + 3 * r + c];
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cam.R(r, c) = values[base + 9 + 4 * r + c];
      cam.t(r) = values[base + 9 + 4 * r + 3];
    }
    const double w = values[base + 21];
    const double h = values[base + 22];
    if (w != std::floor(w) || h != std::floor(h))
      throw FormatError("camera file: image size must be integral");
    cam.width = static_cast<int>(w);
    cam.height = static_cast<int>(h);
    try {
      cam.validate();
    } catch (const ConfigError& e) {
      throw FormatError(std::string("camera file: ") + e.what());
    }
    cameras.push_back(cam);
  }
  return cameras;
}

std::vector<Camera> read_cameras(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open camera file " + path);
  return read_cameras(in);
}

void write_cameras(std::ostream& out, const std::vector<Camera>& cameras) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const Camera& cam = cameras[i];
    out << "# camera " << i << "\n";
    for (int r = 0; r < 3; ++r) out << cam.K(r, 0) << ' ' << cam.K(r, 1) << ' ' << cam.K(r, 2) << '\n';
    for (int r = 0; r < 3; ++r)
      out << cam.R(r, 0) << ' ' << cam.R(r, 1) << ' ' << cam.R(r, 2) << ' ' << cam.t(r) << '\n';
    out << cam.width << ' ' << cam.height << "\n";
  }
}

void write_cameras(const std::string& path, const std::vector<Camera>& cameras) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write camera file " + path);
  write_cameras(out, cameras);
}

}  // namespace ibmvs
