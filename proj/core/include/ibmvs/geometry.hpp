#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ibmvs/grid.hpp"
#include "ibmvs/tensor.hpp"

namespace ibmvs {

/// Continuous pixel coordinate. Origin at the center of the top-left pixel,
/// x to the right, y downward; pixel (i, j) covers [i - 0.5, i + 0.5).
struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
};

/// Pinhole camera: intrinsics K and world-to-camera transform X_c = R X_w + t.
struct Camera {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  int width = 0;
  int height = 0;

  Eigen::Vector3d center() const { return -R.transpose() * t; }
  bool contains(const PixelCoord& p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1;
  }
  /// Checks the documented invariants (upper-triangular K with positive
  /// focals, orthonormal R, positive size). Throws ConfigError.
  void validate() const;
};

/// The same view resampled to width x height pixels (e.g. half resolution),
/// consistent with the pixel-center convention.
Camera resize_camera(const Camera& cam, int width, int height);

/// Builds a camera at `center` looking at `target`, with image y axis aligned
/// as closely as possible with `down`.
Camera look_at_camera(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                      const Eigen::Vector3d& down, double focal, int width, int height);

/// Inverse-depth search interval. Keeps the signed convention: for
/// d_min < d_max, D_min > D_max and half_width R < 0.
struct InverseDepthInterval {
  double d_min = 0.0;  // near depth, scene units
  double d_max = 0.0;  // far depth, scene units
  double D_min = 0.0;  // 1 / d_min, stored as midpoint - R
  double D_max = 0.0;  // 1 / d_max, stored as midpoint + R
  double R = 0.0;      // (D_max - D_min) / 2
  double midpoint = 0.0;

  double lower() const { return D_max < D_min ? D_max : D_min; }
  double upper() const { return D_max < D_min ? D_min : D_max; }
  double clamp(double H) const;
};

/// Throws InvalidRangeError unless 0 < d_min <= d_max, both finite.
InverseDepthInterval make_interval(double d_min, double d_max);

/// Precomputed relative geometry of a reference/source pair. A reference pixel
/// p at inverse depth H maps to the source pixel of the homogeneous vector
/// A * [p; 1] + H * b, which is invariant to a joint rescaling of translation
/// and depth.
class PairGeometry {
 public:
  PairGeometry(const Camera& ref, const Camera& src);

  std::optional<PixelCoord> project(const PixelCoord& p, double H) const;
  /// Depth of the point in the source camera frame.
  double source_depth(const PixelCoord& p, double H) const;

  const Eigen::Matrix3d& A() const { return A_; }
  const Eigen::Vector3d& b() const { return b_; }

 private:
  Eigen::Matrix3d A_;
  Eigen::Vector3d b_;
};

/// Source-image coordinate of the point at depth 1/H on the reference ray
/// through p. nullopt when the point is behind the source camera or the result
/// is not finite.
std::optional<PixelCoord> project(const Camera& ref, const Camera& src, const PixelCoord& p,
                                  double H);

/// Projects a world point into a camera. nullopt if behind or non-finite.
std::optional<PixelCoord> project_point(const Camera& cam, const Eigen::Vector3d& X);

/// World point on the ray through p at camera-frame z-depth d.
Eigen::Vector3d back_project(const Camera& cam, const PixelCoord& p, double d);

struct EpipolarStep {
  Eigen::Vector2d direction{1.0, 0.0};
  bool degenerate = false;
};

inline constexpr double kEpipolarRelativeEpsilon = 1e-4;
inline constexpr double kDegenerateTangentNorm = 1e-12;

/// Unit pixel-space tangent of H -> project(p, H), oriented toward increasing
/// inverse depth. Falls back to (1, 0) with `degenerate` set when the tangent
/// vanishes or a probe projection fails.
EpipolarStep epipolar_unit_step(const PairGeometry& pair, const PixelCoord& p, double H);
EpipolarStep epipolar_unit_step(const Camera& ref, const Camera& src, const PixelCoord& p,
                                double H);

/// Bilinear interpolation with clamp-to-edge borders.
double bilinear_sample(const ScalarMap& map, const PixelCoord& p);
float bilinear_sample(const Tensor& map, int channel, const PixelCoord& p);
/// Samples every channel of `map` at p into `out` (size >= channels).
void bilinear_sample(const Tensor& map, const PixelCoord& p, std::span<float> out);

/// Camera text format: per camera 9 intrinsic values (row-major), 12 extrinsic
/// values ([R | t] row-major), width, height; whitespace separated.
std::vector<Camera> read_cameras(std::istream& in);
std::vector<Camera> read_cameras(const std::string& path);
void write_cameras(std::ostream& out, const std::vector<Camera>& cameras);
void write_cameras(const std::string& path, const std::vector<Camera>& cameras);

}  // namespace ibmvs
