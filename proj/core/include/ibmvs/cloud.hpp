#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ibmvs/geometry.hpp"
#include "ibmvs/scene.hpp"

namespace ibmvs {

using Color = std::array<std::uint8_t, 3>;

struct PointCloud {
  std::vector<Eigen::Vector3f> points;
  std::vector<Color> colors;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void add(const Eigen::Vector3f& p, const Color& c) {
    points.push_back(p);
    colors.push_back(c);
  }
  bool operator==(const PointCloud&) const = default;
};

inline constexpr double kDepthAgreement = 0.01;

struct FusionParams {
  int min_views = 3;        // S_g
  double reproj_px = 0.25;  // g
  double depth_agreement = kDepthAgreement;
  int workers = 1;

  void validate() const;
};

/// Named per-benchmark settings: dtu, eth3d_high, eth3d_low, tnt_intermediate,
/// tnt_advanced. Throws ConfigError for unknown names.
FusionParams fusion_preset(const std::string& name);
std::vector<std::string> fusion_preset_names();

struct ConsistentMatch {
  PixelCoord q;             // landing pixel in view b
  Eigen::Vector3d point_b;  // view b's back-projection at q
  double reproj_error = 0.0;
  double depth_error = 0.0;  // relative
};

/// Forward-backward check of pixel p of view a (depth d_a) against view b.
/// The depth of b at the landing pixel is bilinearly interpolated and requires
/// all four neighbours valid. nullopt when inconsistent or out of bounds.
std::optional<ConsistentMatch> consistency_check(const Camera& cam_a, const PixelCoord& p,
                                                 double d_a, const Camera& cam_b,
                                                 const ScalarMap& depth_b,
                                                 const FusionParams& params);

/// Fuses per-view depth maps (View::depth, NaN invalid) into one cloud.
/// Views are visited in order and pixels in row-major order; a pixel already
/// consumed by an earlier point is skipped as an origin. Each emitted point is
/// the mean of the origin back-projection and its consistent views' points,
/// colored from the origin image; the origin and the nearest landing pixel in
/// each consistent view are marked used.
PointCloud fuse_cloud(std::span<const View> views, const FusionParams& params);

void write_ply(std::ostream& out, const PointCloud& cloud);
void write_ply(const std::string& path, const PointCloud& cloud);
PointCloud read_ply(std::istream& in);
PointCloud read_ply(const std::string& path);

}  // namespace ibmvs
