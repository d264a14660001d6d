#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ibmvs/decision.hpp"
#include "ibmvs/geometry.hpp"
#include "ibmvs/scene.hpp"

namespace ibmvs {

/// Solid (world-space) procedural texture, so every view sees identical
/// albedo at a surface point.
struct TextureSpec {
  enum class Kind { kNoise, kChecker, kConstant };
  Kind kind = Kind::kNoise;
  double scale = 0.05;  // lattice / checker cell size, scene units
  int octaves = 3;
  std::uint64_t seed = 1;
  std::array<double, 3> color{0.5, 0.5, 0.5};  // constant textures only

  bool textured() const { return kind != Kind::kConstant; }
};

struct PrimitiveSpec {
  enum class Kind { kPlane, kSphere };
  Kind kind = Kind::kPlane;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();  // plane point or sphere center
  Eigen::Vector3d normal{0.0, 0.0, -1.0};
  double radius = 1.0;
  /// In-plane first axis and half extents; unbounded plane when absent.
  std::optional<Eigen::Vector3d> axis_u;
  std::optional<std::array<double, 2>> half_extent;
  TextureSpec texture;
};

/// Camera rig: view 0 is the reference at `center`. "ring" places the other
/// views on a circle of radius `baseline` around it in the reference image
/// plane, "line" at multiples of `baseline` along the reference x axis,
/// "explicit" at `centers` (first entry is the reference). All views look at
/// `target` unless `parallel`, in which case they share the reference
/// orientation.
struct RigSpec {
  std::string layout = "ring";
  int count = 5;
  double focal = 128.0;
  double baseline = 0.2;
  bool parallel = false;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d target{0.0, 0.0, 1.0};
  Eigen::Vector3d down{0.0, 1.0, 0.0};
  std::vector<Eigen::Vector3d> centers;
};

struct SceneSpec {
  int width = 128;
  int height = 128;
  std::uint64_t seed = 1;
  RigSpec rig;
  std::vector<PrimitiveSpec> primitives;

  void validate() const;
};

/// Parses the JSON scene description; throws FormatError with the offending
/// key on malformed input.
SceneSpec parse_scene_spec(const std::string& json_text);
SceneSpec load_scene_spec(const std::string& path);

std::vector<Camera> build_rig(const SceneSpec& spec);

struct RayHit {
  double depth = 0.0;  // camera-frame z
  int primitive = -1;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

/// Nearest intersection of the ray through p, or nullopt.
std::optional<RayHit> trace_ray(const SceneSpec& spec, const Camera& cam, const PixelCoord& p);

/// Albedo of a primitive's texture at a world point, per channel.
std::array<double, 3> texture_color(const TextureSpec& tex, std::uint64_t scene_seed,
                                    const Eigen::Vector3d& X);

/// Ray-casts every view: pure albedo, nearest-hit depth (NaN where no
/// surface). Throws ConfigError when a camera lies inside geometry.
SceneBundle render(const SceneSpec& spec, int workers = 1);

inline constexpr double kCovisibilityTolerance = 0.01;

/// 1 where a reference pixel's ground-truth point reprojects into the source
/// and agrees with the source depth (nearest pixel) within 1% relative.
SoftMask occlusion_mask(const SceneBundle& bundle, int source_index, int reference_index = 0);

}  // namespace ibmvs
