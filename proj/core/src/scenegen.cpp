#include "ibmvs/scenegen.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include "ibmvs/error.hpp"
#include "ibmvs/parallel.hpp"
#include "ibmvs/random.hpp"

namespace ibmvs {

namespace {

using nlohmann::json;

Eigen::Vector3d vec3(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 3) throw FormatError(std::string("'") + key + "' must be [x, y, z]");
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw FormatError(std::string("'") + key + "' must be numeric");
    v(i) = j[i].get<double>();
  }
  return v;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("scene spec: bad value for '") + key + "'");
  }
}

TextureSpec parse_texture(const json& j) {
  TextureSpec t;
  if (j.is_null()) return t;
  if (!j.is_object()) throw FormatError("scene spec: 'texture' must be an object");
  const auto type = get_or<std::string>(j, "type", "noise");
  if (type == "noise") {
    t.kind = TextureSpec::Kind::kNoise;
  } else if (type == "checker") {
    t.kind = TextureSpec::Kind::kChecker;
  } else if (type == "constant") {
    t.kind = TextureSpec::Kind::kConstant;
  } else {
    throw FormatError("scene spec: unknown texture type '" + type + "'");
  }
  t.scale = get_or(j, "scale", t.scale);
  t.octaves = get_or(j, "octaves", t.octaves);
  t.seed = get_or<std::uint64_t>(j, "seed", t.seed);
  if (j.contains("color")) {
    const auto c = vec3(j["color"], "color");
    t.color = {c.x(), c.y(), c.z()};
  }
  return t;
}

PrimitiveSpec parse_primitive(const json& j) {
  if (!j.is_object()) throw FormatError("scene spec: primitive must be an object");
  PrimitiveSpec p;
  const auto type = get_or<std::string>(j, "type", "");
  if (type == "plane") {
    p.kind = PrimitiveSpec::Kind::kPlane;
    if (!j.contains("point") || !j.contains("normal"))
      throw FormatError("scene spec: plane needs 'point' and 'normal'");
    p.point = vec3(j["point"], "point");
    p.normal = vec3(j["normal"], "normal");
    if (j.contains("axis_u")) p.axis_u = vec3(j["axis_u"], "axis_u");
    if (j.contains("half_extent")) {
      const auto& e = j["half_extent"];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw FormatError("scene spec: 'half_extent' must be [u, v]");
      p.half_extent = std::array<double, 2>{e[0].get<double>(), e[1].get<double>()};
    }
  } else if (type == "sphere") {
    p.kind = PrimitiveSpec::Kind::kSphere;
    if (!j.contains("center") || !j.contains("radius"))
      throw FormatError("scene spec: sphere needs 'center' and 'radius'");
    p.point = vec3(j["center"], "center");
    p.radius = get_or(j, "radius", 0.0);
  } else {
    throw FormatError("scene spec: unknown primitive type '" + type + "'");
  }
  if (j.contains("texture")) p.texture = parse_texture(j["texture"]);
  return p;
}

// Orthonormal in-plane axes of a plane primitive.
std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_axes(const PrimitiveSpec& p) {
  const Eigen::Vector3d n = p.normal.normalized();
  Eigen::Vector3d u;
  if (p.axis_u) {
    u = *p.axis_u - p.axis_u->dot(n) * n;
  } else {
    u = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    u -= u.dot(n) * n;
  }
  u.normalize();
  return {u, n.cross(u)};
}

std::uint64_t lattice_hash(std::uint64_t seed, std::int64_t x, std::int64_t y, std::int64_t z) {
  std::uint64_t h = SplitMix64::mix(seed);
  h = SplitMix64::mix(h ^ static_cast<std::uint64_t>(x));
  h = SplitMix64::mix(h ^ static_cast<std::uint64_t>(y));
  h = SplitMix64::mix(h ^ static_cast<std::uint64_t>(z));
  return h;
}

double lattice_value(std::uint64_t seed, std::int64_t x, std::int64_t y, std::int64_t z) {
  return static_cast<double>(lattice_hash(seed, x, y, z) >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * (3.0 - 2.0 * t); }

// Trilinear value noise on the integer lattice with smoothstep fade.
double value_noise(std::uint64_t seed, const Eigen::Vector3d& q) {
  const double fx = std::floor(q.x()), fy = std::floor(q.y()), fz = std::floor(q.z());
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double tx = fade(q.x() - fx), ty = fade(q.y() - fy), tz = fade(q.z() - fz);
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
        acc += w * lattice_value(seed, ix + dx, iy + dy, iz + dz);
      }
  return acc;
}

}  // namespace

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("scene: image size must be positive");
  if (rig.layout != "ring" && rig.layout != "line" && rig.layout != "explicit")
    throw ConfigError("scene: rig layout must be ring, line or explicit");
  if (rig.layout == "explicit" ? rig.centers.empty() : rig.count < 1)
    throw ConfigError("scene: rig needs at least one camera");
  if (!(rig.focal > 0.0)) throw ConfigError("scene: focal length must be positive");
  for (const auto& p : primitives) {
    if (p.kind == PrimitiveSpec::Kind::kSphere && !(p.radius > 0.0))
      throw ConfigError("scene: sphere radius must be positive");
    if (p.kind == PrimitiveSpec::Kind::kPlane && !(p.normal.norm() > 0.0))
      throw ConfigError("scene: plane normal must be non-zero");
    if (p.texture.textured() && !(p.texture.scale > 0.0))
      throw ConfigError("scene: texture scale must be positive");
    if (p.texture.octaves < 1) throw ConfigError("scene: texture octaves must be >= 1");
  }
}

SceneSpec parse_scene_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("scene spec: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("scene spec: top level must be an object");
  SceneSpec spec;
  spec.width = get_or(j, "width", spec.width);
  spec.height = get_or(j, "height", spec.height);
  spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed);
  if (j.contains("rig")) {
    const json& r = j["rig"];
    if (!r.is_object()) throw FormatError("scene spec: 'rig' must be an object");
    spec.rig.layout = get_or<std::string>(r, "layout", spec.rig.layout);
    spec.rig.count = get_or(r, "count", spec.rig.count);
    spec.rig.focal = get_or(r, "focal", spec.rig.focal);
    spec.rig.baseline = get_or(r, "baseline", spec.rig.baseline);
    spec.rig.parallel = get_or(r, "parallel", spec.rig.parallel);
    if (r.contains("center")) spec.rig.center = vec3(r["center"], "center");
    if (r.contains("target")) spec.rig.target = vec3(r["target"], "target");
    if (r.contains("down")) spec.rig.down = vec3(r["down"], "down");
    if (r.contains("centers")) {
      if (!r["centers"].is_array()) throw FormatError("scene spec: 'centers' must be an array");
      for (const auto& c : r["centers"]) spec.rig.centers.push_back(vec3(c, "centers"));
    }
  }
  if (!j.contains("primitives") || !j["primitives"].is_array())
    throw FormatError("scene spec: 'primitives' array is required");
  for (const auto& p : j["primitives"]) spec.primitives.push_back(parse_primitive(p));
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  return spec;
}

SceneSpec load_scene_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scene spec " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_spec(ss.str());
}

std::vector<Camera> build_rig(const SceneSpec& spec) {
  spec.validate();
  const RigSpec& rig = spec.rig;
  const Camera ref =
      look_at_camera(rig.layout == "explicit" ? rig.centers[0] : rig.center, rig.target, rig.down,
                     rig.focal, spec.width, spec.height);
  std::vector<Eigen::Vector3d> centers;
  if (rig.layout == "explicit") {
    centers = rig.centers;
  } else {
    const Eigen::Vector3d right = ref.R.row(0).transpose();
    const Eigen::Vector3d down = ref.R.row(1).transpose();
    centers.push_back(rig.center);
    const int others = rig.count - 1;
    for (int i = 1; i <= others; ++i) {
      if (rig.layout == "ring") {
        const double theta = 2.0 * std::numbers::pi * (i - 1) / others;
        centers.push_back(rig.center +
                          rig.baseline * (std::cos(theta) * right + std::sin(theta) * down));
      } else {
        centers.push_back(rig.center + rig.baseline * i * right);
      }
    }
  }
  std::vector<Camera> cams;
  for (const auto& c : centers) {
    if (rig.parallel) {
      Camera cam = ref;
      cam.t = -cam.R * c;
      cams.push_back(cam);
    } else {
      cams.push_back(look_at_camera(c, rig.target, rig.down, rig.focal, spec.width, spec.height));
    }
  }
  return cams;
}

std::optional<RayHit> trace_ray(const SceneSpec& spec, const Camera& cam, const PixelCoord& p) {
  const Eigen::Vector3d C = cam.center();
  // Direction with unit camera-frame z: ray parameter equals z-depth.
  const Eigen::Vector3d dir = cam.R.transpose() * (cam.K.inverse() * Eigen::Vector3d(p.x, p.y, 1.0));
  std::optional<RayHit> best;
  for (int i = 0; i < static_cast<int>(spec.primitives.size()); ++i) {
    const PrimitiveSpec& prim = spec.primitives[i];
    double s = std::numeric_limits<double>::infinity();
    if (prim.kind == PrimitiveSpec::Kind::kPlane) {
      const Eigen::Vector3d n = prim.normal.normalized();
      const double denom = n.dot(dir);
      if (std::abs(denom) < 1e-15) continue;
      s = n.dot(prim.point - C) / denom;
      if (!(s > 0.0)) continue;
      if (prim.half_extent) {
        const auto [u, v] = plane_axes(prim);
        const Eigen::Vector3d local = C + s * dir - prim.point;
        if (std::abs(local.dot(u)) > (*prim.half_extent)[0] ||
            std::abs(local.dot(v)) > (*prim.half_extent)[1])
          continue;
      }
    } else {
      const Eigen::Vector3d oc = C - prim.point;
      const double a = dir.squaredNorm();
      const double b = 2.0 * oc.dot(dir);
      const double c = oc.squaredNorm() - prim.radius * prim.radius;
      const double disc = b * b - 4.0 * a * c;
      if (disc < 0.0) continue;
      const double root = std::sqrt(disc);
      const double s0 = (-b - root) / (2.0 * a);
      const double s1 = (-b + root) / (2.0 * a);
      s = s0 > 0.0 ? s0 : s1;
      if (!(s > 0.0)) continue;
    }
    if (!best || s < best->depth) best = RayHit{s, i, C + s * dir};
  }
  return best;
}

std::array<double, 3> texture_color(const TextureSpec& tex, std::uint64_t scene_seed,
                                    const Eigen::Vector3d& X) {
  switch (tex.kind) {
    case TextureSpec::Kind::kConstant:
      return tex.color;
    case TextureSpec::Kind::kChecker: {
      const Eigen::Vector3d q = X / tex.scale;
      const auto parity = static_cast<std::int64_t>(std::floor(q.x()) + std::floor(q.y()) +
                                                    std::floor(q.z()));
      const double v = (parity % 2 == 0) ? 0.8 : 0.2;
      return {v, v, v};
    }
    case TextureSpec::Kind::kNoise: {
      std::array<double, 3> rgb{};
      for (int c = 0; c < 3; ++c) {
        const std::uint64_t seed = SplitMix64::mix(scene_seed ^ SplitMix64::mix(tex.seed + c));
        double acc = 0.0, norm = 0.0, amp = 1.0, freq = 1.0;
        for (int o = 0; o < tex.octaves; ++o) {
          acc += amp * value_noise(seed + o, X * (freq / tex.scale));
          norm += amp;
          amp *= 0.5;
          freq *= 2.0;
        }
        rgb[c] = acc / norm;
      }
      return rgb;
    }
  }
  return {0.0, 0.0, 0.0};
}

SceneBundle render(const SceneSpec& spec, int workers) {
  spec.validate();
  const auto cameras = build_rig(spec);
  for (const Camera& cam : cameras) {
    const Eigen::Vector3d C = cam.center();
    for (const auto& prim : spec.primitives) {
      if (prim.kind == PrimitiveSpec::Kind::kSphere && (C - prim.point).norm() <= prim.radius)
        throw ConfigError("scene: camera inside a sphere primitive");
      if (prim.kind == PrimitiveSpec::Kind::kPlane &&
          std::abs(prim.normal.normalized().dot(C - prim.point)) < 1e-9)
        throw ConfigError("scene: camera lies on a plane primitive");
    }
  }
  SceneBundle bundle;
  for (const Camera& cam : cameras) {
    View view;
    view.camera = cam;
    view.image = Tensor(3, cam.height, cam.width, 0.0f);
    ScalarMap depth(cam.width, cam.height, std::numeric_limits<double>::quiet_NaN());
    parallel_for(0, cam.height, workers, [&](int y) {
      for (int x = 0; x < cam.width; ++x) {
        const auto hit = trace_ray(spec, cam, PixelCoord{double(x), double(y)});
        if (!hit) continue;
        depth(x, y) = hit->depth;
        const auto rgb = texture_color(spec.primitives[hit->primitive].texture, spec.seed, hit->point);
        for (int c = 0; c < 3; ++c) view.image.at(c, y, x) = static_cast<float>(rgb[c]);
      }
    });
    view.depth = std::move(depth);
    bundle.views.push_back(std::move(view));
  }
  return bundle;
}

SoftMask occlusion_mask(const SceneBundle& bundle, int source_index, int reference_index) {
  const View& ref = bundle.views.at(reference_index);
  const View& src = bundle.views.at(source_index);
  if (!ref.depth || !src.depth) throw ConfigError("occlusion_mask: ground-truth depth required");
  SoftMask mask(ref.camera.width, ref.camera.height, 0.0);
  for (int y = 0; y < ref.camera.height; ++y) {
    for (int x = 0; x < ref.camera.width; ++x) {
      const double d = (*ref.depth)(x, y);
      if (!std::isfinite(d) || !(d > 0.0)) {
        mask.valid(x, y) = 0;
        mask.in_view(x, y) = 0;
        continue;
      }
      const Eigen::Vector3d X = back_project(ref.camera, PixelCoord{double(x), double(y)}, d);
      const auto q = project_point(src.camera, X);
      if (!q || !src.camera.contains(*q)) {
        mask.in_view(x, y) = 0;
        continue;
      }
      const int qx = static_cast<int>(std::lround(q->x));
      const int qy = static_cast<int>(std::lround(q->y));
      const double z = (src.camera.R * X + src.camera.t).z();
      const double ds = (*src.depth)(qx, qy);
      if (std::isfinite(ds) && std::abs(z - ds) < kCovisibilityTolerance * z) mask.value(x, y) = 1.0;
    }
  }
  return mask;
}

}  // namespace ibmvs
