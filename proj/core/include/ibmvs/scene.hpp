#pragma once

#include <optional>
#include <vector>

#include "ibmvs/geometry.hpp"
#include "ibmvs/grid.hpp"
#include "ibmvs/tensor.hpp"

namespace ibmvs {

/// One posed image. Ground-truth depth is camera-frame z, NaN where invalid.
struct View {
  Tensor image;  // (C, H, W), intensities in [0, 1]
  Camera camera;
  std::optional<ScalarMap> depth;

  MaskMap depth_validity() const;
};

/// Images, cameras and optional ground-truth depths of a multi-view scene.
/// By convention view 0 is the reference and views 1..S the sources.
struct SceneBundle {
  std::vector<View> views;

  int size() const { return static_cast<int>(views.size()); }
  const View& reference() const { return views.at(0); }
};

/// Indices of the `count` views closest to `reference` by camera-center
/// distance (ties broken by index).
std::vector<int> select_sources(const SceneBundle& bundle, int reference, int count);

}  // namespace ibmvs
