#include "ibmvs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ibmvs/error.hpp"

namespace ibmvs {

MaskMap View::depth_validity() const {
  if (!depth) return MaskMap(camera.width, camera.height, 0);
  MaskMap valid(depth->width(), depth->height(), 0);
  for (std::size_t i = 0; i < valid.size(); ++i) {
    const double d = (*depth)[i];
    valid[i] = std::isfinite(d) && d > 0.0 ? 1 : 0;
  }
  return valid;
}

std::vector<int> select_sources(const SceneBundle& bundle, int reference, int count) {
  if (reference < 0 || reference >= bundle.size())
    throw ConfigError("reference view index out of range");
  const Eigen::Vector3d c = bundle.views[reference].camera.center();
  std::vector<int> others;
  for (int i = 0; i < bundle.size(); ++i)
    if (i != reference) others.push_back(i);
  std::stable_sort(others.begin(), others.end(), [&](int a, int b) {
    return (bundle.views[a].camera.center() - c).norm() <
           (bundle.views[b].camera.center() - c).norm();
  });
  if (count < static_cast<int>(others.size())) others.resize(std::max(count, 0));
  return others;
}

}  // namespace ibmvs
