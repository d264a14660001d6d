#pragma once

#include <vector>

#include "ibmvs/geometry.hpp"
#include "ibmvs/grid.hpp"
#include "ibmvs/tensor.hpp"

namespace ibmvs {

/// k x k kernel whose k^2 taps are laid out along the epipolar line. Tap i
/// (row-major kernel index) sits at (i - (k^2 - 1) / 2) unit steps from the
/// hypothesis-predicted match.
struct EpipolarKernel {
  int k = 5;

  int taps() const { return k * k; }
  int offset(int tap) const { return tap - (k * k - 1) / 2; }
  std::vector<int> offsets() const;
};

/// Per reference pixel: k^2 source-image coordinates and per-sample validity.
/// A sample is valid when the center projection exists and the sample lies
/// inside the source image.
class SampleGrid {
 public:
  SampleGrid() = default;
  SampleGrid(int width, int height, int k);

  int width() const { return width_; }
  int height() const { return height_; }
  int k() const { return kernel_.k; }
  int taps() const { return kernel_.taps(); }
  const EpipolarKernel& kernel() const { return kernel_; }

  PixelCoord& coord(int x, int y, int tap) { return coords_[index(x, y, tap)]; }
  const PixelCoord& coord(int x, int y, int tap) const { return coords_[index(x, y, tap)]; }
  bool valid(int x, int y, int tap) const { return valid_[index(x, y, tap)] != 0; }
  void set_valid(int x, int y, int tap, bool v) { valid_[index(x, y, tap)] = v ? 1 : 0; }
  /// Set when the epipolar direction fell back to (1, 0) at this pixel.
  bool degenerate(int x, int y) const { return degenerate_(x, y) != 0; }
  void set_degenerate(int x, int y, bool v) { degenerate_(x, y) = v ? 1 : 0; }

 private:
  std::size_t index(int x, int y, int tap) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kernel_.taps() + tap;
  }

  int width_ = 0;
  int height_ = 0;
  EpipolarKernel kernel_;
  std::vector<PixelCoord> coords_;
  std::vector<unsigned char> valid_;
  MaskMap degenerate_;
};

/// Builds the epipolar sample grid over the reference image of size H.
/// `workers` parallelizes over rows.
SampleGrid build_sample_grid(const Camera& ref, const Camera& src, const ScalarMap& H, int k,
                             int workers = 1);

/// Gathers a (taps * C) vector per pixel, tap-major: entry [tap * C + c].
/// Invalid samples contribute 0. Returned as a tensor of shape
/// (taps * C, height, width).
Tensor gather(const Tensor& map, const SampleGrid& grid, const Camera& src, int workers = 1);

}  // namespace ibmvs
