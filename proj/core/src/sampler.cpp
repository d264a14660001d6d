#include "ibmvs/sampler.hpp"

#include <string>

#include "ibmvs/error.hpp"
#include "ibmvs/parallel.hpp"

namespace ibmvs {

namespace {

// Samples landing on the border up to rounding count as inside.
constexpr double kBorderTolerance = 1e-9;

bool inside(const Camera& cam, const PixelCoord& c) {
  return c.x >= -kBorderTolerance && c.y >= -kBorderTolerance &&
         c.x <= cam.width - 1 + kBorderTolerance && c.y <= cam.height - 1 + kBorderTolerance;
}

}  // namespace

std::vector<int> EpipolarKernel::offsets() const {
  std::vector<int> out(taps());
  for (int i = 0; i < taps(); ++i) out[i] = offset(i);
  return out;
}

SampleGrid::SampleGrid(int width, int height, int k)
    : width_(width), height_(height), degenerate_(width, height, 0) {
  if (k < 1 || k % 2 == 0) throw ConfigError("epipolar kernel size must be odd and positive");
  kernel_.k = k;
  const std::size_t n = static_cast<std::size_t>(width) * height * kernel_.taps();
  coords_.assign(n, PixelCoord{});
  valid_.assign(n, 0);
}

SampleGrid build_sample_grid(const Camera& ref, const Camera& src, const ScalarMap& H, int k,
                             int workers) {
  if (H.width() != ref.width || H.height() != ref.height)
    throw DimensionError("build_sample_grid: hypothesis map does not match reference camera");
  SampleGrid grid(H.width(), H.height(), k);
  const PairGeometry pair(ref, src);
  const EpipolarKernel kernel = grid.kernel();
  parallel_for(0, H.height(), workers, [&](int y) {
    for (int x = 0; x < H.width(); ++x) {
      const PixelCoord p{static_cast<double>(x), static_cast<double>(y)};
      const double h = H(x, y);
      const auto center = h > 0.0 ? pair.project(p, h) : std::nullopt;
      if (!center) {
        grid.set_degenerate(x, y, true);
        for (int i = 0; i < kernel.taps(); ++i) {
          grid.coord(x, y, i) = PixelCoord{};
          grid.set_valid(x, y, i, false);
        }
        continue;
      }
      const EpipolarStep step = epipolar_unit_step(pair, p, h);
      grid.set_degenerate(x, y, step.degenerate);
      for (int i = 0; i < kernel.taps(); ++i) {
        const double s = kernel.offset(i);
        const PixelCoord c{center->x + s * step.direction.x(), center->y + s * step.direction.y()};
        grid.coord(x, y, i) = c;
        grid.set_valid(x, y, i, inside(src, c));
      }
    }
  });
  return grid;
}

Tensor gather(const Tensor& map, const SampleGrid& grid, const Camera& src, int workers) {
  if (map.width() != src.width || map.height() != src.height)
    throw DimensionError("gather: feature map " + map.shape_string() +
                         " does not match source camera " + std::to_string(src.width) + "x" +
                         std::to_string(src.height));
  const int C = map.channels();
  const int taps = grid.taps();
  Tensor out(taps * C, grid.height(), grid.width());
  parallel_for(0, grid.height(), workers, [&](int y) {
    std::vector<float> values(C);
    for (int x = 0; x < grid.width(); ++x) {
      for (int i = 0; i < taps; ++i) {
        if (!grid.valid(x, y, i)) continue;  // already zero
        bilinear_sample(map, grid.coord(x, y, i), values);
        for (int c = 0; c < C; ++c) out.at(i * C + c, y, x) = values[c];
      }
    }
  });
  return out;
}

}  // namespace ibmvs
