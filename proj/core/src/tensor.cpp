#include "ibmvs/tensor.hpp"

#include <cmath>

#include "ibmvs/error.hpp"

namespace ibmvs {

Tensor::Tensor(int channels, int height, int width, float fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 0 || height < 0 || width < 0) throw DimensionError("negative tensor dimension");
  data_.assign(static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
                   static_cast<std::size_t>(width),
               fill);
}

std::string Tensor::shape_string() const {
  return "(" + std::to_string(channels_) + ", " + std::to_string(height_) + ", " +
         std::to_string(width_) + ")";
}

bool Tensor::all_finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ibmvs
