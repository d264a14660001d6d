#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ibmvs {

/// Channel-major float32 tensor of shape (channels, height, width). Used for
/// images and for every neural feature map.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, float fill = 0.0f);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  float& at(int c, int y, int x) { return data_[offset(c, y, x)]; }
  float at(int c, int y, int x) const { return data_[offset(c, y, x)]; }

  std::span<float> channel(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const float> channel(int c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }
  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }
  std::string shape_string() const;
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t offset(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(height_) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

}  // namespace ibmvs
