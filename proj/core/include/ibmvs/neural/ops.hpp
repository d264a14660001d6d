#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ibmvs/geometry.hpp"
#include "ibmvs/sampler.hpp"
#include "ibmvs/tensor.hpp"

namespace ibmvs::nn {

/// Negative slope of every leaky ReLU in the executor.
inline constexpr float kLeakySlope = 0.01f;
inline constexpr float kInstanceNormEpsilon = 1e-5f;

enum class Activation { kIdentity, kReLU, kLeakyReLU, kSigmoid };

/// A named parameter's shape and values (row-major over dims).
struct Param {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t count() const;
  bool operator==(const Param&) const = default;
};

float activate(float v, Activation act);
void apply_activation(Tensor& t, Activation act);

/// Cross-correlation with zero padding (k - 1) / 2. weight dims
/// (C_out, C_in, k, k); bias (C_out) or null.
Tensor conv2d(const Tensor& input, const Param& weight, const Param* bias, int stride,
              Activation act, int workers = 1);

/// Transposed convolution, weight dims (C_in, C_out, k, k), padding
/// (k - 1) / 2. With k = 4, stride 2 the output is exactly twice the input.
Tensor transposed_conv2d(const Tensor& input, const Param& weight, const Param* bias, int stride,
                         Activation act, int workers = 1);

/// Per-channel (x - mean) / sqrt(var + eps) using the biased variance, then
/// gamma * x + beta when both are given.
Tensor instance_norm(const Tensor& input, const Param* gamma = nullptr,
                     const Param* beta = nullptr);

/// Convolution whose k^2 taps are the epipolar samples of `grid` over the
/// source feature map. weight dims (C_out, C_in, k, k): kernel position
/// (ky, kx) reads tap ky * k + kx.
Tensor deformable_epipolar_conv(const Tensor& src_features, const SampleGrid& grid,
                                const Camera& src, const Param& weight, const Param* bias,
                                Activation act, int workers = 1);

/// Bilinear resampling with align_corners = false semantics (source
/// coordinate (dst + 0.5) * in / out - 0.5, clamped to the image).
Tensor resize_bilinear(const Tensor& input, int height, int width);
ScalarMap resize_bilinear(const ScalarMap& input, int width, int height);

Tensor upsample_nearest2x(const Tensor& input);
Tensor concat_channels(std::span<const Tensor* const> parts);
void add_inplace(Tensor& target, const Tensor& other);

}  // namespace ibmvs::nn
