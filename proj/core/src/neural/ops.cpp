#include "ibmvs/neural/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ibmvs/error.hpp"
#include "ibmvs/parallel.hpp"

namespace ibmvs::nn {

std::size_t Param::count() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t d) { return a * d; });
}

float activate(float v, Activation act) {
  switch (act) {
    case Activation::kIdentity:
      return v;
    case Activation::kReLU:
      return v > 0.0f ? v : 0.0f;
    case Activation::kLeakyReLU:
      return v > 0.0f ? v : kLeakySlope * v;
    case Activation::kSigmoid:
      return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
  }
  return v;
}

void apply_activation(Tensor& t, Activation act) {
  if (act == Activation::kIdentity) return;
  for (float& v : t.data()) v = activate(v, act);
}

namespace {

void check_kernel(const Param& weight, const char* op) {
  if (weight.dims.size() != 4 || weight.dims[2] != weight.dims[3])
    throw DimensionError(std::string(op) + ": weight must have dims (a, b, k, k)");
  if (weight.values.size() != weight.count())
    throw DimensionError(std::string(op) + ": weight value count does not match dims");
}

void check_bias(const Param* bias, std::uint32_t channels, const char* op) {
  if (bias && (bias->dims.size() != 1 || bias->dims[0] != channels ||
               bias->values.size() != channels))
    throw DimensionError(std::string(op) + ": bias must have " + std::to_string(channels) +
                         " entries");
}

// Inclusive-exclusive range of output indices whose input index
// o * stride - pad + tap lands in [0, extent).
std::pair<int, int> valid_outputs(int out_extent, int extent, int stride, int pad, int tap) {
  const int lo_num = pad - tap;
  int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  const int hi_num = extent - 1 + pad - tap;
  int hi = hi_num < 0 ? -1 : hi_num / stride;
  lo = std::max(lo, 0);
  hi = std::min(hi, out_extent - 1);
  return {lo, hi + 1};
}

}  // namespace

Tensor conv2d(const Tensor& input, const Param& weight, const Param* bias, int stride,
              Activation act, int workers) {
  check_kernel(weight, "conv2d");
  const int cout = static_cast<int>(weight.dims[0]);
  const int cin = static_cast<int>(weight.dims[1]);
  const int k = static_cast<int>(weight.dims[2]);
  if (cin != input.channels())
    throw DimensionError("conv2d: input has " + std::to_string(input.channels()) +
                         " channels, weights expect " + std::to_string(cin));
  if (stride != 1 && stride != 2) throw DimensionError("conv2d: stride must be 1 or 2");
  check_bias(bias, weight.dims[0], "conv2d");
  const int pad = (k - 1) / 2;
  const int H = input.height();
  const int W = input.width();
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  Tensor out(cout, Ho, Wo);
  parallel_for(0, cout, workers, [&](int co) {
    std::span<float> acc = out.channel(co);
    std::fill(acc.begin(), acc.end(), bias ? bias->values[co] : 0.0f);
    for (int ci = 0; ci < cin; ++ci) {
      std::span<const float> in = input.channel(ci);
      for (int ky = 0; ky < k; ++ky) {
        const auto [oy0, oy1] = valid_outputs(Ho, H, stride, pad, ky);
        for (int kx = 0; kx < k; ++kx) {
          const float w =
              weight.values[((static_cast<std::size_t>(co) * cin + ci) * k + ky) * k + kx];
          if (w == 0.0f) continue;
          const auto [ox0, ox1] = valid_outputs(Wo, W, stride, pad, kx);
          for (int oy = oy0; oy < oy1; ++oy) {
            const float* row = in.data() + static_cast<std::size_t>(oy * stride - pad + ky) * W;
            float* dst = acc.data() + static_cast<std::size_t>(oy) * Wo;
            if (stride == 1) {
              const int shift = kx - pad;
              for (int ox = ox0; ox < ox1; ++ox) dst[ox] += w * row[ox + shift];
            } else {
              for (int ox = ox0; ox < ox1; ++ox) dst[ox] += w * row[ox * stride - pad + kx];
            }
          }
        }
      }
    }
    if (act != Activation::kIdentity)
      for (float& v : acc) v = activate(v, act);
  });
  return out;
}

Tensor transposed_conv2d(const Tensor& input, const Param& weight, const Param* bias, int stride,
                         Activation act, int workers) {
  check_kernel(weight, "transposed_conv2d");
  const int cin = static_cast<int>(weight.dims[0]);
  const int cout = static_cast<int>(weight.dims[1]);
  const int k = static_cast<int>(weight.dims[2]);
  if (cin != input.channels())
    throw DimensionError("transposed_conv2d: input has " + std::to_string(input.channels()) +
                         " channels, weights expect " + std::to_string(cin));
  if (stride < 1) throw DimensionError("transposed_conv2d: stride must be positive");
  check_bias(bias, weight.dims[1], "transposed_conv2d");
  const int pad = (k - 1) / 2;
  const int H = input.height();
  const int W = input.width();
  const int Ho = (H - 1) * stride - 2 * pad + k;
  const int Wo = (W - 1) * stride - 2 * pad + k;
  if (Ho <= 0 || Wo <= 0) throw DimensionError("transposed_conv2d: empty output");
  Tensor out(cout, Ho, Wo);
  parallel_for(0, cout, workers, [&](int co) {
    std::span<float> acc = out.channel(co);
    std::fill(acc.begin(), acc.end(), bias ? bias->values[co] : 0.0f);
    for (int ci = 0; ci < cin; ++ci) {
      std::span<const float> in = input.channel(ci);
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const float w =
              weight.values[((static_cast<std::size_t>(ci) * cout + co) * k + ky) * k + kx];
          if (w == 0.0f) continue;
          for (int iy = 0; iy < H; ++iy) {
            const int oy = iy * stride - pad + ky;
            if (oy < 0 || oy >= Ho) continue;
            const float* src = in.data() + static_cast<std::size_t>(iy) * W;
            float* dst = acc.data() + static_cast<std::size_t>(oy) * Wo;
            for (int ix = 0; ix < W; ++ix) {
              const int ox = ix * stride - pad + kx;
              if (ox >= 0 && ox < Wo) dst[ox] += w * src[ix];
            }
          }
        }
      }
    }
    if (act != Activation::kIdentity)
      for (float& v : acc) v = activate(v, act);
  });
  return out;
}

Tensor instance_norm(const Tensor& input, const Param* gamma, const Param* beta) {
  const int C = input.channels();
  if ((gamma == nullptr) != (beta == nullptr))
    throw DimensionError("instance_norm: gamma and beta must be given together");
  check_bias(gamma, static_cast<std::uint32_t>(C), "instance_norm");
  check_bias(beta, static_cast<std::uint32_t>(C), "instance_norm");
  Tensor out(C, input.height(), input.width());
  const double n = static_cast<double>(input.plane_size());
  if (n < 1) return out;
  for (int c = 0; c < C; ++c) {
    std::span<const float> in = input.channel(c);
    double mean = 0.0;
    for (float v : in) mean += v;
    mean /= n;
    double var = 0.0;
    for (float v : in) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + kInstanceNormEpsilon);
    const double g = gamma ? gamma->values[c] : 1.0;
    const double b = beta ? beta->values[c] : 0.0;
    std::span<float> dst = out.channel(c);
    for (std::size_t i = 0; i < in.size(); ++i)
      dst[i] = static_cast<float>(g * ((in[i] - mean) * inv_std) + b);
  }
  return out;
}

Tensor deformable_epipolar_conv(const Tensor& src_features, const SampleGrid& grid,
                                const Camera& src, const Param& weight, const Param* bias,
                                Activation act, int workers) {
  check_kernel(weight, "deformable_epipolar_conv");
  const int cout = static_cast<int>(weight.dims[0]);
  const int cin = static_cast<int>(weight.dims[1]);
  const int k = static_cast<int>(weight.dims[2]);
  if (cin != src_features.channels())
    throw DimensionError("deformable_epipolar_conv: feature map has " +
                         std::to_string(src_features.channels()) + " channels, weights expect " +
                         std::to_string(cin));
  if (k != grid.k())
    throw DimensionError("deformable_epipolar_conv: kernel size " + std::to_string(k) +
                         " does not match sample grid k=" + std::to_string(grid.k()));
  check_bias(bias, weight.dims[0], "deformable_epipolar_conv");
  const Tensor samples = gather(src_features, grid, src, workers);
  const int taps = k * k;
  Tensor out(cout, grid.height(), grid.width());
  parallel_for(0, cout, workers, [&](int co) {
    std::span<float> acc = out.channel(co);
    std::fill(acc.begin(), acc.end(), bias ? bias->values[co] : 0.0f);
    for (int ci = 0; ci < cin; ++ci) {
      for (int tap = 0; tap < taps; ++tap) {
        const float w = weight.values[(static_cast<std::size_t>(co) * cin + ci) * taps + tap];
        if (w == 0.0f) continue;
        std::span<const float> s = samples.channel(tap * cin + ci);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * s[i];
      }
    }
    if (act != Activation::kIdentity)
      for (float& v : acc) v = activate(v, act);
  });
  return out;
}

namespace {

struct AxisTaps {
  std::vector<int> i0, i1;
  std::vector<double> frac;
};

AxisTaps axis_taps(int in, int out) {
  AxisTaps taps;
  taps.i0.resize(out);
  taps.i1.resize(out);
  taps.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    if (s < 0.0) s = 0.0;
    int i = static_cast<int>(std::floor(s));
    if (i > in - 1) i = in - 1;
    taps.i0[o] = i;
    taps.i1[o] = std::min(i + 1, in - 1);
    taps.frac[o] = s - i;
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& input, int height, int width) {
  if (height <= 0 || width <= 0 || input.height() <= 0 || input.width() <= 0)
    throw DimensionError("resize_bilinear: empty input or output");
  const AxisTaps ty = axis_taps(input.height(), height);
  const AxisTaps tx = axis_taps(input.width(), width);
  Tensor out(input.channels(), height, width);
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < height; ++y) {
      const double fy = ty.frac[y];
      for (int x = 0; x < width; ++x) {
        const double fx = tx.frac[x];
        const double top = (1.0 - fx) * input.at(c, ty.i0[y], tx.i0[x]) +
                           fx * input.at(c, ty.i0[y], tx.i1[x]);
        const double bottom = (1.0 - fx) * input.at(c, ty.i1[y], tx.i0[x]) +
                              fx * input.at(c, ty.i1[y], tx.i1[x]);
        out.at(c, y, x) = static_cast<float>((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

ScalarMap resize_bilinear(const ScalarMap& input, int width, int height) {
  if (height <= 0 || width <= 0 || input.empty())
    throw DimensionError("resize_bilinear: empty input or output");
  const AxisTaps ty = axis_taps(input.height(), height);
  const AxisTaps tx = axis_taps(input.width(), width);
  ScalarMap out(width, height);
  for (int y = 0; y < height; ++y) {
    const double fy = ty.frac[y];
    for (int x = 0; x < width; ++x) {
      const double fx = tx.frac[x];
      const double top = (1.0 - fx) * input(tx.i0[x], ty.i0[y]) + fx * input(tx.i1[x], ty.i0[y]);
      const double bottom =
          (1.0 - fx) * input(tx.i0[x], ty.i1[y]) + fx * input(tx.i1[x], ty.i1[y]);
      out(x, y) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

Tensor upsample_nearest2x(const Tensor& input) {
  Tensor out(input.channels(), input.height() * 2, input.width() * 2);
  for (int c = 0; c < input.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) out.at(c, y, x) = input.at(c, y / 2, x / 2);
  return out;
}

Tensor concat_channels(std::span<const Tensor* const> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: nothing to concatenate");
  int channels = 0;
  for (const Tensor* t : parts) {
    if (t->height() != parts[0]->height() || t->width() != parts[0]->width())
      throw DimensionError("concat_channels: spatial size mismatch " + t->shape_string() +
                           " vs " + parts[0]->shape_string());
    channels += t->channels();
  }
  Tensor out(channels, parts[0]->height(), parts[0]->width());
  auto dst = out.data().begin();
  for (const Tensor* t : parts) dst = std::copy(t->data().begin(), t->data().end(), dst);
  return out;
}

void add_inplace(Tensor& target, const Tensor& other) {
  if (!target.same_shape(other))
    throw DimensionError("add: shape mismatch " + target.shape_string() + " vs " +
                         other.shape_string());
  auto dst = target.data();
  auto src = other.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace ibmvs::nn
