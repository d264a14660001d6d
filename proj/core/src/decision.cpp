#include "ibmvs/decision.hpp"

#include <cmath>
#include <vector>

#include "ibmvs/engine.hpp"
#include "ibmvs/error.hpp"
#include "ibmvs/parallel.hpp"

namespace ibmvs {

void check_mask_range(const SoftMask& mask, const std::string& who) {
  for (std::size_t i = 0; i < mask.value.size(); ++i) {
    if (!mask.valid[i]) continue;
    const double b = mask.value[i];
    if (!(b >= 0.0 && b <= 1.0))
      throw InvariantError(who + ": decision value " + std::to_string(b) + " outside [0, 1]");
  }
}

SoftMask ground_truth_oracle(const ScalarMap& d_gt, const ScalarMap& H) {
  require_same_shape(d_gt, H, "ground_truth_oracle");
  SoftMask mask(H.width(), H.height(), 0.0);
  for (std::size_t i = 0; i < H.size(); ++i) {
    const double d = d_gt[i];
    const double h = H[i];
    if (!std::isfinite(d) || !(d > 0.0) || !(h > 0.0)) {
      mask.valid[i] = 0;
      mask.value[i] = 0.5;
      continue;
    }
    mask.value[i] = d < 1.0 / h ? 1.0 : 0.0;
  }
  return mask;
}

void ZnccConfig::validate() const {
  if (window < 1 || window % 2 == 0) throw ConfigError("zncc window must be odd and positive");
  if (!(probe_factor > 0.0 && probe_factor <= 1.0))
    throw ConfigError("zncc probe factor must lie in (0, 1]");
  if (!(sharpness > 0.0) || !std::isfinite(sharpness))
    throw ConfigError("zncc sharpness must be positive");
}

double zncc(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n == 0 || b.size() != n) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  const double denom = std::sqrt(va * vb);
  if (!(denom > 1e-300)) return 0.0;
  return cov / denom;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double variance(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

}  // namespace

SoftMask photoconsistency_oracle(const View& ref, const View& src, const ScalarMap& H,
                                 int iteration, const InverseDepthInterval& interval,
                                 const ZnccConfig& cfg, int workers) {
  cfg.validate();
  const Camera& rc = ref.camera;
  if (H.width() != rc.width || H.height() != rc.height)
    throw DimensionError("photoconsistency_oracle: hypothesis does not match reference camera");
  if (ref.image.width() != rc.width || ref.image.height() != rc.height ||
      src.image.width() != src.camera.width || src.image.height() != src.camera.height)
    throw DimensionError("photoconsistency_oracle: image does not match its camera");
  if (ref.image.channels() != src.image.channels())
    throw DimensionError("photoconsistency_oracle: reference and source channel counts differ");

  const PairGeometry pair(rc, src.camera);
  const int C = ref.image.channels();
  const int radius = cfg.window / 2;
  const int n = cfg.window * cfg.window * C;
  const double probe = cfg.probe_factor * std::abs(step_size(iteration, interval.R));
  SoftMask mask(H.width(), H.height(), 0.5);

  parallel_for(0, H.height(), workers, [&](int y) {
    std::vector<double> r(n), s(n);
    std::vector<float> texel(C);
    for (int x = 0; x < H.width(); ++x) {
      const double h = H(x, y);
      if (!(h > 0.0)) {
        mask.valid(x, y) = 0;
        continue;
      }
      const PixelCoord p{static_cast<double>(x), static_cast<double>(y)};
      const double h_front = interval.clamp(h + probe);
      const double h_behind = interval.clamp(h - probe);
      const auto cf = pair.project(p, h_front);
      const auto cb = pair.project(p, h_behind);
      if (!cf || !cb || !src.camera.contains(*cf) || !src.camera.contains(*cb)) {
        mask.in_view(x, y) = 0;
        continue;  // uninformative: B stays 0.5
      }
      int idx = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int qx = std::clamp(x + dx, 0, H.width() - 1);
          const int qy = std::clamp(y + dy, 0, H.height() - 1);
          for (int c = 0; c < C; ++c) r[idx++] = ref.image.at(c, qy, qx);
        }
      }
      if (variance(r) < cfg.texture_threshold) continue;  // textureless: B = 0.5

      double score[2] = {0.0, 0.0};
      bool defined = true;
      const double probes[2] = {h_front, h_behind};
      for (int k = 0; k < 2 && defined; ++k) {
        idx = 0;
        for (int dy = -radius; dy <= radius && defined; ++dy) {
          for (int dx = -radius; dx <= radius; ++dx) {
            const int qx = std::clamp(x + dx, 0, H.width() - 1);
            const int qy = std::clamp(y + dy, 0, H.height() - 1);
            const auto q = pair.project(PixelCoord{static_cast<double>(qx), static_cast<double>(qy)},
                                        probes[k]);
            if (!q) {
              defined = false;
              break;
            }
            bilinear_sample(src.image, *q, texel);
            for (int c = 0; c < C; ++c) s[idx++] = texel[c];
          }
        }
        if (defined) score[k] = zncc(r, s);
      }
      if (!defined) continue;
      mask.value(x, y) = sigmoid(cfg.sharpness * (score[0] - score[1]));
    }
  });
  return mask;
}

Decision GroundTruthOracle::decide(const DecisionContext& ctx) const {
  if (!ctx.ref.depth) throw ConfigError("ground-truth oracle needs a reference depth map");
  Decision d;
  d.mask = ground_truth_oracle(*ctx.ref.depth, ctx.H);
  return d;
}

PhotoconsistencyOracle::PhotoconsistencyOracle(ZnccConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Decision PhotoconsistencyOracle::decide(const DecisionContext& ctx) const {
  Decision d;
  d.mask = photoconsistency_oracle(ctx.ref, ctx.src, ctx.H, ctx.iteration, ctx.interval, cfg_,
                                   ctx.workers);
  return d;
}

ConstantOracle::ConstantOracle(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("constant decision must lie in [0, 1]");
}

Decision ConstantOracle::decide(const DecisionContext& ctx) const {
  Decision d;
  d.mask = SoftMask(ctx.H.width(), ctx.H.height(), value_);
  return d;
}

NeuralOracle::NeuralOracle(std::shared_ptr<const nn::NeuralModel> model)
    : model_(std::move(model)) {
  if (!model_) throw ConfigError("neural oracle needs a model");
}

void NeuralOracle::prepare(const View& ref, std::span<const View* const> sources, int /*workers*/) {
  cache_.clear();
  cache_.emplace(&ref, model_->run_fpn(ref.image));
  for (const View* v : sources)
    if (!cache_.count(v)) cache_.emplace(v, model_->run_fpn(v->image));
}

const nn::FeaturePyramid& NeuralOracle::features(const View& view) const {
  const auto it = cache_.find(&view);
  if (it == cache_.end())
    throw InvariantError("neural oracle: features requested for an unprepared view");
  return it->second;
}

Decision NeuralOracle::decide(const DecisionContext& ctx) const {
  const auto masks = model_->run_dnet(features(ctx.ref), features(ctx.src), ctx.ref.camera,
                                      ctx.src.camera, ctx.H);
  Decision d;
  d.mask = SoftMask(ctx.H.width(), ctx.H.height());
  const PairGeometry pair(ctx.ref.camera, ctx.src.camera);
  const Tensor& full = masks[2];
  for (int y = 0; y < ctx.H.height(); ++y) {
    for (int x = 0; x < ctx.H.width(); ++x) {
      d.mask.value(x, y) = full.at(0, y, x);
      const auto q = pair.project(PixelCoord{double(x), double(y)}, ctx.H(x, y));
      d.mask.in_view(x, y) = q && ctx.src.camera.contains(*q) ? 1 : 0;
    }
  }
  d.levels.assign(masks.begin(), masks.end());
  return d;
}

}  // namespace ibmvs
