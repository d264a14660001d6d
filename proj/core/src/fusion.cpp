#include "ibmvs/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ibmvs/error.hpp"

namespace ibmvs {

double binary_entropy(double b) {
  const double c = std::clamp(b, kLogClamp, 1.0 - kLogClamp);
  return -(c * std::log(c) + (1.0 - c) * std::log(1.0 - c));
}

ScalarMap entropy(const SoftMask& B) {
  ScalarMap E(B.width(), B.height());
  for (std::size_t i = 0; i < E.size(); ++i) E[i] = binary_entropy(B.value[i]);
  return E;
}

WeightMap weight_from_logit(const ScalarMap& logits) {
  WeightMap W(logits.width(), logits.height());
  for (std::size_t i = 0; i < W.size(); ++i) W[i] = std::max(std::exp(-logits[i]), kWeightFloor);
  return W;
}

WeightMap heuristic_weight(const SoftMask& B) {
  WeightMap W(B.width(), B.height());
  for (std::size_t i = 0; i < W.size(); ++i) {
    if (!B.valid[i] || !B.in_view[i]) {
      W[i] = kHeuristicWeightEpsilon;
      continue;
    }
    W[i] = 1.0 - binary_entropy(B.value[i]) / std::numbers::ln2 + kHeuristicWeightEpsilon;
  }
  return W;
}

ScalarMap fuse_hypotheses(std::span<const ScalarMap> hypotheses,
                          std::span<const WeightMap> weights) {
  if (hypotheses.empty()) throw ConfigError("fuse_hypotheses: no source hypotheses");
  if (weights.size() != hypotheses.size())
    throw DimensionError("fuse_hypotheses: one weight map per hypothesis required");
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    require_same_shape(hypotheses[0], hypotheses[s], "fuse_hypotheses");
    require_same_shape(hypotheses[0], weights[s], "fuse_hypotheses");
  }
  ScalarMap fused(hypotheses[0].width(), hypotheses[0].height());
  // Accumulated as an offset from the first source: identical sources (and a
  // single source) reproduce it bit for bit, and the clamp keeps rounding from
  // leaving the convex hull.
  for (std::size_t i = 0; i < fused.size(); ++i) {
    const double base = hypotheses[0][i];
    double num = 0.0;
    double den = 0.0;
    double lo = base;
    double hi = base;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
      const double h = hypotheses[s][i];
      num += weights[s][i] * (h - base);
      den += weights[s][i];
      lo = std::min(lo, h);
      hi = std::max(hi, h);
    }
    fused[i] = std::clamp(base + num / den, lo, hi);
  }
  return fused;
}

ScalarMap naive_fuse(std::span<const ScalarMap> hypotheses) {
  if (hypotheses.empty()) throw ConfigError("naive_fuse: no source hypotheses");
  std::vector<WeightMap> unit(hypotheses.size(),
                              WeightMap(hypotheses[0].width(), hypotheses[0].height(), 1.0));
  return fuse_hypotheses(hypotheses, unit);
}

WeightMap UniformWeights::weigh(const Decision& decision) const {
  return WeightMap(decision.mask.width(), decision.mask.height(), 1.0);
}

WeightMap EntropyWeights::weigh(const Decision& decision) const {
  return heuristic_weight(decision.mask);
}

NeuralWeights::NeuralWeights(std::shared_ptr<const nn::NeuralModel> model)
    : model_(std::move(model)) {
  if (!model_) throw ConfigError("neural weights need a model");
}

WeightMap NeuralWeights::weigh(const Decision& decision) const {
  if (decision.levels.size() != nn::kNumLevels)
    throw ConfigError("neural weights require multi-level masks from the neural oracle");
  const std::array<Tensor, 3> masks{decision.levels[0], decision.levels[1], decision.levels[2]};
  const Tensor logit = model_->run_wnet(masks);
  ScalarMap w(logit.width(), logit.height());
  for (int y = 0; y < logit.height(); ++y)
    for (int x = 0; x < logit.width(); ++x) w(x, y) = logit.at(0, y, x);
  return weight_from_logit(w);
}

}  // namespace ibmvs
