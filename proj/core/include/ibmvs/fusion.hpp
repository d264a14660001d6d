#pragma once

#include <memory>
#include <span>
#include <string>

#include "ibmvs/decision.hpp"
#include "ibmvs/grid.hpp"

namespace ibmvs {

inline constexpr double kLogClamp = 1e-7;
inline constexpr double kWeightFloor = 1e-12;
inline constexpr double kHeuristicWeightEpsilon = 1e-6;

/// Natural-log binary entropy with b clamped to [1e-7, 1 - 1e-7].
double binary_entropy(double b);

/// Positive per-pixel fusion weights.
using WeightMap = ScalarMap;

ScalarMap entropy(const SoftMask& B);
/// W = exp(-w), floored at 1e-12.
WeightMap weight_from_logit(const ScalarMap& logits);
/// Training-free confidence: 1 - E(B) / ln 2 + 1e-6; 1e-6 where the decision
/// is invalid or its match fell outside the source image.
WeightMap heuristic_weight(const SoftMask& B);

/// H = sum_s W_s H_s / sum_s W_s, accumulated in source order.
ScalarMap fuse_hypotheses(std::span<const ScalarMap> hypotheses, std::span<const WeightMap> weights);
/// Unweighted mean; identical to fuse_hypotheses with unit weights.
ScalarMap naive_fuse(std::span<const ScalarMap> hypotheses);

/// Maps a decision to its fusion weight.
class WeightOracle {
 public:
  virtual ~WeightOracle() = default;
  virtual std::string name() const = 0;
  virtual WeightMap weigh(const Decision& decision) const = 0;
};

/// Unit weights everywhere; fusion reduces to the naive average.
class UniformWeights final : public WeightOracle {
 public:
  std::string name() const override { return "uniform"; }
  WeightMap weigh(const Decision& decision) const override;
};

class EntropyWeights final : public WeightOracle {
 public:
  std::string name() const override { return "entropy"; }
  WeightMap weigh(const Decision& decision) const override;
};

/// Weight network over the entropies of the multi-level decision masks.
/// Requires decisions from NeuralOracle.
class NeuralWeights final : public WeightOracle {
 public:
  explicit NeuralWeights(std::shared_ptr<const nn::NeuralModel> model);
  std::string name() const override { return "neural"; }
  WeightMap weigh(const Decision& decision) const override;

 private:
  std::shared_ptr<const nn::NeuralModel> model_;
};

}  // namespace ibmvs
