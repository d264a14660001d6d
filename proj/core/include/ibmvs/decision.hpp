#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ibmvs/geometry.hpp"
#include "ibmvs/grid.hpp"
#include "ibmvs/neural/networks.hpp"
#include "ibmvs/scene.hpp"

namespace ibmvs {

/// Per-pixel soft binary decision in [0, 1]: 1 means the true surface lies in
/// front of (nearer than) the current hypothesis.
struct SoftMask {
  ScalarMap value;
  /// 1 where the decision is defined and may be consumed.
  MaskMap valid;
  /// 1 where the hypothesis-predicted match lies inside the source image.
  MaskMap in_view;

  SoftMask() = default;
  SoftMask(int width, int height, double fill = 0.5)
      : value(width, height, fill), valid(width, height, 1), in_view(width, height, 1) {}

  int width() const { return value.width(); }
  int height() const { return value.height(); }
};

/// Throws InvariantError if any valid entry lies outside [0, 1].
void check_mask_range(const SoftMask& mask, const std::string& who);

struct DecisionContext {
  const View& ref;
  const View& src;
  const ScalarMap& H;
  int iteration = 0;
  InverseDepthInterval interval;
  int workers = 1;
};

struct Decision {
  SoftMask mask;
  /// Multi-level masks (quarter, half, full) from the neural oracle; empty
  /// for the other oracles.
  std::vector<Tensor> levels;
};

/// Produces a soft binary mask for a reference/source pair and hypothesis.
/// decide() must be safe to call concurrently.
class DecisionOracle {
 public:
  virtual ~DecisionOracle() = default;
  virtual std::string name() const = 0;
  /// Per-scene setup (e.g. feature extraction) before the first decide().
  virtual void prepare(const View& /*ref*/, std::span<const View* const> /*sources*/,
                       int /*workers*/) {}
  virtual Decision decide(const DecisionContext& ctx) const = 0;
};

/// B = 1 where d_gt < 1/H, else 0; invalid where d_gt is not a positive
/// finite depth or H is not positive.
SoftMask ground_truth_oracle(const ScalarMap& d_gt, const ScalarMap& H);

struct ZnccConfig {
  int window = 7;
  double probe_factor = 0.5;  // rho
  double sharpness = 10.0;    // gamma
  double texture_threshold = 1e-6;

  void validate() const;
};

/// Windowed ZNCC comparison of two probes at H +- rho * |step size| along the
/// fronto-parallel plane of each pixel.
/// B = sigmoid(gamma * (ZNCC(front) - ZNCC(behind))), front being the larger
/// inverse depth.
SoftMask photoconsistency_oracle(const View& ref, const View& src, const ScalarMap& H,
                                 int iteration, const InverseDepthInterval& interval,
                                 const ZnccConfig& cfg, int workers = 1);

/// Zero-mean normalized cross-correlation of two equally sized vectors; 0
/// when either is constant.
double zncc(std::span<const double> a, std::span<const double> b);

class GroundTruthOracle final : public DecisionOracle {
 public:
  std::string name() const override { return "gt"; }
  Decision decide(const DecisionContext& ctx) const override;
};

class PhotoconsistencyOracle final : public DecisionOracle {
 public:
  explicit PhotoconsistencyOracle(ZnccConfig cfg = {});
  std::string name() const override { return "zncc"; }
  Decision decide(const DecisionContext& ctx) const override;

 private:
  ZnccConfig cfg_;
};

/// Returns the same value everywhere; used for fixpoint checks.
class ConstantOracle final : public DecisionOracle {
 public:
  explicit ConstantOracle(double value = 0.5);
  std::string name() const override { return "constant"; }
  Decision decide(const DecisionContext& ctx) const override;

 private:
  double value_;
};

/// Three-level decision network over shared feature pyramids.
class NeuralOracle final : public DecisionOracle {
 public:
  explicit NeuralOracle(std::shared_ptr<const nn::NeuralModel> model);
  std::string name() const override { return "neural"; }
  void prepare(const View& ref, std::span<const View* const> sources, int workers) override;
  Decision decide(const DecisionContext& ctx) const override;

  const nn::NeuralModel& model() const { return *model_; }

 private:
  const nn::FeaturePyramid& features(const View& view) const;

  std::shared_ptr<const nn::NeuralModel> model_;
  std::map<const View*, nn::FeaturePyramid> cache_;
};

}  // namespace ibmvs
