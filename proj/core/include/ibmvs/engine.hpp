#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ibmvs/decision.hpp"
#include "ibmvs/fusion.hpp"
#include "ibmvs/geometry.hpp"
#include "ibmvs/grid.hpp"
#include "ibmvs/scene.hpp"

namespace ibmvs {

/// Per-pixel inverse-depth hypothesis at iteration `iteration`.
struct HypothesisMap {
  ScalarMap values;
  int iteration = 0;
  InverseDepthInterval interval;
};

struct EngineConfig {
  int iterations = 8;  // T
  bool record_trace = false;
  int workers = 1;

  void validate() const;
};

/// Per-iteration snapshots: hypotheses[t] is H^t (t = 0..T); decisions,
/// weights and updates are indexed [t][source].
struct Trace {
  std::vector<ScalarMap> hypotheses;
  std::vector<std::vector<SoftMask>> decisions;
  std::vector<std::vector<WeightMap>> weights;
  std::vector<std::vector<ScalarMap>> updates;
};

struct EngineResult {
  ScalarMap depth;  // 1 / H^T
  HypothesisMap hypothesis;
  std::optional<Trace> trace;
};

/// Constant map at the interval midpoint, iteration 0.
HypothesisMap init_hypothesis(const InverseDepthInterval& interval, int width, int height);

/// Signed step size R / 2^(t + 1).
double step_size(int iteration, double R);

/// H - step_size(t, R) * (2B - 1), clamped to the interval. Invalid decisions
/// leave the hypothesis unchanged.
ScalarMap update_hypothesis(const ScalarMap& H, const SoftMask& B, int iteration,
                            const InverseDepthInterval& interval);

/// Iterative binary-decision depth inference for one reference view.
/// Iterations are sequential; sources are evaluated in order and fused in a
/// fixed order, so the result does not depend on cfg.workers.
EngineResult run_engine(const View& ref, std::span<const View* const> sources,
                        const InverseDepthInterval& interval, DecisionOracle& oracle,
                        const WeightOracle& weights, const EngineConfig& cfg);

/// Convenience overload: view 0 is the reference, views 1..S the sources.
EngineResult run_engine(const SceneBundle& scene, const InverseDepthInterval& interval,
                        DecisionOracle& oracle, const WeightOracle& weights,
                        const EngineConfig& cfg);

}  // namespace ibmvs
