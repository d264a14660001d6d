#include "ibmvs/engine.hpp"

#include <cmath>
#include <string>

#include "ibmvs/error.hpp"

namespace ibmvs {

void EngineConfig::validate() const {
  if (iterations < 1) throw ConfigError("iteration count T must be at least 1");
  if (workers < 1) throw ConfigError("worker count must be at least 1");
}

HypothesisMap init_hypothesis(const InverseDepthInterval& interval, int width, int height) {
  if (width <= 0 || height <= 0) throw DimensionError("init_hypothesis: zero-area map");
  return {ScalarMap(width, height, interval.midpoint), 0, interval};
}

double step_size(int iteration, double R) { return std::ldexp(R, -(iteration + 1)); }

ScalarMap update_hypothesis(const ScalarMap& H, const SoftMask& B, int iteration,
                            const InverseDepthInterval& interval) {
  require_same_shape(H, B.value, "update_hypothesis");
  const double step = step_size(iteration, interval.R);
  ScalarMap next(H.width(), H.height());
  for (std::size_t i = 0; i < H.size(); ++i) {
    if (!B.valid[i]) {
      next[i] = H[i];
      continue;
    }
    next[i] = interval.clamp(H[i] - step * (2.0 * B.value[i] - 1.0));
  }
  return next;
}

namespace {

void check_containment(const ScalarMap& H, const InverseDepthInterval& interval, int t) {
  for (std::size_t i = 0; i < H.size(); ++i) {
    const double h = H[i];
    if (!(h >= interval.lower() && h <= interval.upper() && h > 0.0))
      throw InvariantError("hypothesis left the inverse-depth interval at iteration " +
                           std::to_string(t));
  }
}

}  // namespace

EngineResult run_engine(const View& ref, std::span<const View* const> sources,
                        const InverseDepthInterval& interval, DecisionOracle& oracle,
                        const WeightOracle& weights, const EngineConfig& cfg) {
  cfg.validate();
  if (sources.empty()) throw ConfigError("engine needs at least one source view");
  for (const View* src : sources) src->camera.validate();
  ref.camera.validate();

  const int width = ref.camera.width;
  const int height = ref.camera.height;
  HypothesisMap state = init_hypothesis(interval, width, height);
  oracle.prepare(ref, sources, cfg.workers);

  std::optional<Trace> trace;
  if (cfg.record_trace) {
    trace.emplace();
    trace->hypotheses.push_back(state.values);
  }

  const int S = static_cast<int>(sources.size());
  for (int t = 0; t < cfg.iterations; ++t) {
    std::vector<ScalarMap> updated(S);
    std::vector<WeightMap> w(S);
    std::vector<SoftMask> masks;
    for (int s = 0; s < S; ++s) {
      const DecisionContext ctx{ref, *sources[s], state.values, t, interval, cfg.workers};
      Decision decision;
      const auto where = [&](const Error& e) {
        return "oracle '" + oracle.name() + "' failed at iteration " + std::to_string(t) +
               ", source " + std::to_string(s) + ": " + e.what();
      };
      try {
        decision = oracle.decide(ctx);
      } catch (const ConfigError& e) {
        throw ConfigError(where(e));
      } catch (const DimensionError& e) {
        throw DimensionError(where(e));
      } catch (const FormatError& e) {
        throw FormatError(where(e));
      } catch (const InvariantError& e) {
        throw InvariantError(where(e));
      }
      require_same_shape(decision.mask.value, state.values, "decision mask");
      check_mask_range(decision.mask, oracle.name());
      w[s] = weights.weigh(decision);
      updated[s] = update_hypothesis(state.values, decision.mask, t, interval);
      if (trace) masks.push_back(std::move(decision.mask));
    }
    state.values = fuse_hypotheses(updated, w);
    state.iteration = t + 1;
    check_containment(state.values, interval, t + 1);
    if (trace) {
      trace->hypotheses.push_back(state.values);
      trace->decisions.push_back(std::move(masks));
      trace->weights.push_back(std::move(w));
      trace->updates.push_back(std::move(updated));
    }
  }

  EngineResult result;
  result.depth = ScalarMap(width, height);
  for (std::size_t i = 0; i < result.depth.size(); ++i) result.depth[i] = 1.0 / state.values[i];
  result.hypothesis = std::move(state);
  result.trace = std::move(trace);
  return result;
}

EngineResult run_engine(const SceneBundle& scene, const InverseDepthInterval& interval,
                        DecisionOracle& oracle, const WeightOracle& weights,
                        const EngineConfig& cfg) {
  if (scene.size() < 2) throw ConfigError("scene needs a reference and at least one source");
  std::vector<const View*> sources;
  for (int i = 1; i < scene.size(); ++i) sources.push_back(&scene.views[i]);
  return run_engine(scene.views[0], sources, interval, oracle, weights, cfg);
}

}  // namespace ibmvs

