#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ibmvs/geometry.hpp"
#include "ibmvs/neural/ops.hpp"
#include "ibmvs/neural/weights.hpp"
#include "ibmvs/sampler.hpp"
#include "ibmvs/tensor.hpp"

namespace ibmvs::nn {

/// Feature channels per pyramid level: quarter, half, full resolution.
inline constexpr std::array<int, 3> kFeatureChannels{32, 16, 8};
inline constexpr int kNumLevels = 3;
inline constexpr int kEpipolarKernelSize = 5;
inline constexpr int kImageChannels = 3;

enum class OpKind {
  kConv,
  kDeformConv,
  kTransConv,
  kConcat,
  kDownHalf,
  kDownQuarter,
  kUpDouble,
};

/// One row of a layer table, with channel counts as stated there.
struct LayerRow {
  std::string output;
  std::vector<std::string> inputs;
  int stated_cin = 0;
  int stated_cout = 0;
  OpKind op = OpKind::kConv;
  int kernel = 0;
  int stride = 1;
  bool bias = true;
  Activation act = Activation::kLeakyReLU;
  /// Encoder scale (0 = level resolution, 1 = half, 2 = quarter) of the
  /// sample grid used by deformable rows.
  int grid_scale = 0;
};

/// A layer with channel counts resolved by forward shape propagation.
struct ResolvedLayer {
  LayerRow row;
  int cin = 0;
  int cout = 0;
};

/// Layer graph with propagated shapes. Rows whose stated input/output
/// channel counts disagree with the propagated ones are recorded in
/// `discrepancies`; execution always uses the propagated shapes.
struct Graph {
  std::string prefix;
  std::map<std::string, int> inputs;
  std::vector<ResolvedLayer> layers;
  std::vector<std::string> discrepancies;

  std::string weight_name(const ResolvedLayer& layer) const;
  std::string bias_name(const ResolvedLayer& layer) const;
  const ResolvedLayer& layer(const std::string& output) const;
};

/// Resolves shapes of `rows` given the channel counts of the graph inputs.
Graph resolve_graph(std::string prefix, const std::vector<LayerRow>& rows,
                    const std::map<std::string, int>& inputs);

std::vector<LayerRow> dnet_rows(int level);
std::vector<LayerRow> wnet_rows(int level);
Graph dnet_graph(int level);
Graph wnet_graph(int level);

Manifest graph_manifest(const Graph& graph);
Manifest fpn_manifest();
/// FPN, then D-Net levels 0..2, then W-Net levels 0..2.
Manifest full_manifest();

/// Epipolar sampling context for one encoder scale of a D-Net level.
struct EpipolarScale {
  SampleGrid grid;
  Camera src;
};

/// Sample grids at the level's own, half and quarter resolution, built from
/// the level-resolution hypothesis (downscaled bilinearly) and cameras
/// resized to each scale.
std::array<EpipolarScale, 3> build_level_grids(const Camera& ref_level, const Camera& src_level,
                                               const ScalarMap& H_level, int workers = 1);

struct FeaturePyramid {
  std::array<Tensor, 3> levels;  // quarter, half, full
};

struct LevelOutput {
  Tensor out;       // B_l (sigmoid) for D-Net, logit w_l for W-Net
  Tensor features;  // Fo_l
};

/// Inference-only executor for the feature pyramid, the three-level decision
/// network and the three-level weight network.
class NeuralModel {
 public:
  /// Throws FormatError listing every tensor that does not match
  /// full_manifest().
  explicit NeuralModel(WeightStore weights, int workers = 1);

  const WeightStore& weights() const { return weights_; }
  int workers() const { return workers_; }

  FeaturePyramid run_fpn(const Tensor& image) const;

  LevelOutput run_dnet_level(int level, const Tensor& feat_ref, const Tensor& feat_src,
                             const std::array<EpipolarScale, 3>& grids,
                             const Tensor* fo_prev) const;
  LevelOutput run_wnet_level(int level, const Tensor& entropy, const Tensor* fo_prev) const;

  /// All three decision levels for one source view; masks[2] is full
  /// resolution. H is the full-resolution inverse-depth hypothesis.
  std::array<Tensor, 3> run_dnet(const FeaturePyramid& ref, const FeaturePyramid& src,
                                 const Camera& ref_cam, const Camera& src_cam,
                                 const ScalarMap& H) const;
  /// Full-resolution weight logit from the three decision masks.
  Tensor run_wnet(const std::array<Tensor, 3>& masks) const;

 private:
  std::map<std::string, Tensor> run_graph(const Graph& graph, std::map<std::string, Tensor> values,
                                          const std::array<EpipolarScale, 3>* grids) const;

  WeightStore weights_;
  int workers_ = 1;
  std::array<Graph, 3> dnet_;
  std::array<Graph, 3> wnet_;
};

/// Entropy map of a mask tensor, elementwise, as a (1, H, W) tensor.
Tensor entropy_tensor(const Tensor& mask);

}  // namespace ibmvs::nn
