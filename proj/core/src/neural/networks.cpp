#include "ibmvs/neural/networks.hpp"

#include <algorithm>
#include <cctype>

#include "ibmvs/error.hpp"
#include "ibmvs/fusion.hpp"

namespace ibmvs::nn {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool has_params(OpKind op) {
  return op == OpKind::kConv || op == OpKind::kDeformConv || op == OpKind::kTransConv;
}

LayerRow conv(std::string out, std::string in, int cin, int cout, int k = 3, int stride = 1) {
  LayerRow r;
  r.output = std::move(out);
  r.inputs = {std::move(in)};
  r.stated_cin = cin;
  r.stated_cout = cout;
  r.op = OpKind::kConv;
  r.kernel = k;
  r.stride = stride;
  return r;
}

LayerRow deform(std::string out, std::string in, int cin, int cout, int grid_scale) {
  LayerRow r = conv(std::move(out), std::move(in), cin, cout, kEpipolarKernelSize);
  r.op = OpKind::kDeformConv;
  r.grid_scale = grid_scale;
  return r;
}

LayerRow tconv(std::string out, std::string in, int cin, int cout) {
  LayerRow r = conv(std::move(out), std::move(in), cin, cout, 4, 2);
  r.op = OpKind::kTransConv;
  r.bias = false;
  return r;
}

LayerRow concat(std::string out, std::vector<std::string> in, int channels) {
  LayerRow r;
  r.output = std::move(out);
  r.inputs = std::move(in);
  r.stated_cin = channels;
  r.stated_cout = channels;
  r.op = OpKind::kConcat;
  r.act = Activation::kIdentity;
  return r;
}

LayerRow resample(std::string out, std::string in, int channels, OpKind op) {
  LayerRow r = concat(std::move(out), {std::move(in)}, channels);
  r.op = op;
  return r;
}

}  // namespace

std::string Graph::weight_name(const ResolvedLayer& layer) const {
  return prefix + "." + lower(layer.row.output) + ".weight";
}

std::string Graph::bias_name(const ResolvedLayer& layer) const {
  return prefix + "." + lower(layer.row.output) + ".bias";
}

const ResolvedLayer& Graph::layer(const std::string& output) const {
  for (const auto& l : layers)
    if (l.row.output == output) return l;
  throw InvariantError(prefix + ": no layer named " + output);
}

Graph resolve_graph(std::string prefix, const std::vector<LayerRow>& rows,
                    const std::map<std::string, int>& inputs) {
  Graph g;
  g.prefix = std::move(prefix);
  g.inputs = inputs;
  std::map<std::string, int> channels = inputs;
  for (const auto& row : rows) {
    ResolvedLayer layer;
    layer.row = row;
    for (const auto& in : row.inputs) {
      const auto it = channels.find(in);
      if (it == channels.end())
        throw InvariantError(g.prefix + "." + row.output + ": unknown input " + in);
      layer.cin += it->second;
    }
    if (row.op != OpKind::kConcat && row.inputs.size() != 1)
      throw InvariantError(g.prefix + "." + row.output + ": expects exactly one input");
    layer.cout = has_params(row.op) ? row.stated_cout : layer.cin;
    if (layer.cin != row.stated_cin)
      g.discrepancies.push_back(g.prefix + "." + row.output + ": stated #C_in " +
                                std::to_string(row.stated_cin) + ", propagated " +
                                std::to_string(layer.cin) + " (using propagated)");
    if (layer.cout != row.stated_cout)
      g.discrepancies.push_back(g.prefix + "." + row.output + ": stated #C_out " +
                                std::to_string(row.stated_cout) + ", propagated " +
                                std::to_string(layer.cout) + " (using propagated)");
    channels[row.output] = layer.cout;
    g.layers.push_back(std::move(layer));
  }
  return g;
}

std::vector<LayerRow> dnet_rows(int level) {
  if (level < 0 || level >= kNumLevels) throw ConfigError("D-Net level must be 0, 1 or 2");
  const int F = kFeatureChannels[level];
  std::vector<LayerRow> rows = {
      conv("Conv1", "FeatR", F, F),
      deform("DConv1", "FeatS", F, F, 0),
      concat("Conc1", {"Conv1", "DConv1"}, 2 * F),
      conv("Conv2", "Conc1", 2 * F, 2 * F),
      conv("Sc1", "Conv2", 2 * F, 2 * F, 3, 2),
      resample("FeatRHalf", "FeatR", F, OpKind::kDownHalf),
      resample("FeatSHalf", "FeatS", F, OpKind::kDownHalf),
      conv("Conv3", "FeatRHalf", F, F),
      deform("DConv2", "FeatSHalf", F, F, 1),
      concat("Conc2", {"Conv3", "DConv2"}, 2 * F),
      conv("Conv4", "Conc2", 2 * F, 2 * F),
  };
  if (level == 0) {
    rows.push_back(concat("Conc3", {"Sc1", "Conv4"}, 4 * F));
    rows.push_back(conv("Conv5", "Conc3", 4 * F, 4 * F));
  } else {
    const int Fp = kFeatureChannels[level - 1];
    rows.push_back(concat("Conc3", {"FoPrev", "Sc1", "Conv4"}, 4 * F + 4 * Fp));
    rows.push_back(conv("ConvPr", "Conc3", 4 * F + 4 * Fp, 4 * F));
    rows.push_back(conv("Conv5", "ConvPr", 4 * F, 4 * F));
  }
  const std::vector<LayerRow> tail = {
      conv("Sc2", "Conv5", 4 * F, 4 * F, 3, 2),
      resample("FeatRQuarter", "FeatR", F, OpKind::kDownQuarter),
      resample("FeatSQuarter", "FeatS", F, OpKind::kDownQuarter),
      conv("Conv6", "FeatRQuarter", F, F),
      deform("DConv3", "FeatSQuarter", F, F, 2),
      concat("Conc4", {"Conv6", "DConv3"}, 2 * F),
      conv("Conv7", "Conc4", 2 * F, 2 * F),
      concat("Conc5", {"Sc2", "Conv7"}, 6 * F),
      conv("Conv8", "Conc5", 6 * F, 6 * F),
      conv("Conv9", "Conv8", 6 * F, 6 * F),
      conv("Conv10", "Conv9", 6 * F, 6 * F),
      tconv("UConv1", "Conv10", 6 * F, 6 * F),
      concat("Conc6", {"Conv5", "UConv1"}, 10 * F),
      conv("Conv11", "Conc6", 10 * F, 4 * F),
      conv("Conv12", "Conv11", 4 * F, 4 * F),
      tconv("UConv2", "Conv12", 4 * F, 4 * F),
      concat("Conc7", {"Conv2", "UConv2"}, 6 * F),
      conv("Fo", "Conc7", 6 * F, 4 * F),
  };
  rows.insert(rows.end(), tail.begin(), tail.end());
  LayerRow mask = conv("Mask", "Fo", 4 * F, 1);
  mask.bias = false;
  mask.act = Activation::kSigmoid;
  rows.push_back(mask);
  return rows;
}

std::vector<LayerRow> wnet_rows(int level) {
  if (level < 0 || level >= kNumLevels) throw ConfigError("W-Net level must be 0, 1 or 2");
  const int F = kFeatureChannels[level];
  std::vector<LayerRow> rows;
  if (level == 0) {
    rows.push_back(conv("Conv1", "E", 1, 2 * F));
  } else {
    const int Fp = kFeatureChannels[level - 1];
    rows.push_back(conv("Conv0", "E", 1, F));
    rows.push_back(resample("FoUp", "FoPrev", Fp / 2, OpKind::kUpDouble));
    rows.push_back(conv("ConvPr", "FoUp", Fp / 2, F));
    rows.push_back(concat("Conc1", {"Conv0", "ConvPr"}, 2 * F));
    rows.push_back(conv("Conv1", "Conc1", 2 * F, 2 * F));
  }
  rows.push_back(conv("Conv2", "Conv1", 2 * F, 2 * F));
  rows.push_back(conv("Conv3", "Conv2", 2 * F, F));
  // Stated with #C_in = 2F_l; Conv3 produces F_l, resolved by propagation.
  rows.push_back(conv("Fo", "Conv3", 2 * F, F / 2));
  LayerRow logit = conv("Logit", "Fo", F / 2, 1);
  logit.bias = false;
  logit.act = Activation::kIdentity;
  rows.push_back(logit);
  return rows;
}

Graph dnet_graph(int level) {
  std::map<std::string, int> inputs{{"FeatR", kFeatureChannels[level]},
                                    {"FeatS", kFeatureChannels[level]}};
  if (level > 0) inputs["FoPrev"] = 4 * kFeatureChannels[level - 1];
  return resolve_graph("dnet.l" + std::to_string(level), dnet_rows(level), inputs);
}

Graph wnet_graph(int level) {
  std::map<std::string, int> inputs{{"E", 1}};
  if (level > 0) inputs["FoPrev"] = kFeatureChannels[level - 1] / 2;
  return resolve_graph("wnet.l" + std::to_string(level), wnet_rows(level), inputs);
}

Manifest graph_manifest(const Graph& graph) {
  Manifest m;
  for (const auto& layer : graph.layers) {
    if (!has_params(layer.row.op)) continue;
    const auto k = static_cast<std::uint32_t>(layer.row.kernel);
    const auto cin = static_cast<std::uint32_t>(layer.cin);
    const auto cout = static_cast<std::uint32_t>(layer.cout);
    if (layer.row.op == OpKind::kTransConv)
      m.push_back({graph.weight_name(layer), {cin, cout, k, k}});
    else
      m.push_back({graph.weight_name(layer), {cout, cin, k, k}});
    if (layer.row.bias) m.push_back({graph.bias_name(layer), {cout}});
  }
  return m;
}

namespace {

struct FpnConv {
  const char* name;
  std::uint32_t cin, cout, k;
  int stride;
};

// Conv + instance norm + ReLU blocks of the feature pyramid.
constexpr FpnConv kFpnBlocks[] = {
    {"conv0_0", 3, 8, 3, 1},   {"conv0_1", 8, 8, 3, 1},   {"conv1_0", 8, 16, 5, 2},
    {"conv1_1", 16, 16, 3, 1}, {"conv1_2", 16, 16, 3, 1}, {"conv2_0", 16, 32, 5, 2},
    {"conv2_1", 32, 32, 3, 1}, {"conv2_2", 32, 32, 3, 1},
};

}  // namespace

Manifest fpn_manifest() {
  Manifest m;
  for (const auto& b : kFpnBlocks) {
    const std::string base = std::string("fpn.") + b.name;
    m.push_back({base + ".weight", {b.cout, b.cin, b.k, b.k}});
    m.push_back({base + ".norm.weight", {b.cout}});
    m.push_back({base + ".norm.bias", {b.cout}});
  }
  m.push_back({"fpn.out1.weight", {32, 32, 1, 1}});
  m.push_back({"fpn.inner1.weight", {32, 16, 1, 1}});
  m.push_back({"fpn.inner1.bias", {32}});
  m.push_back({"fpn.inner2.weight", {32, 8, 1, 1}});
  m.push_back({"fpn.inner2.bias", {32}});
  m.push_back({"fpn.out2.weight", {16, 32, 3, 3}});
  m.push_back({"fpn.out3.weight", {8, 32, 3, 3}});
  return m;
}

Manifest full_manifest() {
  Manifest m = fpn_manifest();
  for (int l = 0; l < kNumLevels; ++l) {
    const auto part = graph_manifest(dnet_graph(l));
    m.insert(m.end(), part.begin(), part.end());
  }
  for (int l = 0; l < kNumLevels; ++l) {
    const auto part = graph_manifest(wnet_graph(l));
    m.insert(m.end(), part.begin(), part.end());
  }
  return m;
}

std::array<EpipolarScale, 3> build_level_grids(const Camera& ref_level, const Camera& src_level,
                                               const ScalarMap& H_level, int workers) {
  std::array<EpipolarScale, 3> out;
  for (int s = 0; s < 3; ++s) {
    const int w = H_level.width() >> s;
    const int h = H_level.height() >> s;
    if (w < 1 || h < 1) throw DimensionError("build_level_grids: level too small");
    const ScalarMap H = s == 0 ? H_level : resize_bilinear(H_level, w, h);
    const Camera ref = s == 0 ? ref_level : resize_camera(ref_level, w, h);
    const int sw = src_level.width >> s;
    const int sh = src_level.height >> s;
    out[s].src = s == 0 ? src_level : resize_camera(src_level, sw, sh);
    out[s].grid = build_sample_grid(ref, out[s].src, H, kEpipolarKernelSize, workers);
  }
  return out;
}

NeuralModel::NeuralModel(WeightStore weights, int workers)
    : weights_(std::move(weights)), workers_(std::max(1, workers)) {
  const auto problems = check_manifest(weights_, full_manifest());
  if (!problems.empty()) {
    std::string msg = "neural weights do not match the network manifest:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw FormatError(msg);
  }
  for (int l = 0; l < kNumLevels; ++l) {
    dnet_[l] = dnet_graph(l);
    wnet_[l] = wnet_graph(l);
  }
}

FeaturePyramid NeuralModel::run_fpn(const Tensor& image) const {
  if (image.height() % 4 != 0 || image.width() % 4 != 0)
    throw DimensionError("run_fpn: image size " + image.shape_string() +
                         " is not divisible by 4");
  Tensor x;
  if (image.channels() == kImageChannels) {
    x = image;
  } else if (image.channels() == 1) {
    const Tensor* parts[] = {&image, &image, &image};
    x = concat_channels(parts);
  } else {
    throw DimensionError("run_fpn: expected 1 or 3 image channels, got " +
                         std::to_string(image.channels()));
  }
  const auto block = [&](const Tensor& in, const FpnConv& b) {
    const std::string base = std::string("fpn.") + b.name;
    Tensor y = conv2d(in, weights_.get(base + ".weight"), nullptr, b.stride, Activation::kIdentity,
                      workers_);
    y = instance_norm(y, &weights_.get(base + ".norm.weight"), &weights_.get(base + ".norm.bias"));
    apply_activation(y, Activation::kReLU);
    return y;
  };
  Tensor c0 = block(block(x, kFpnBlocks[0]), kFpnBlocks[1]);
  Tensor c1 = block(block(block(c0, kFpnBlocks[2]), kFpnBlocks[3]), kFpnBlocks[4]);
  Tensor c2 = block(block(block(c1, kFpnBlocks[5]), kFpnBlocks[6]), kFpnBlocks[7]);

  FeaturePyramid pyr;
  pyr.levels[0] =
      conv2d(c2, weights_.get("fpn.out1.weight"), nullptr, 1, Activation::kIdentity, workers_);
  Tensor inner = upsample_nearest2x(c2);
  add_inplace(inner, conv2d(c1, weights_.get("fpn.inner1.weight"), &weights_.get("fpn.inner1.bias"),
                            1, Activation::kIdentity, workers_));
  pyr.levels[1] =
      conv2d(inner, weights_.get("fpn.out2.weight"), nullptr, 1, Activation::kIdentity, workers_);
  inner = upsample_nearest2x(inner);
  add_inplace(inner, conv2d(c0, weights_.get("fpn.inner2.weight"), &weights_.get("fpn.inner2.bias"),
                            1, Activation::kIdentity, workers_));
  pyr.levels[2] =
      conv2d(inner, weights_.get("fpn.out3.weight"), nullptr, 1, Activation::kIdentity, workers_);
  return pyr;
}

std::map<std::string, Tensor> NeuralModel::run_graph(
    const Graph& graph, std::map<std::string, Tensor> values,
    const std::array<EpipolarScale, 3>* grids) const {
  for (const auto& [name, channels] : graph.inputs) {
    const auto it = values.find(name);
    if (it == values.end()) throw DimensionError(graph.prefix + ": missing input " + name);
    if (it->second.channels() != channels)
      throw DimensionError(graph.prefix + ": input " + name + " has " +
                           std::to_string(it->second.channels()) + " channels, expected " +
                           std::to_string(channels));
  }
  for (const auto& layer : graph.layers) {
    const LayerRow& row = layer.row;
    std::vector<const Tensor*> in;
    for (const auto& name : row.inputs) in.push_back(&values.at(name));
    const std::string where = graph.prefix + "." + row.output;
    int cin = 0;
    for (const Tensor* t : in) cin += t->channels();
    if (cin != layer.cin)
      throw DimensionError(where + ": got " + std::to_string(cin) + " input channels, expected " +
                           std::to_string(layer.cin));
    const Param* weight = has_params(row.op) ? &weights_.get(graph.weight_name(layer)) : nullptr;
    const Param* bias = has_params(row.op) && row.bias ? &weights_.get(graph.bias_name(layer)) : nullptr;
    Tensor out;
    try {
      switch (row.op) {
        case OpKind::kConv:
          out = conv2d(*in[0], *weight, bias, row.stride, row.act, workers_);
          break;
        case OpKind::kDeformConv: {
          if (!grids) throw DimensionError("no sample grids supplied");
          const EpipolarScale& s = (*grids)[row.grid_scale];
          if (s.grid.width() != in[0]->width() || s.grid.height() != in[0]->height())
            throw DimensionError("sample grid does not match feature resolution");
          out = deformable_epipolar_conv(*in[0], s.grid, s.src, *weight, bias, row.act, workers_);
          break;
        }
        case OpKind::kTransConv:
          out = transposed_conv2d(*in[0], *weight, bias, row.stride, row.act, workers_);
          break;
        case OpKind::kConcat:
          out = concat_channels(in);
          break;
        case OpKind::kDownHalf:
          out = resize_bilinear(*in[0], in[0]->height() / 2, in[0]->width() / 2);
          break;
        case OpKind::kDownQuarter:
          out = resize_bilinear(*in[0], in[0]->height() / 4, in[0]->width() / 4);
          break;
        case OpKind::kUpDouble:
          out = resize_bilinear(*in[0], in[0]->height() * 2, in[0]->width() * 2);
          break;
      }
    } catch (const DimensionError& e) {
      throw DimensionError(where + ": " + e.what());
    }
    if (out.channels() != layer.cout)
      throw DimensionError(where + ": produced " + std::to_string(out.channels()) +
                           " channels, expected " + std::to_string(layer.cout));
    values[row.output] = std::move(out);
  }
  return values;
}

LevelOutput NeuralModel::run_dnet_level(int level, const Tensor& feat_ref, const Tensor& feat_src,
                                        const std::array<EpipolarScale, 3>& grids,
                                        const Tensor* fo_prev) const {
  if (level < 0 || level >= kNumLevels) throw ConfigError("D-Net level must be 0, 1 or 2");
  if ((level > 0) != (fo_prev != nullptr))
    throw DimensionError("run_dnet_level: previous-level features required iff level > 0");
  if (feat_ref.height() % 4 != 0 || feat_ref.width() % 4 != 0)
    throw DimensionError("run_dnet_level: level resolution " + feat_ref.shape_string() +
                         " is not divisible by 4");
  std::map<std::string, Tensor> values{{"FeatR", feat_ref}, {"FeatS", feat_src}};
  if (fo_prev) values["FoPrev"] = *fo_prev;
  auto out = run_graph(dnet_[level], std::move(values), &grids);
  return {std::move(out.at("Mask")), std::move(out.at("Fo"))};
}

LevelOutput NeuralModel::run_wnet_level(int level, const Tensor& entropy,
                                        const Tensor* fo_prev) const {
  if (level < 0 || level >= kNumLevels) throw ConfigError("W-Net level must be 0, 1 or 2");
  if ((level > 0) != (fo_prev != nullptr))
    throw DimensionError("run_wnet_level: previous-level features required iff level > 0");
  std::map<std::string, Tensor> values{{"E", entropy}};
  if (fo_prev) values["FoPrev"] = *fo_prev;
  auto out = run_graph(wnet_[level], std::move(values), nullptr);
  return {std::move(out.at("Logit")), std::move(out.at("Fo"))};
}

std::array<Tensor, 3> NeuralModel::run_dnet(const FeaturePyramid& ref, const FeaturePyramid& src,
                                            const Camera& ref_cam, const Camera& src_cam,
                                            const ScalarMap& H) const {
  if (H.width() != ref_cam.width || H.height() != ref_cam.height)
    throw DimensionError("run_dnet: hypothesis does not match the reference camera");
  if (H.width() % 16 != 0 || H.height() % 16 != 0)
    throw DimensionError("run_dnet: image size must be divisible by 16");
  std::array<Tensor, 3> masks;
  Tensor fo_prev;
  for (int l = 0; l < kNumLevels; ++l) {
    const int shift = kNumLevels - 1 - l;
    const int w = H.width() >> shift;
    const int h = H.height() >> shift;
    const ScalarMap H_level = shift == 0 ? H : resize_bilinear(H, w, h);
    const Camera ref_level = shift == 0 ? ref_cam : resize_camera(ref_cam, w, h);
    const Camera src_level =
        shift == 0 ? src_cam : resize_camera(src_cam, src_cam.width >> shift, src_cam.height >> shift);
    const auto grids = build_level_grids(ref_level, src_level, H_level, workers_);
    LevelOutput out = run_dnet_level(l, ref.levels[l], src.levels[l], grids, l > 0 ? &fo_prev : nullptr);
    masks[l] = std::move(out.out);
    fo_prev = std::move(out.features);
  }
  return masks;
}

Tensor NeuralModel::run_wnet(const std::array<Tensor, 3>& masks) const {
  Tensor fo_prev;
  Tensor logit;
  for (int l = 0; l < kNumLevels; ++l) {
    LevelOutput out = run_wnet_level(l, entropy_tensor(masks[l]), l > 0 ? &fo_prev : nullptr);
    logit = std::move(out.out);
    fo_prev = std::move(out.features);
  }
  return logit;
}

Tensor entropy_tensor(const Tensor& mask) {
  Tensor out(mask.channels(), mask.height(), mask.width());
  auto src = mask.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = static_cast<float>(binary_entropy(src[i]));
  return out;
}

}  // namespace ibmvs::nn
