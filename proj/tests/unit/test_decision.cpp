#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "ibmvs/decision.hpp"
#include "ibmvs/engine.hpp"
#include "ibmvs/error.hpp"
#include "ibmvs/neural/networks.hpp"
#include "ibmvs/random.hpp"
#include "ibmvs/scenegen.hpp"
#include "support/scenes.hpp"

using namespace ibmvs;

TEST(GroundTruthOracle, Definition) {
  ScalarMap d(2, 1, 0.0), H(2, 1, 0.5);
  d(0, 0) = 1.0;  // h = 2 > d
  d(1, 0) = 2.0;  // equality -> 0
  const auto m = ground_truth_oracle(d, H);
  EXPECT_EQ(m.value(0, 0), 1.0);
  EXPECT_EQ(m.value(1, 0), 0.0);
  EXPECT_TRUE(m.valid(0, 0) && m.valid(1, 0));
}

TEST(GroundTruthOracle, MatchesScalarComparison) {
  SplitMix64 rng(9);
  ScalarMap d(30, 20, 0.0), H(30, 20, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = rng.uniform(0.5, 3.0);
    H[i] = rng.uniform(0.3, 2.0);
  }
  d[5] = std::nan("");
  d[6] = -1.0;
  const auto m = ground_truth_oracle(d, H);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i == 5 || i == 6) {
      EXPECT_FALSE(m.valid[i]);
      continue;
    }
    EXPECT_EQ(m.value[i], d[i] < 1.0 / H[i] ? 1.0 : 0.0);
    // Same decision in inverse-depth form.
    EXPECT_EQ(m.value[i], 1.0 / d[i] > H[i] ? 1.0 : 0.0);
  }
}

TEST(GroundTruthOracle, ShapeMismatch) {
  EXPECT_THROW(ground_truth_oracle(ScalarMap(2, 2), ScalarMap(3, 2)), DimensionError);
}

TEST(Zncc, Basics) {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1}, flat{1, 1, 1, 1};
  EXPECT_NEAR(zncc(a, b), 1.0, 1e-12);
  EXPECT_NEAR(zncc(a, c), -1.0, 1e-12);
  EXPECT_EQ(zncc(a, flat), 0.0);
}

TEST(Zncc, SigmoidOfExtremes) {
  const double b = 1.0 / (1.0 + std::exp(-10.0 * (1.0 - (-1.0))));
  EXPECT_NEAR(b, 0.9999999979, 1e-10);
}

namespace {

SceneBundle plane_bundle(int w, int h, double depth) {
  return render(scenes::plane(w, h, 3, depth, 0.25, 64.0));
}

}  // namespace

TEST(Photoconsistency, TexturelessGivesHalf) {
  auto spec = scenes::plane(32, 32, 2, 2.0, 0.2, 32.0);
  spec.primitives[0].texture.kind = TextureSpec::Kind::kConstant;
  const auto bundle = render(spec);
  const auto iv = make_interval(1.0, 4.0);
  const auto m = photoconsistency_oracle(bundle.views[0], bundle.views[1], ScalarMap(32, 32, 0.6), 0,
                                         iv, ZnccConfig{});
  for (std::size_t i = 0; i < m.value.size(); ++i) EXPECT_EQ(m.value[i], 0.5);
}

TEST(Photoconsistency, IdenticalProbesGiveHalf) {
  // Equal-bound interval clamps both probes to the same inverse depth.
  const auto bundle = plane_bundle(32, 32, 2.0);
  const auto iv = make_interval(2.0, 2.0);
  const auto m = photoconsistency_oracle(bundle.views[0], bundle.views[1], ScalarMap(32, 32, 0.5), 0,
                                         iv, ZnccConfig{});
  for (std::size_t i = 0; i < m.value.size(); ++i)
    if (m.in_view[i]) EXPECT_EQ(m.value[i], 0.5);
}

TEST(Photoconsistency, AgreesWithGroundTruthOnPlane) {
  const int w = 64, h = 64;
  const double depth = 2.0;
  const auto bundle = plane_bundle(w, h, depth);
  const auto iv = make_interval(1.0, 4.0);
  for (double sign : {1.0, -1.0}) {
    // Hypothesis offset by 10% of the range in depth.
    const double d_h = depth + sign * 0.1 * (iv.d_max - iv.d_min);
    const ScalarMap H(w, h, 1.0 / d_h);
    for (int s = 1; s < bundle.size(); ++s) {
      const auto m = photoconsistency_oracle(bundle.views[0], bundle.views[s], H, 0, iv, ZnccConfig{});
      const auto gt = ground_truth_oracle(*bundle.views[0].depth, H);
      int agree = 0, total = 0;
      for (int y = 8; y < h - 8; ++y)
        for (int x = 8; x < w - 8; ++x) {
          if (!m.in_view(x, y)) continue;
          ++total;
          agree += (m.value(x, y) > 0.5) == (gt.value(x, y) > 0.5);
        }
      ASSERT_GT(total, 0);
      EXPECT_GE(static_cast<double>(agree) / total, 0.95) << "source " << s << " sign " << sign;
    }
  }
}

TEST(Photoconsistency, AffineIntensityInvariance) {
  const auto bundle = plane_bundle(40, 40, 2.0);
  View src = bundle.views[1];
  for (float& v : src.image.data()) v = 0.5f * v + 0.2f;
  const auto iv = make_interval(1.0, 4.0);
  SplitMix64 rng(12);
  ScalarMap H(40, 40, 0.0);
  for (double& h : H) h = rng.uniform(0.3, 0.9);
  const auto a = photoconsistency_oracle(bundle.views[0], bundle.views[1], H, 1, iv, ZnccConfig{});
  const auto b = photoconsistency_oracle(bundle.views[0], src, H, 1, iv, ZnccConfig{});
  for (std::size_t i = 0; i < a.value.size(); ++i) EXPECT_NEAR(a.value[i], b.value[i], 1e-6);
}

TEST(Photoconsistency, OutOfViewIsUninformative) {
  const auto bundle = plane_bundle(32, 32, 2.0);
  const auto iv = make_interval(0.05, 4.0);
  // Very near hypotheses push matches out of the source image.
  const auto m = photoconsistency_oracle(bundle.views[0], bundle.views[1], ScalarMap(32, 32, 19.0), 0,
                                         iv, ZnccConfig{});
  int out = 0;
  for (std::size_t i = 0; i < m.value.size(); ++i) {
    EXPECT_TRUE(m.valid[i]);
    if (!m.in_view[i]) {
      ++out;
      EXPECT_EQ(m.value[i], 0.5);
    }
  }
  EXPECT_GT(out, 0);
}

TEST(Photoconsistency, WorkerCountIndependent) {
  const auto bundle = plane_bundle(40, 40, 2.0);
  const auto iv = make_interval(1.0, 4.0);
  const ScalarMap H(40, 40, 0.45);
  const auto a = photoconsistency_oracle(bundle.views[0], bundle.views[2], H, 2, iv, ZnccConfig{}, 1);
  const auto b = photoconsistency_oracle(bundle.views[0], bundle.views[2], H, 2, iv, ZnccConfig{}, 3);
  EXPECT_TRUE(a.value == b.value);
}

TEST(Photoconsistency, ConfigValidation) {
  ZnccConfig c;
  c.window = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.probe_factor = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(ConstantOracle(1.5), ConfigError);
}

namespace {

std::shared_ptr<nn::NeuralModel> random_model(std::uint64_t seed) {
  return std::make_shared<nn::NeuralModel>(nn::random_weights(nn::full_manifest(), seed));
}

Decision neural_decide(const std::shared_ptr<nn::NeuralModel>& model, const SceneBundle& b,
                       const ScalarMap& H) {
  NeuralOracle oracle(model);
  const View* src[] = {&b.views[1]};
  oracle.prepare(b.views[0], src, 1);
  const DecisionContext ctx{b.views[0], b.views[1], H, 0, make_interval(1.0, 4.0), 1};
  return oracle.decide(ctx);
}

}  // namespace

TEST(NeuralOracle, RangeAndShape) {
  const auto b = render(scenes::plane(32, 32, 2, 2.0, 0.2, 32.0));
  const auto d = neural_decide(random_model(1), b, ScalarMap(32, 32, 0.5));
  ASSERT_EQ(d.mask.width(), 32);
  ASSERT_EQ(d.levels.size(), 3u);
  for (double v : d.mask.value) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(NeuralOracle, ZeroFinalLayerGivesHalf) {
  auto store = nn::random_weights(nn::full_manifest(), 2);
  const auto g = nn::dnet_graph(2);
  const auto& last = g.layer("Mask");
  auto w = store.get(g.weight_name(last));
  std::fill(w.values.begin(), w.values.end(), 0.0f);
  store.set(g.weight_name(last), w);
  if (last.row.bias) {
    auto bias = store.get(g.bias_name(last));
    std::fill(bias.values.begin(), bias.values.end(), 0.0f);
    store.set(g.bias_name(last), bias);
  }
  const auto b = render(scenes::plane(32, 32, 2, 2.0, 0.2, 32.0));
  const auto d = neural_decide(std::make_shared<nn::NeuralModel>(store), b, ScalarMap(32, 32, 0.5));
  for (double v : d.mask.value) EXPECT_EQ(v, 0.5);
}

TEST(NeuralOracle, ScaleIndependent) {
  auto spec = scenes::plane(32, 32, 2, 2.0, 0.2, 32.0);
  const auto b1 = render(spec);
  SceneBundle b2 = b1;
  for (View& v : b2.views) v.camera.t *= 2.0;
  SplitMix64 rng(3);
  ScalarMap H(32, 32, 0.0);
  for (double& h : H) h = rng.uniform(0.3, 0.8);
  ScalarMap H2 = H;
  for (double& h : H2) h *= 0.5;
  const auto model = random_model(4);
  const auto d1 = neural_decide(model, b1, H);
  const auto d2 = neural_decide(model, b2, H2);
  for (std::size_t i = 0; i < d1.mask.value.size(); ++i)
    EXPECT_NEAR(d1.mask.value[i], d2.mask.value[i], 1e-5);
}

TEST(NeuralOracle, RejectsMisshapenWeights) {
  auto store = nn::random_weights(nn::full_manifest(), 5);
  auto p = store.get("fpn.conv0_0.weight");
  p.dims[0] += 1;
  p.values.resize(p.count());
  store.set("fpn.conv0_0.weight", p);
  EXPECT_THROW(nn::NeuralModel{store}, FormatError);
}
