#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ibmvs/error.hpp"
#include "ibmvs/fusion.hpp"
#include "ibmvs/random.hpp"

using namespace ibmvs;

namespace {

ScalarMap random_map(int w, int h, SplitMix64& rng, double lo, double hi) {
  ScalarMap m(w, h);
  for (double& v : m) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST(Entropy, Values) {
  EXPECT_NEAR(binary_entropy(0.5), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(binary_entropy(0.0), 0.0, 2e-6);
  EXPECT_NEAR(binary_entropy(1.0), 0.0, 2e-6);
  EXPECT_DOUBLE_EQ(binary_entropy(0.2), binary_entropy(0.8));
  EXPECT_TRUE(std::isfinite(binary_entropy(0.0)));
}

TEST(Weights, LogitAndHeuristic) {
  ScalarMap logits(3, 1);
  logits[0] = 0.0;
  logits[1] = std::log(2.0);
  logits[2] = 1e6;
  const auto W = weight_from_logit(logits);
  EXPECT_DOUBLE_EQ(W[0], 1.0);
  EXPECT_NEAR(W[1], 0.5, 1e-15);
  EXPECT_EQ(W[2], kWeightFloor);

  SoftMask B(4, 1);
  B.value[0] = 0.5;
  B.value[1] = 1.0;
  B.value[2] = 0.9;
  B.valid[3] = 0;
  const auto H = heuristic_weight(B);
  EXPECT_NEAR(H[0], kHeuristicWeightEpsilon, 1e-12);
  EXPECT_NEAR(H[1], 1.0, 1e-5);
  EXPECT_GT(H[1], H[2]);
  EXPECT_GT(H[2], H[0]);
  EXPECT_EQ(H[3], kHeuristicWeightEpsilon);
  B.in_view[1] = 0;
  EXPECT_EQ(heuristic_weight(B)[1], kHeuristicWeightEpsilon);
}

TEST(FuseHypotheses, SingleSourceIdentity) {
  SplitMix64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const ScalarMap H = random_map(5, 4, rng, 0.1, 2.0);
    const ScalarMap W = random_map(5, 4, rng, 1e-6, 10.0);
    const std::vector<ScalarMap> hs{H};
    const std::vector<WeightMap> ws{W};
    EXPECT_TRUE(fuse_hypotheses(hs, ws) == H);
  }
}

TEST(FuseHypotheses, ConvexAndScaleInvariant) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int S = 1 + int(rng.uniform() * 6);
    std::vector<ScalarMap> hs;
    std::vector<WeightMap> ws, scaled;
    const double c = std::ldexp(1.0, int(rng.uniform(-20, 20)));
    for (int s = 0; s < S; ++s) {
      hs.push_back(random_map(3, 3, rng, 0.2, 1.0));
      ws.push_back(random_map(3, 3, rng, 1e-12, 5.0));
      scaled.push_back(ws.back());
      for (double& v : scaled.back()) v *= c;
    }
    const auto F = fuse_hypotheses(hs, ws);
    EXPECT_TRUE(F == fuse_hypotheses(hs, scaled));
    for (std::size_t i = 0; i < F.size(); ++i) {
      double lo = 1e9, hi = -1e9;
      for (const auto& h : hs) lo = std::min(lo, h[i]), hi = std::max(hi, h[i]);
      EXPECT_GE(F[i], lo);
      EXPECT_LE(F[i], hi);
    }
  }
}

TEST(FuseHypotheses, NaiveIsUnitWeights) {
  SplitMix64 rng(3);
  std::vector<ScalarMap> hs{random_map(4, 4, rng, 0, 1), random_map(4, 4, rng, 0, 1),
                            random_map(4, 4, rng, 0, 1)};
  const auto N = naive_fuse(hs);
  for (std::size_t i = 0; i < N.size(); ++i)
    EXPECT_NEAR(N[i], (hs[0][i] + hs[1][i] + hs[2][i]) / 3.0, 1e-15);
}

TEST(FuseHypotheses, DominantWeight) {
  std::vector<ScalarMap> hs{ScalarMap(1, 1, 0.2), ScalarMap(1, 1, 0.8)};
  std::vector<WeightMap> ws{WeightMap(1, 1, 1e-12), WeightMap(1, 1, 1.0)};
  EXPECT_NEAR(fuse_hypotheses(hs, ws)[0], 0.8, 1e-11);
}

TEST(FuseHypotheses, Errors) {
  std::vector<ScalarMap> none;
  std::vector<WeightMap> nw;
  EXPECT_THROW(fuse_hypotheses(none, nw), ConfigError);
  std::vector<ScalarMap> hs{ScalarMap(2, 2, 0.5)};
  std::vector<WeightMap> ws{WeightMap(3, 2, 1.0)};
  EXPECT_THROW(fuse_hypotheses(hs, ws), DimensionError);
  std::vector<WeightMap> two{WeightMap(2, 2, 1.0), WeightMap(2, 2, 1.0)};
  EXPECT_THROW(fuse_hypotheses(hs, two), DimensionError);
}

TEST(WeightOracles, Names) {
  Decision d;
  d.mask = SoftMask(2, 2, 0.5);
  EXPECT_EQ(UniformWeights().weigh(d)[0], 1.0);
  EXPECT_NEAR(EntropyWeights().weigh(d)[0], kHeuristicWeightEpsilon, 1e-12);
  EXPECT_THROW(NeuralWeights(nullptr), ConfigError);
}
