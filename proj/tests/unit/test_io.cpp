#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "ibmvs/error.hpp"
#include "ibmvs/io.hpp"
#include "ibmvs/random.hpp"
#include "ibmvs/scenegen.hpp"
#include "support/scenes.hpp"

using namespace ibmvs;
namespace fs = std::filesystem;

TEST(Pfm, RoundTripWithNaN) {
  SplitMix64 rng(1);
  ScalarMap m(7, 5);
  for (double& v : m) v = static_cast<float>(rng.uniform(0.5, 4));
  m(3, 2) = std::numeric_limits<double>::quiet_NaN();
  std::stringstream ss;
  write_pfm(ss, m);
  EXPECT_EQ(ss.str().rfind("Pf\n7 5\n-1", 0), 0u);
  const auto back = read_pfm(ss);
  ASSERT_EQ(back.width(), 7);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (std::isnan(m[i])) EXPECT_TRUE(std::isnan(back[i]));
    else EXPECT_EQ(back[i], m[i]);
  }
}

TEST(Pfm, BottomToTopRows) {
  ScalarMap m(1, 2);
  m(0, 0) = 1.0;
  m(0, 1) = 2.0;
  std::stringstream ss;
  write_pfm(ss, m);
  const std::string s = ss.str();
  float first;
  std::memcpy(&first, s.data() + s.size() - 8, 4);
  EXPECT_EQ(first, 2.0f);
}

TEST(Pfm, Truncated) {
  std::stringstream ss;
  write_pfm(ss, ScalarMap(4, 4, 1.0));
  std::stringstream cut(ss.str().substr(0, ss.str().size() - 3));
  EXPECT_THROW(read_pfm(cut), FormatError);
  std::stringstream junk("P6\n1 1\n255\n");
  EXPECT_THROW(read_pfm(junk), FormatError);
}

TEST(Ibdm, RoundTripFloatExact) {
  SplitMix64 rng(2);
  ScalarMap m(5, 3);
  for (double& v : m) v = static_cast<float>(rng.uniform());
  std::stringstream ss;
  write_ibdm(ss, m);
  EXPECT_TRUE(read_ibdm(ss) == m);
}

TEST(Pnm, RoundTripQuantized) {
  Tensor rgb(3, 2, 3);
  SplitMix64 rng(3);
  for (float& v : rgb.data()) v = std::round(rng.uniform() * 255) / 255.0f;
  std::stringstream ss;
  write_pnm(ss, rgb);
  const auto back = read_pnm(ss);
  ASSERT_EQ(back.channels(), 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) EXPECT_NEAR(back.data()[i], rgb.data()[i], 1e-6);
  Tensor gray(1, 2, 2, 0.5f);
  std::stringstream gs;
  write_pnm(gs, gray);
  EXPECT_EQ(gs.str().rfind("P5", 0), 0u);
  EXPECT_EQ(read_pnm(gs).channels(), 1);
  EXPECT_THROW(write_pnm(ss, Tensor(2, 2, 2)), DimensionError);
}

TEST(Bundle, RoundTrip) {
  const auto b = render(scenes::plane(16, 12, 3, 2.0, 0.2, 16.0));
  const fs::path dir = fs::temp_directory_path() / "ibmvs_test_bundle";
  fs::remove_all(dir);
  write_bundle(dir.string(), b);
  EXPECT_TRUE(fs::exists(dir / "cameras.txt"));
  EXPECT_TRUE(fs::exists(dir / "images" / (view_stem(2) + ".ppm")));
  EXPECT_TRUE(fs::exists(dir / "depths" / "0002.pfm"));
  const auto r = read_bundle(dir.string());
  ASSERT_EQ(r.size(), 3);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(r.views[i].camera.width, 16);
    EXPECT_NEAR((r.views[i].camera.K - b.views[i].camera.K).norm(), 0.0, 1e-12);
    ASSERT_TRUE(r.views[i].depth);
    EXPECT_NEAR((*r.views[i].depth)(3, 3), (*b.views[i].depth)(3, 3), 1e-6);
  }
  fs::remove_all(dir);
  EXPECT_THROW(read_bundle(dir.string()), FormatError);
}
