#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include "ibmvs/cloud.hpp"
#include "ibmvs/geometry.hpp"
#include "ibmvs/io.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

namespace fs = std::filesystem;
using namespace ibmvs;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / fmt::format("ibmvs_cli_{}_{}", ::getpid(), info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write(dir_ / "plane.json", scenes::plane_json(32, 32, 5, 3));
  }
  void TearDown() override { fs::remove_all(dir_); }

  static void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  int run(const std::string& args) {
    const std::string cmd = fmt::format("'{}' {} > '{}' 2>&1", IBMVS_CLI_PATH, args, (dir_ / "log.txt").string());
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  void gen(const std::string& out = "scene") {
    ASSERT_EQ(run(fmt::format("gen --spec {} --out {}", path("plane.json"), path(out))), 0);
  }

  fs::path dir_;
};

int count_files(const fs::path& dir) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST_F(Cli, GenWritesBundle) {
  gen();
  EXPECT_EQ(count_files(dir_ / "scene" / "images"), 5);
  EXPECT_EQ(count_files(dir_ / "scene" / "depths"), 5);
  EXPECT_TRUE(fs::exists(dir_ / "scene" / "cameras.txt"));
  EXPECT_TRUE(fs::exists(dir_ / "scene" / "manifest.txt"));
  EXPECT_EQ(read_cameras(path("scene/cameras.txt")).size(), 5u);
}

TEST_F(Cli, GenIsReproducible) {
  gen("a");
  gen("b");
  for (const auto& e : fs::recursive_directory_iterator(dir_ / "a")) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / fs::relative(e.path(), dir_ / "a"))) << e.path();
  }
}

TEST_F(Cli, GenRejectsMalformedSpec) {
  write(dir_ / "bad.json", "{\"width\": 8,");
  EXPECT_EQ(run(fmt::format("gen --spec {} --out {}", path("bad.json"), path("x"))), 2);
  EXPECT_NE(slurp(dir_ / "log.txt").find("scene spec"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("infer --scene x"), 1);
  EXPECT_EQ(run("infer --scene x --out y --dmin 1 --dmax 2 --oracle magic"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, InferGroundTruthBound) {
  gen();
  const int T = 6;
  ASSERT_EQ(run(fmt::format("infer --scene {} --out {} --dmin 1 --dmax 4 -T {} -S 2 --oracle gt",
                            path("scene"), path("out"), T)),
            0);
  const auto iv = make_interval(1, 4);
  for (int v = 0; v < 5; ++v) {
    const auto gt = read_pfm(path("scene/depths/" + view_stem(v) + ".pfm"));
    const auto d = read_pfm(path("out/depths/" + view_stem(v) + ".pfm"));
    for (std::size_t i = 0; i < d.size(); ++i)
      // PFM stores float32; allow its rounding on top of the engine bound.
      ASSERT_LE(std::abs(1.0 / d[i] - 1.0 / gt[i]), std::ldexp(std::abs(iv.R), -T) + 1e-6);
  }
}

TEST_F(Cli, InferConstantOracleGivesMidpoint) {
  gen();
  ASSERT_EQ(run(fmt::format("infer --scene {} --out {} --dmin 1 --dmax 4 -T 1 --oracle constant "
                            "--constant 0.5 --ref 0",
                            path("scene"), path("out"))),
            0);
  const auto d = read_pfm(path("out/depths/0000.pfm"));
  const double want = static_cast<float>(1.0 / make_interval(1, 4).midpoint);
  for (double v : d) EXPECT_EQ(v, want);
  EXPECT_FALSE(fs::exists(dir_ / "out" / "depths" / "0001.pfm"));
}

TEST_F(Cli, InferTraceCount) {
  gen();
  ASSERT_EQ(run(fmt::format("infer --scene {} --out {} --dmin 1 --dmax 4 -T 3 -S 2 --trace --ref 1",
                            path("scene"), path("out"))),
            0);
  const fs::path t = dir_ / "out" / "trace" / "0001";
  EXPECT_EQ(count_files(t / "mask"), 3 * 2);
  EXPECT_EQ(count_files(t / "weight"), 3 * 2);
  EXPECT_EQ(count_files(t / "hypothesis"), 3 + 1);
}

TEST_F(Cli, InferDataErrors) {
  gen();
  EXPECT_EQ(run(fmt::format("infer --scene {} --out {} --dmin 1 --dmax 4 -S 5", path("scene"), path("o"))), 2);
  EXPECT_EQ(run(fmt::format("infer --scene {} --out {} --dmin 4 --dmax 1", path("scene"), path("o"))), 2);
  EXPECT_EQ(run(fmt::format("infer --scene {} --out {} --dmin 1 --dmax 4 --oracle neural", path("scene"),
                            path("o"))),
            2);
  EXPECT_EQ(run(fmt::format("infer --scene {} --out {} --dmin 1 --dmax 4", path("missing"), path("o"))), 2);
}

TEST_F(Cli, InferNeuralWithRandomWeights) {
  gen();
  ASSERT_EQ(run(fmt::format("weights random --seed 4 --out {}", path("w.bin"))), 0);
  ASSERT_EQ(run(fmt::format("infer --scene {} --out {} --dmin 1 --dmax 4 -T 2 -S 1 --ref 0 --oracle neural "
                            "--weight-oracle neural --weights {}",
                            path("scene"), path("out"), path("w.bin"))),
            0);
  const auto d = read_pfm(path("out/depths/0000.pfm"));
  for (double v : d) {
    EXPECT_GE(v, 1.0 - 1e-6);
    EXPECT_LE(v, 4.0 + 1e-6);
  }
}

TEST_F(Cli, FuseGroundTruthOnSurface) {
  gen();
  ASSERT_EQ(run(fmt::format("fuse --scene {} --out {} --sg 3 --g 0.5", path("scene"), path("a.ply"))), 0);
  ASSERT_EQ(run(fmt::format("fuse --scene {} --out {} --sg 3 --g 0.5 --workers 3", path("scene"),
                            path("b.ply"))),
            0);
  EXPECT_EQ(slurp(dir_ / "a.ply"), slurp(dir_ / "b.ply"));
  const auto cloud = read_ply(path("a.ply"));
  ASSERT_GT(cloud.size(), 100u);
  for (const auto& X : cloud.points) EXPECT_NEAR(X.z(), 2.0f, 1e-5f);  // plane z = 2
}

TEST_F(Cli, FuseTooStrictGivesEmptyCloud) {
  gen();
  ASSERT_EQ(run(fmt::format("fuse --scene {} --out {} --sg 5", path("scene"), path("e.ply"))), 0);
  EXPECT_TRUE(read_ply(path("e.ply")).empty());
}

TEST_F(Cli, EvalSelfAndBruteForce) {
  gen();
  ASSERT_EQ(run(fmt::format("fuse --scene {} --out {} --sg 2 --g 0.5", path("scene"), path("a.ply"))), 0);
  ASSERT_EQ(run(fmt::format("fuse --scene {} --out {} --sg 4 --g 0.5", path("scene"), path("b.ply"))), 0);
  ASSERT_EQ(run(fmt::format("eval --pred {} --gt {} --tau 0.01 --report {} --csv {}", path("a.ply"),
                            path("a.ply"), path("r.txt"), path("m.csv"))),
            0);
  EXPECT_NE(slurp(dir_ / "r.txt").find("accuracy=100\n"), std::string::npos);
  EXPECT_NE(slurp(dir_ / "r.txt").find("completeness=100\n"), std::string::npos);
  std::istringstream csv(slurp(dir_ / "m.csv"));
  std::string header, row, extra;
  ASSERT_TRUE(std::getline(csv, header));
  ASSERT_TRUE(std::getline(csv, row));
  EXPECT_FALSE(std::getline(csv, extra));
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));

  ASSERT_EQ(run(fmt::format("eval --pred {} --gt {} --tau 0.003 --report {}", path("b.ply"), path("a.ply"),
                            path("r2.txt"))),
            0);
  const auto want = oracle::brute_cloud_metrics(read_ply(path("b.ply")), read_ply(path("a.ply")), 0.003,
                                                CloudUnits::kPercentage);
  std::ostringstream expected;
  write_report(expected, want);
  EXPECT_EQ(slurp(dir_ / "r2.txt"), expected.str());
}

TEST_F(Cli, WeightsRoundTripAndCorruption) {
  ASSERT_EQ(run(fmt::format("weights manifest --out {}", path("m.txt"))), 0);
  const std::string manifest = slurp(dir_ / "m.txt");
  for (const char* name : {"fpn.conv0_0.weight", "dnet.l0.dconv1.weight", "dnet.l2.mask.weight",
                           "wnet.l1.convpr.weight", "wnet.l2.logit.weight"})
    EXPECT_NE(manifest.find(name), std::string::npos) << name;
  ASSERT_EQ(run(fmt::format("weights random --seed 9 --out {}", path("w.bin"))), 0);
  EXPECT_EQ(run(fmt::format("weights validate --in {}", path("w.bin"))), 0);
  std::string bytes = slurp(dir_ / "w.bin");
  write(dir_ / "cut.bin", bytes.substr(0, bytes.size() / 2));
  EXPECT_EQ(run(fmt::format("weights validate --in {}", path("cut.bin"))), 2);
  bytes[1] = '?';
  write(dir_ / "magic.bin", bytes);
  EXPECT_EQ(run(fmt::format("weights validate --in {}", path("magic.bin"))), 2);
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  gen();
  write(dir_ / "run.toml", "[infer]\niterations = 2\noracle = \"constant\"\nconstant = 1.0\n");
  ASSERT_EQ(run(fmt::format("--config {} infer --scene {} --out {} --dmin 1 --dmax 4 --ref 0", path("run.toml"),
                            path("scene"), path("out_a"))),
            0);
  ASSERT_EQ(run(fmt::format("--config {} infer --scene {} --out {} --dmin 1 --dmax 4 --ref 0 --constant 0.0",
                            path("run.toml"), path("scene"), path("out_b"))),
            0);
  // constant 1 pushes toward the near bound, constant 0 toward the far bound.
  const auto a = read_pfm(path("out_a/depths/0000.pfm"));
  const auto b = read_pfm(path("out_b/depths/0000.pfm"));
  const auto iv = make_interval(1, 4);
  const double near = 1.0 / (iv.midpoint + std::abs(iv.R) * 0.75);
  const double far = 1.0 / (iv.midpoint - std::abs(iv.R) * 0.75);
  EXPECT_NEAR(a[0], near, 1e-6);
  EXPECT_NEAR(b[0], far, 1e-6);
}
