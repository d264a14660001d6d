#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ibmvs/cloud.hpp"
#include "ibmvs/decision.hpp"
#include "ibmvs/engine.hpp"
#include "ibmvs/error.hpp"
#include "ibmvs/fusion.hpp"
#include "ibmvs/io.hpp"
#include "ibmvs/metrics.hpp"
#include "ibmvs/neural/networks.hpp"
#include "ibmvs/neural/weights.hpp"
#include "ibmvs/scenegen.hpp"

namespace fs = std::filesystem;
using namespace ibmvs;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct GenArgs {
  std::string spec;
  std::string out;
  int workers = 1;
};

struct InferArgs {
  std::string scene;
  std::string out;
  double d_min = 0.0;
  double d_max = 0.0;
  int iterations = 8;
  int sources = 4;
  std::string oracle = "zncc";
  std::string weight_oracle = "entropy";
  std::string weights;
  std::vector<int> refs;
  bool trace = false;
  int workers = 1;
  int zncc_window = 7;
  double zncc_gamma = 10.0;
  double zncc_rho = 0.5;
  double constant = 0.5;
};

struct FuseArgs {
  std::string scene;
  std::string depths;
  std::string out;
  std::string preset = "dtu";
  int min_views = 3;
  double reproj_px = 0.25;
  int workers = 1;
};

struct EvalArgs {
  std::string pred;
  std::string gt;
  double tau = 0.0;
  std::string units = "percentage";
  std::string report;
  std::string csv;
  std::string label = "run";
  int workers = 1;
};

struct WeightsArgs {
  std::string out;
  std::string in;
  std::uint64_t seed = 1;
  double scale = 1.0;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw FormatError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory " + dir.string() + ": " + ec.message());
}

int cmd_gen(const GenArgs& a) {
  const SceneSpec spec = load_scene_spec(a.spec);
  const SceneBundle bundle = render(spec, a.workers);
  write_bundle(a.out, bundle);
  std::string manifest = fmt::format("views={}\nwidth={}\nheight={}\nseed={}\ncameras=cameras.txt\n",
                                     bundle.size(), spec.width, spec.height, spec.seed);
  for (int i = 0; i < bundle.size(); ++i)
    manifest += fmt::format("view{}=images/{}.ppm depths/{}.pfm\n", i, view_stem(i), view_stem(i));
  write_text(fs::path(a.out) / "manifest.txt", manifest);
  fmt::print("wrote {} views to {}\n", bundle.size(), a.out);
  return kOk;
}

std::shared_ptr<const nn::NeuralModel> load_model(const InferArgs& a) {
  if (a.weights.empty()) throw ConfigError("--weights is required for the neural oracle or weights");
  return std::make_shared<const nn::NeuralModel>(load_weights(a.weights, nn::full_manifest()),
                                                 a.workers);
}

std::unique_ptr<DecisionOracle> make_oracle(const InferArgs& a,
                                            std::shared_ptr<const nn::NeuralModel>& model) {
  if (a.oracle == "gt") return std::make_unique<GroundTruthOracle>();
  if (a.oracle == "constant") return std::make_unique<ConstantOracle>(a.constant);
  if (a.oracle == "zncc") {
    ZnccConfig cfg;
    cfg.window = a.zncc_window;
    cfg.sharpness = a.zncc_gamma;
    cfg.probe_factor = a.zncc_rho;
    return std::make_unique<PhotoconsistencyOracle>(cfg);
  }
  if (!model) model = load_model(a);
  return std::make_unique<NeuralOracle>(model);
}

std::unique_ptr<WeightOracle> make_weights(const InferArgs& a,
                                           std::shared_ptr<const nn::NeuralModel>& model) {
  if (a.weight_oracle == "uniform") return std::make_unique<UniformWeights>();
  if (a.weight_oracle == "entropy") return std::make_unique<EntropyWeights>();
  if (a.oracle != "neural")
    throw ConfigError("--weight-oracle neural requires --oracle neural");
  if (!model) model = load_model(a);
  return std::make_unique<NeuralWeights>(model);
}

void write_trace(const fs::path& dir, const Trace& trace) {
  for (const char* kind : {"hypothesis", "mask", "weight", "update"}) ensure_dir(dir / kind);
  for (std::size_t t = 0; t < trace.hypotheses.size(); ++t)
    write_pfm((dir / "hypothesis" / fmt::format("t{:02}.pfm", t)).string(), trace.hypotheses[t]);
  for (std::size_t t = 0; t < trace.decisions.size(); ++t) {
    for (std::size_t s = 0; s < trace.decisions[t].size(); ++s) {
      const std::string name = fmt::format("t{:02}_s{:02}.pfm", t, s);
      write_pfm((dir / "mask" / name).string(), trace.decisions[t][s].value);
      write_pfm((dir / "weight" / name).string(), trace.weights[t][s]);
      write_pfm((dir / "update" / name).string(), trace.updates[t][s]);
    }
  }
}

int cmd_infer(const InferArgs& a) {
  const InverseDepthInterval interval = make_interval(a.d_min, a.d_max);
  EngineConfig cfg;
  cfg.iterations = a.iterations;
  cfg.workers = a.workers;
  cfg.record_trace = a.trace;
  cfg.validate();
  if (a.sources < 1) throw ConfigError("-S must be at least 1");

  const SceneBundle bundle = read_bundle(a.scene);
  if (bundle.size() < a.sources + 1)
    throw ConfigError(fmt::format("scene has {} views; -S {} needs at least {}", bundle.size(),
                                  a.sources, a.sources + 1));
  std::vector<int> refs = a.refs;
  if (refs.empty())
    for (int i = 0; i < bundle.size(); ++i) refs.push_back(i);
  for (int r : refs)
    if (r < 0 || r >= bundle.size()) throw ConfigError(fmt::format("reference view {} does not exist", r));

  std::shared_ptr<const nn::NeuralModel> model;
  auto oracle = make_oracle(a, model);
  auto weights = make_weights(a, model);

  const fs::path out(a.out);
  ensure_dir(out / "depths");
  for (int r : refs) {
    const auto src_idx = select_sources(bundle, r, a.sources);
    std::vector<const View*> sources;
    for (int s : src_idx) sources.push_back(&bundle.views[s]);
    const EngineResult result = run_engine(bundle.views[r], sources, interval, *oracle, *weights, cfg);
    write_pfm((out / "depths" / (view_stem(r) + ".pfm")).string(), result.depth);
    if (result.trace) write_trace(out / "trace" / view_stem(r), *result.trace);
  }
  fmt::print("inferred {} depth map(s) into {}\n", refs.size(), (out / "depths").string());
  return kOk;
}

int cmd_fuse(const FuseArgs& a, bool sg_given, bool g_given) {
  FusionParams params = fusion_preset(a.preset);
  if (sg_given) params.min_views = a.min_views;
  if (g_given) params.reproj_px = a.reproj_px;
  params.workers = a.workers;
  params.validate();

  SceneBundle bundle = read_bundle(a.scene);
  if (!a.depths.empty()) {
    for (int i = 0; i < bundle.size(); ++i) {
      const fs::path p = fs::path(a.depths) / (view_stem(i) + ".pfm");
      if (!fs::exists(p)) throw FormatError("missing depth map " + p.string());
      bundle.views[i].depth = read_pfm(p.string());
    }
  }
  const PointCloud cloud = fuse_cloud(bundle.views, params);
  write_ply(a.out, cloud);
  fmt::print("fused {} points into {}\n", cloud.size(), a.out);
  return kOk;
}

int cmd_eval(const EvalArgs& a) {
  const CloudUnits units = a.units == "distance" ? CloudUnits::kDistance : CloudUnits::kPercentage;
  const CloudMetrics m =
      cloud_accuracy_completeness(read_ply(a.pred), read_ply(a.gt), a.tau, units, a.workers);
  if (a.report.empty()) {
    write_report(std::cout, m);
  } else {
    std::ofstream out(a.report);
    if (!out) throw FormatError("cannot open " + a.report + " for writing");
    write_report(out, m);
  }
  if (!a.csv.empty()) write_text(a.csv, csv_header() + "\n" + csv_row(a.label, m) + "\n");
  return kOk;
}

int cmd_weights_manifest(const WeightsArgs& a) {
  const std::string text = nn::manifest_text(nn::full_manifest());
  if (a.out.empty()) std::cout << text;
  else write_text(a.out, text);
  return kOk;
}

int cmd_weights_random(const WeightsArgs& a) {
  const auto store = nn::random_weights(nn::full_manifest(), a.seed, a.scale);
  nn::save_weights(store, a.out);
  fmt::print("wrote {} tensors ({} parameters) to {}\n", store.size(),
             nn::parameter_count(nn::full_manifest()), a.out);
  return kOk;
}

int cmd_weights_validate(const WeightsArgs& a) {
  const auto store = nn::load_weights(a.in);
  const auto problems = nn::check_manifest(store, nn::full_manifest());
  if (!problems.empty()) {
    for (const auto& p : problems) fmt::print(stderr, "{}\n", p);
    return kData;
  }
  fmt::print("ok: {} tensors, {} parameters\n", store.size(),
             nn::parameter_count(nn::full_manifest()));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative binary-decision multi-view stereo"};
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Render a synthetic scene bundle from a JSON spec");
  gen_cmd->add_option("--spec", gen.spec, "Scene spec (JSON)")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--workers", gen.workers, "Worker threads")->check(CLI::PositiveNumber);

  InferArgs inf;
  auto* inf_cmd = app.add_subcommand("infer", "Estimate depth maps for reference views");
  inf_cmd->add_option("--scene", inf.scene, "Scene directory")->required();
  inf_cmd->add_option("--out", inf.out, "Output directory")->required();
  inf_cmd->add_option("--dmin", inf.d_min, "Near depth bound")->required();
  inf_cmd->add_option("--dmax", inf.d_max, "Far depth bound")->required();
  inf_cmd->add_option("-T,--iterations", inf.iterations, "Iterations T")->capture_default_str();
  inf_cmd->add_option("-S,--sources", inf.sources, "Source views per reference")->capture_default_str();
  inf_cmd->add_option("--oracle", inf.oracle, "Decision oracle")
      ->check(CLI::IsMember({"gt", "zncc", "neural", "constant"}))
      ->capture_default_str();
  inf_cmd->add_option("--weight-oracle", inf.weight_oracle, "Fusion weights")
      ->check(CLI::IsMember({"uniform", "entropy", "neural"}))
      ->capture_default_str();
  inf_cmd->add_option("--weights", inf.weights, "Network weight file");
  inf_cmd->add_option("--ref", inf.refs, "Reference view indices (default: all)");
  inf_cmd->add_flag("--trace", inf.trace, "Write per-iteration PFM snapshots");
  inf_cmd->add_option("--workers", inf.workers, "Worker threads")->check(CLI::PositiveNumber);
  inf_cmd->add_option("--zncc-window", inf.zncc_window, "ZNCC window size")->capture_default_str();
  inf_cmd->add_option("--zncc-gamma", inf.zncc_gamma, "ZNCC sigmoid sharpness")->capture_default_str();
  inf_cmd->add_option("--zncc-rho", inf.zncc_rho, "ZNCC probe offset factor")->capture_default_str();
  inf_cmd->add_option("--constant", inf.constant, "Value of the constant oracle")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  FuseArgs fuse;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse depth maps into a point cloud (PLY)");
  fuse_cmd->add_option("--scene", fuse.scene, "Scene directory (cameras, images)")->required();
  fuse_cmd->add_option("--depths", fuse.depths, "Depth directory (default: scene ground truth)");
  fuse_cmd->add_option("--out", fuse.out, "Output PLY")->required();
  fuse_cmd->add_option("--preset", fuse.preset, "Parameter preset")
      ->check(CLI::IsMember(fusion_preset_names()))
      ->capture_default_str();
  auto* sg_opt = fuse_cmd->add_option("--sg", fuse.min_views, "Minimum consistent views S_g");
  auto* g_opt = fuse_cmd->add_option("--g", fuse.reproj_px, "Reprojection threshold g (pixels)");
  fuse_cmd->add_option("--workers", fuse.workers, "Worker threads")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy / completeness of a cloud against ground truth");
  eval_cmd->add_option("--pred", ev.pred, "Predicted PLY")->required();
  eval_cmd->add_option("--gt", ev.gt, "Ground-truth PLY")->required();
  eval_cmd->add_option("--tau", ev.tau, "Distance threshold")->required();
  eval_cmd->add_option("--units", ev.units, "Report units")
      ->check(CLI::IsMember({"percentage", "distance"}))
      ->capture_default_str();
  eval_cmd->add_option("--report", ev.report, "key=value report file (default: stdout)");
  eval_cmd->add_option("--csv", ev.csv, "CSV file with header and one row");
  eval_cmd->add_option("--label", ev.label, "CSV row label")->capture_default_str();
  eval_cmd->add_option("--workers", ev.workers, "Worker threads")->check(CLI::PositiveNumber);

  WeightsArgs wa;
  auto* w_cmd = app.add_subcommand("weights", "Network weight utilities");
  w_cmd->require_subcommand(1);
  auto* w_manifest = w_cmd->add_subcommand("manifest", "List every expected tensor and shape");
  w_manifest->add_option("--out", wa.out, "Output file (default: stdout)");
  auto* w_random = w_cmd->add_subcommand("random", "Write deterministic random weights");
  w_random->add_option("--seed", wa.seed, "Seed")->capture_default_str();
  w_random->add_option("--scale", wa.scale, "Uniform bound multiplier")->capture_default_str();
  w_random->add_option("--out", wa.out, "Output weight file")->required();
  auto* w_validate = w_cmd->add_subcommand("validate", "Check a weight file against the manifest");
  w_validate->add_option("--in", wa.in, "Weight file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*inf_cmd) return cmd_infer(inf);
    if (*fuse_cmd) return cmd_fuse(fuse, sg_opt->count() > 0, g_opt->count() > 0);
    if (*eval_cmd) return cmd_eval(ev);
    if (*w_manifest) return cmd_weights_manifest(wa);
    if (*w_random) return cmd_weights_random(wa);
    if (*w_validate) return cmd_weights_validate(wa);
  } catch (const InvariantError& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return kInternal;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return kInternal;
  }
  return kUsage;
}
