// Command-line front end: dataset generation, training, evaluation,
// inference, reference-map rendering and obstacle-map comparison.
//
// Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 numeric abort.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "refdepth/config.hpp"
#include "refdepth/dataset.hpp"
#include "refdepth/error.hpp"
#include "refdepth/evaluate.hpp"
#include "refdepth/image_io.hpp"
#include "refdepth/io.hpp"
#include "refdepth/network.hpp"
#include "refdepth/obstacle.hpp"
#include "refdepth/refmap.hpp"
#include "refdepth/training.hpp"

namespace fs = std::filesystem;
using namespace refdepth;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<int> seed;
  std::optional<int> iterations;
  std::vector<std::string> ablate;
  std::string loss_mode;
  int threads = 1;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? RunConfig() : RunConfig::from_file(args.config_path);
  if (args.seed) {
    cfg.set("seed", std::to_string(*args.seed));
    cfg.set("train_seed", std::to_string(*args.seed));
    cfg.set("net_seed", std::to_string(*args.seed));
  }
  if (args.iterations) cfg.set("iterations", std::to_string(*args.iterations));
  for (const std::string& a : args.ablate) {
    if (a == "reference=off") cfg.set("use_reference", "0");
    else if (a == "skip=off") cfg.set("use_global_skip", "0");
    else throw ConfigError("unknown --ablate value '" + a + "' (reference=off, skip=off)");
  }
  if (!args.loss_mode.empty()) {
    if (args.loss_mode == "cls") cfg.set("alpha", "0");
    else if (args.loss_mode != "cls+reg")
      throw ConfigError("unknown --loss value '" + args.loss_mode + "' (cls, cls+reg)");
  }
  cfg.set("threads", std::to_string(args.threads));
  return cfg;
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);
  cfg.write(out_dir + "/resolved.cfg");
}

int cmd_gen_data(const CommonArgs& args, const std::string& out_dir) {
  const RunConfig cfg = load_config(args);
  echo_config(cfg, out_dir);
  const DatasetConfig dcfg = DatasetConfig::from_run_config(cfg);
  generate_dataset(dcfg, out_dir, args.threads);
  std::cout << "wrote " << dcfg.n_scenes << " samples to " << out_dir << "\n";
  return 0;
}

std::vector<TrainingSample> build_training_set(const std::string& data_dir,
                                               const NetworkConfig& net_cfg) {
  const auto loaded = load_split(data_dir, "train");
  if (loaded.empty()) throw IoError("no training samples under " + data_dir);
  std::vector<TrainingSample> set;
  set.reserve(loaded.size());
  for (const auto& s : loaded) set.push_back(make_training_sample(s, net_cfg));
  return set;
}

int cmd_train(const CommonArgs& args, const std::string& data_dir, const std::string& out_dir) {
  const RunConfig cfg = load_config(args);
  echo_config(cfg, out_dir);
  const NetworkConfig net_cfg = NetworkConfig::from_run_config(cfg);
  const TrainConfig train_cfg = TrainConfig::from_run_config(cfg);
  DepthNetwork net(net_cfg);
  const auto dataset = build_training_set(data_dir, net_cfg);
  const TrainResult result = train(dataset, net, train_cfg, out_dir);
  std::cout << "trained " << result.iterations_run << " iterations, final loss "
            << format_double(result.final_loss) << "\n"
            << "checkpoint: " << result.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint, const std::string& data_dir,
             const std::string& out_dir) {
  const RunConfig cfg = load_config(args);
  echo_config(cfg, out_dir);
  const NetworkConfig net_cfg = NetworkConfig::from_run_config(cfg);
  DepthNetwork net(net_cfg);
  net.load(checkpoint);

  const auto samples = load_split(data_dir, "test");
  if (samples.empty()) throw IoError("no test samples under " + data_dir);

  EvalOptions opts;
  opts.refine_window = cfg.get_int("refine_window");
  opts.band_lo_cm = cfg.get_int("band_lo_cm");
  opts.band_hi_cm = cfg.get_int("band_hi_cm");
  opts.band_step_cm = cfg.get_int("band_step_cm");
  const DatasetEval eval = evaluate_dataset(net, samples, opts);

  write_metrics_csv(out_dir + "/metrics.csv", eval.global);
  write_metrics_csv(out_dir + "/metrics_refined.csv", eval.global_refined);
  write_height_bands_csv(out_dir + "/by_height.csv", eval.by_height);
  write_height_bands_csv(out_dir + "/by_height_refined.csv", eval.by_height_refined);
  std::cout << "evaluated " << eval.n_samples << " samples: rms "
            << format_double(eval.global.rms) << ", rel " << format_double(eval.global.rel)
            << " (refined rms " << format_double(eval.global_refined.rms) << ")\n";
  return 0;
}

int cmd_infer(const CommonArgs& args, const std::string& checkpoint, const std::string& sample,
              const std::string& out_path) {
  const RunConfig cfg = load_config(args);
  const NetworkConfig net_cfg = NetworkConfig::from_run_config(cfg);
  DepthNetwork net(net_cfg);
  net.load(checkpoint);

  const GrayImage image = read_pgm(sample + ".image.pgm");
  const LaserScan scan = read_scan_csv(sample + ".scan.csv");
  const CameraMeta meta = read_camera_meta(sample + ".camera.txt");
  ReferenceDepthMap ref = build_reference(scan, meta.gravity, meta.intrinsics);
  ref.source_scan = sample + ".scan.csv";

  InferenceEngine engine(net);
  write_pfm(out_path, engine.predict(image, ref));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_render_ref(const std::string& scan_path, const std::string& camera_path,
                   const std::string& out_path, int window) {
  const LaserScan scan = read_scan_csv(scan_path);
  const CameraMeta meta = read_camera_meta(camera_path);
  ReferenceDepthMap ref = build_reference(scan, meta.gravity, meta.intrinsics, window);
  ref.source_scan = scan_path;
  write_pfm(out_path, ref.depth);

  std::string mask_path = out_path;
  const auto dot = mask_path.rfind(".pfm");
  if (dot != std::string::npos) mask_path.resize(dot);
  mask_path += ".extrapolated.pgm";
  write_mask_pgm(mask_path, ref.depth.width, ref.depth.height, ref.extrapolated);
  std::cout << "wrote " << out_path << " and " << mask_path << "\n";
  return 0;
}

int cmd_obstacle(const CommonArgs& args, const std::string& sample, const std::string& out_dir,
                 const std::string& checkpoint, const std::vector<double>& heights,
                 double max_height) {
  const RunConfig cfg = load_config(args);
  Scene scene;
  CameraPose pose;
  load_scene_json(sample + ".scene.json", scene, pose);
  const CameraMeta meta = read_camera_meta(sample + ".camera.txt");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  std::optional<DepthNetwork> net;
  std::optional<InferenceEngine> engine;
  DepthPredictor predictor;
  const DepthPredictor* predictor_ptr = nullptr;
  if (!checkpoint.empty()) {
    net.emplace(NetworkConfig::from_run_config(cfg));
    net->load(checkpoint);
    engine.emplace(*net);
    const int w = meta.intrinsics.width, h = meta.intrinsics.height;
    predictor = [&engine, w, h](const GrayImage& image, const ReferenceDepthMap& ref) {
      return InferenceEngine::upscale(engine->predict(image, ref), w, h);
    };
    predictor_ptr = &predictor;
  }

  const ObstacleComparison cmp = compare_obstacle_sources(
      scene, pose, meta.intrinsics, heights, predictor_ptr, max_height,
      cfg.get_int("obstacle_bearings"), 0.3, cfg.get_double("laser_height"));
  write_obstacle_csv(out_dir + "/obstacle.csv", cmp);

  std::ofstream missed(out_dir + "/missed_bins.csv");
  if (!missed) throw IoError("cannot write missed_bins.csv");
  missed << "source,bin,bearing_rad\n";
  for (const auto& [source, bins] : cmp.missed_bins)
    for (int b : bins)
      missed << source << "," << b << ","
             << format_double(cmp.sources.back().map.bearings[b]) << "\n";
  std::cout << "wrote " << out_dir << "/obstacle.csv\n";
  for (const auto& [source, bins] : cmp.missed_bins)
    std::cout << source << " misses " << bins.size() << " bins detected in ground truth\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laser-guided monocular depth estimation pipeline"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out_dir, data_dir, checkpoint, sample, scan_path, camera_path, out_path;
  std::string heights_csv = "0.2,0.8";
  double max_height = 1.0;
  int window = 5;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "key=value config file");
    cmd->add_option("--seed", common.seed, "override all seeds");
    cmd->add_option("--threads", common.threads, "worker threads (1 = deterministic)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen);
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train the depth network");
  add_common(train_cmd);
  train_cmd->add_option("--data", data_dir, "dataset directory")->required();
  train_cmd->add_option("--out", out_dir, "run directory")->required();
  train_cmd->add_option("--iterations", common.iterations, "override iteration count");
  train_cmd->add_option("--ablate", common.ablate, "reference=off | skip=off");
  train_cmd->add_option("--loss", common.loss_mode, "cls | cls+reg");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI::App* infer_cmd = app.add_subcommand("infer", "predict depth for one sample");
  add_common(infer_cmd);
  infer_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  infer_cmd->add_option("--sample", sample, "sample path prefix")->required();
  infer_cmd->add_option("--out", out_path, "output PFM path")->required();

  CLI::App* render_cmd = app.add_subcommand("render-ref", "render a reference map from a scan");
  render_cmd->add_option("--scan", scan_path, "laser scan CSV")->required();
  render_cmd->add_option("--camera", camera_path, "camera meta file")->required();
  render_cmd->add_option("--out", out_path, "output PFM path")->required();
  render_cmd->add_option("--window", window, "median filter window");

  CLI::App* obstacle_cmd = app.add_subcommand("obstacle", "compare obstacle-map sources");
  add_common(obstacle_cmd);
  obstacle_cmd->add_option("--sample", sample, "sample path prefix")->required();
  obstacle_cmd->add_option("--out", out_dir, "output directory")->required();
  obstacle_cmd->add_option("--checkpoint", checkpoint, "optional model checkpoint");
  obstacle_cmd->add_option("--heights", heights_csv, "laser heights (meters, comma separated)");
  obstacle_cmd->add_option("--max-height", max_height, "obstacle height cap M (meters)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common, out_dir);
    if (train_cmd->parsed()) return cmd_train(common, data_dir, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(common, checkpoint, data_dir, out_dir);
    if (infer_cmd->parsed()) return cmd_infer(common, checkpoint, sample, out_path);
    if (render_cmd->parsed()) return cmd_render_ref(scan_path, camera_path, out_path, window);
    if (obstacle_cmd->parsed()) {
      std::vector<double> heights;
      size_t start = 0;
      while (start < heights_csv.size()) {
        const size_t comma = heights_csv.find(',', start);
        heights.push_back(std::strtod(heights_csv.substr(start, comma - start).c_str(), nullptr));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return cmd_obstacle(common, sample, out_dir, checkpoint, heights, max_height);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
