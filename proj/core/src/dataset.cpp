#include "refdepth/dataset.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <json.hpp>

#include "refdepth/error.hpp"
#include "refdepth/image_io.hpp"

namespace fs = std::filesystem;

namespace refdepth {

DatasetConfig DatasetConfig::from_run_config(const RunConfig& cfg) {
  DatasetConfig d;
  d.n_scenes = cfg.get_int("n_scenes");
  d.split_ratio = cfg.get_double("split_ratio");
  d.intrinsics.fx = cfg.get_double("fx");
  d.intrinsics.fy = cfg.get_double("fy");
  d.intrinsics.cx = cfg.get_double("cx");
  d.intrinsics.cy = cfg.get_double("cy");
  d.intrinsics.width = cfg.get_int("image_width");
  d.intrinsics.height = cfg.get_int("image_height");
  d.intrinsics.validate();
  d.camera_height = cfg.get_double("camera_height");
  d.laser_height = cfg.get_double("laser_height");
  d.laser_rays = cfg.get_int("laser_rays");
  d.laser_fov = cfg.get_double("laser_fov");
  d.laser_noise_sigma = cfg.get_double("laser_noise_sigma");
  d.laser_dropout = cfg.get_double("laser_dropout");
  d.max_range = cfg.get_double("max_range");
  d.room_min = cfg.get_double("room_min");
  d.room_max = cfg.get_double("room_max");
  d.wall_height = cfg.get_double("wall_height");
  d.box_count_min = cfg.get_int("box_count_min");
  d.box_count_max = cfg.get_int("box_count_max");
  d.box_size_min = cfg.get_double("box_size_min");
  d.box_size_max = cfg.get_double("box_size_max");
  d.seed = static_cast<uint64_t>(cfg.get_int("seed"));
  if (d.n_scenes < 2) throw ConfigError("n_scenes must be >= 2");
  if (d.split_ratio <= 0.0 || d.split_ratio >= 1.0)
    throw ConfigError("split_ratio must be in (0, 1)");
  if (d.laser_height >= d.camera_height)
    throw ConfigError("laser_height must be below camera_height");
  return d;
}

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

SceneSample make_sample(const DatasetConfig& cfg, int scene_index) {
  const uint64_t sample_seed = splitmix64(cfg.seed ^ (0x5eedull + scene_index));
  std::mt19937_64 rng(sample_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SceneSample s;
  const double rw = uniform(cfg.room_min, cfg.room_max);
  const double rd = uniform(cfg.room_min, cfg.room_max);

  s.scene.max_range = cfg.max_range;
  s.scene.ground_albedo = static_cast<float>(uniform(0.3, 1.0));
  s.scene.walls = {
      {0, 0.0, cfg.wall_height, static_cast<float>(uniform(0.3, 1.0))},
      {0, rw, cfg.wall_height, static_cast<float>(uniform(0.3, 1.0))},
      {2, 0.0, cfg.wall_height, static_cast<float>(uniform(0.3, 1.0))},
      {2, rd, cfg.wall_height, static_cast<float>(uniform(0.3, 1.0))},
  };

  const double margin = 0.8;
  s.pose.position = {uniform(margin, rw - margin), cfg.camera_height, uniform(margin, rd - margin)};
  s.pose.yaw = uniform(0.0, 2.0 * M_PI);
  s.pose.pitch = 0.0;

  std::uniform_int_distribution<int> count_dist(cfg.box_count_min, cfg.box_count_max);
  const int n_boxes = count_dist(rng);
  for (int b = 0; b < n_boxes; ++b) {
    for (int attempt = 0; attempt < 16; ++attempt) {
      const double sx = uniform(cfg.box_size_min, cfg.box_size_max);
      const double sy = uniform(cfg.box_size_min, cfg.box_size_max);
      const double sz = uniform(cfg.box_size_min, cfg.box_size_max);
      const double x = uniform(0.3 + sx / 2.0, rw - 0.3 - sx / 2.0);
      const double z = uniform(0.3 + sz / 2.0, rd - 0.3 - sz / 2.0);
      const double dx = x - s.pose.position.x, dz = z - s.pose.position.z;
      if (std::sqrt(dx * dx + dz * dz) < margin) continue;  // keep the camera clear
      Box box;
      box.lo = {x - sx / 2.0, 0.0, z - sz / 2.0};
      box.hi = {x + sx / 2.0, sy, z + sz / 2.0};
      box.albedo = static_cast<float>(uniform(0.3, 1.0));
      s.scene.boxes.push_back(box);
      break;
    }
  }
  s.scene.validate();

  s.gt_depth = raycast_depth(s.scene, s.pose, cfg.intrinsics);
  s.image = shade_image(s.scene, s.pose, cfg.intrinsics);
  s.scan = simulate_laser(s.scene, s.pose, cfg.laser_height, cfg.effective_laser_fov(),
                          cfg.effective_laser_rays(), cfg.laser_noise_sigma, cfg.laser_dropout,
                          splitmix64(sample_seed ^ 0x1a5e7ull));
  s.meta.intrinsics = cfg.intrinsics;
  s.meta.gravity = s.pose.gravity_frame();
  return s;
}

void save_scene_json(const std::string& path, const Scene& scene, const CameraPose& pose) {
  nlohmann::json j;
  j["max_range"] = scene.max_range;
  j["ground_albedo"] = scene.ground_albedo;
  for (const Wall& w : scene.walls)
    j["walls"].push_back({{"axis", w.axis}, {"offset", w.offset}, {"top", w.top},
                          {"albedo", w.albedo}});
  for (const Box& b : scene.boxes)
    j["boxes"].push_back({{"lo", {b.lo.x, b.lo.y, b.lo.z}},
                          {"hi", {b.hi.x, b.hi.y, b.hi.z}},
                          {"albedo", b.albedo}});
  j["pose"] = {{"x", pose.position.x}, {"y", pose.position.y}, {"z", pose.position.z},
               {"yaw", pose.yaw},      {"pitch", pose.pitch}};
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path);
}

void load_scene_json(const std::string& path, Scene& scene, CameraPose& pose) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    f >> j;
    scene = Scene{};
    scene.max_range = j.at("max_range").get<double>();
    scene.ground_albedo = j.at("ground_albedo").get<float>();
    if (j.contains("walls"))
      for (const auto& w : j["walls"])
        scene.walls.push_back({w.at("axis").get<int>(), w.at("offset").get<double>(),
                               w.at("top").get<double>(), w.at("albedo").get<float>()});
    if (j.contains("boxes"))
      for (const auto& b : j["boxes"]) {
        Box box;
        box.lo = {b.at("lo")[0].get<double>(), b.at("lo")[1].get<double>(),
                  b.at("lo")[2].get<double>()};
        box.hi = {b.at("hi")[0].get<double>(), b.at("hi")[1].get<double>(),
                  b.at("hi")[2].get<double>()};
        box.albedo = b.at("albedo").get<float>();
        scene.boxes.push_back(box);
      }
    const auto& p = j.at("pose");
    pose.position = {p.at("x").get<double>(), p.at("y").get<double>(), p.at("z").get<double>()};
    pose.yaw = p.at("yaw").get<double>();
    pose.pitch = p.at("pitch").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed scene json " + path + ": " + e.what());
  }
  scene.validate();
}

namespace {

struct SamplePaths {
  std::string prefix, image, depth, scan, camera, scene;
};

SamplePaths sample_paths(const std::string& out_dir, const std::string& split, int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "sample_%04d", index);
  SamplePaths p;
  p.prefix = out_dir + "/" + split + "/" + name;
  p.image = p.prefix + ".image.pgm";
  p.depth = p.prefix + ".depth.pfm";
  p.scan = p.prefix + ".scan.csv";
  p.camera = p.prefix + ".camera.txt";
  p.scene = p.prefix + ".scene.json";
  return p;
}

void write_sample(const SceneSample& s, const SamplePaths& p) {
  write_pgm(p.image, s.image);
  write_pfm(p.depth, s.gt_depth);
  write_scan_csv(p.scan, s.scan);
  write_camera_meta(p.camera, s.meta);
  save_scene_json(p.scene, s.scene, s.pose);
}

}  // namespace

void generate_dataset(const DatasetConfig& cfg, const std::string& out_dir, int threads) {
  std::error_code ec;
  fs::create_directories(out_dir + "/train", ec);
  fs::create_directories(out_dir + "/test", ec);
  if (ec) throw IoError("cannot create dataset directory: " + out_dir);

  const int n_train = static_cast<int>(cfg.n_scenes * cfg.split_ratio + 0.5);

  auto split_of = [&](int i) { return i < n_train ? std::string("train") : std::string("test"); };
  auto index_in_split = [&](int i) { return i < n_train ? i : i - n_train; };

  auto emit = [&](int i) {
    const SceneSample s = make_sample(cfg, i);
    write_sample(s, sample_paths(out_dir, split_of(i), index_in_split(i)));
  };

  if (threads <= 1) {
    for (int i = 0; i < cfg.n_scenes; ++i) emit(i);
  } else {
    // Samples are independent and deterministic per index.
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < cfg.n_scenes; i = next.fetch_add(1)) emit(i);
      });
    for (auto& t : pool) t.join();
  }

  std::ofstream manifest(out_dir + "/manifest.csv");
  if (!manifest) throw IoError("cannot write manifest: " + out_dir);
  manifest << "index,split,image,depth,scan,camera,scene\n";
  for (int i = 0; i < cfg.n_scenes; ++i) {
    const auto p = sample_paths(".", split_of(i), index_in_split(i));
    manifest << i << "," << split_of(i) << "," << p.image.substr(2) << "," << p.depth.substr(2)
             << "," << p.scan.substr(2) << "," << p.camera.substr(2) << "," << p.scene.substr(2)
             << "\n";
  }
  if (!manifest) throw IoError("manifest write failed");
}

std::vector<LoadedSample> load_split(const std::string& dataset_dir, const std::string& split) {
  std::ifstream manifest(dataset_dir + "/manifest.csv");
  if (!manifest) throw IoError("cannot open manifest: " + dataset_dir + "/manifest.csv");
  std::vector<LoadedSample> samples;
  std::string line;
  std::getline(manifest, line);  // header
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      const size_t comma = line.find(',', start);
      cols.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cols.size() != 7) throw IoError("malformed manifest row: " + line);
    if (cols[1] != split) continue;
    LoadedSample s;
    s.image = read_pgm(dataset_dir + "/" + cols[2]);
    s.gt = read_pfm(dataset_dir + "/" + cols[3]);
    s.scan = read_scan_csv(dataset_dir + "/" + cols[4]);
    s.meta = read_camera_meta(dataset_dir + "/" + cols[5]);
    const std::string scene_path = dataset_dir + "/" + cols[6];
    s.prefix = scene_path.substr(0, scene_path.size() - std::string(".scene.json").size());
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace refdepth
