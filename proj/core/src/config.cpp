#include "refdepth/config.hpp"

#include <array>
#include <cstdlib>
#include <string_view>

#include "refdepth/error.hpp"
#include "refdepth/io.hpp"

namespace refdepth {

namespace {

enum class KeyType { Int, Double, Bool, String };

struct KeySpec {
  std::string_view name;
  KeyType type;
  std::string_view default_value;
  std::string_view allowed;  // comma-separated, String keys only; empty = any
};

// One flat schema across dataset generation, network, training and
// evaluation; a command reads the keys it needs.
constexpr std::array<KeySpec, 56> kSchema = {{
    // dataset / scene generation
    {"n_scenes", KeyType::Int, "10", ""},
    {"split_ratio", KeyType::Double, "0.8", ""},
    {"image_width", KeyType::Int, "64", ""},
    {"image_height", KeyType::Int, "48", ""},
    {"fx", KeyType::Double, "60", ""},
    {"fy", KeyType::Double, "60", ""},
    {"cx", KeyType::Double, "32", ""},
    {"cy", KeyType::Double, "24", ""},
    {"camera_height", KeyType::Double, "1.0", ""},
    {"laser_height", KeyType::Double, "0.8", ""},
    {"laser_rays", KeyType::Int, "0", ""},     // 0 = image_width
    {"laser_fov", KeyType::Double, "0", ""},   // 0 = camera horizontal FOV
    {"laser_noise_sigma", KeyType::Double, "0.01", ""},
    {"laser_dropout", KeyType::Double, "0.05", ""},
    {"max_range", KeyType::Double, "20.0", ""},
    {"room_min", KeyType::Double, "4.0", ""},
    {"room_max", KeyType::Double, "8.0", ""},
    {"wall_height", KeyType::Double, "2.5", ""},
    {"box_count_min", KeyType::Int, "2", ""},
    {"box_count_max", KeyType::Int, "6", ""},
    {"box_size_min", KeyType::Double, "0.2", ""},
    {"box_size_max", KeyType::Double, "1.5", ""},
    {"seed", KeyType::Int, "1", ""},
    // network
    {"k_bins", KeyType::Int, "101", ""},
    {"residual_range", KeyType::Double, "2.0", ""},
    {"bins", KeyType::String, "residual", "residual,absolute"},
    {"stem_channels", KeyType::Int, "16", ""},
    {"stage1_channels", KeyType::Int, "16", ""},
    {"stage2_channels", KeyType::Int, "32", ""},
    {"deconv_channels", KeyType::Int, "16", ""},
    {"norm", KeyType::String, "batch", "batch,affine"},
    {"depth_min", KeyType::Double, "0.1", ""},
    {"depth_max", KeyType::Double, "20.0", ""},
    {"net_seed", KeyType::Int, "1", ""},
    {"use_reference", KeyType::Bool, "1", ""},
    {"use_global_skip", KeyType::Bool, "1", ""},
    // training
    {"batch_size", KeyType::Int, "16", ""},
    {"alpha", KeyType::Double, "1.0", ""},
    {"lr0", KeyType::Double, "0.01", ""},
    {"lr_decay_base", KeyType::Double, "0.98", ""},
    {"lr_decay_step", KeyType::Int, "1000", ""},
    {"iterations", KeyType::Int, "500", ""},
    {"momentum", KeyType::Double, "0.9", ""},
    {"augment_flip", KeyType::Bool, "1", ""},
    {"augment_scale", KeyType::Bool, "1", ""},
    {"scale_jitter_lo", KeyType::Double, "0.8", ""},
    {"scale_jitter_hi", KeyType::Double, "1.2", ""},
    {"checkpoint_interval", KeyType::Int, "0", ""},  // 0 = final only
    {"train_seed", KeyType::Int, "1", ""},
    // evaluation
    {"refine_window", KeyType::Int, "3", ""},
    {"band_lo_cm", KeyType::Int, "10", ""},
    {"band_hi_cm", KeyType::Int, "210", ""},
    {"band_step_cm", KeyType::Int, "10", ""},
    {"obstacle_max_height", KeyType::Double, "1.0", ""},
    {"obstacle_bearings", KeyType::Int, "64", ""},
    {"threads", KeyType::Int, "1", ""},
}};

const KeySpec* find_key(const std::string& key) {
  for (const KeySpec& spec : kSchema)
    if (spec.name == key) return &spec;
  return nullptr;
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "1" || v == "true" || v == "on") { out = true; return true; }
  if (v == "0" || v == "false" || v == "off") { out = false; return true; }
  return false;
}

void check_value(const KeySpec& spec, const std::string& value) {
  const std::string key(spec.name);
  switch (spec.type) {
    case KeyType::Int: {
      char* end = nullptr;
      (void)std::strtol(value.c_str(), &end, 10);
      if (end == value.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "': expected integer, got '" + value + "'");
      break;
    }
    case KeyType::Double: {
      char* end = nullptr;
      (void)std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "': expected number, got '" + value + "'");
      break;
    }
    case KeyType::Bool: {
      bool b;
      if (!parse_bool(value, b))
        throw ConfigError("config key '" + key + "': expected boolean, got '" + value + "'");
      break;
    }
    case KeyType::String: {
      if (spec.allowed.empty()) break;
      std::string_view rest = spec.allowed;
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        if (item == value) return;
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      throw ConfigError("config key '" + key + "': '" + value + "' not in {" +
                        std::string(spec.allowed) + "}");
    }
  }
}

}  // namespace

RunConfig::RunConfig() {
  for (const KeySpec& spec : kSchema)
    values_[std::string(spec.name)] = std::string(spec.default_value);
}

RunConfig RunConfig::from_file(const std::string& path) {
  return from_map(read_kv(path));
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv) cfg.set(key, value);
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key '" + key + "'");
  check_value(*spec, value);
  values_[key] = value;
}

int RunConfig::get_int(const std::string& key) const {
  return static_cast<int>(std::strtol(values_.at(key).c_str(), nullptr, 10));
}

double RunConfig::get_double(const std::string& key) const {
  return std::strtod(values_.at(key).c_str(), nullptr);
}

bool RunConfig::get_bool(const std::string& key) const {
  bool b = false;
  parse_bool(values_.at(key), b);
  return b;
}

const std::string& RunConfig::get_string(const std::string& key) const {
  return values_.at(key);
}

void RunConfig::write(const std::string& path) const {
  write_kv(path, values_);
}

}  // namespace refdepth
