#include "refdepth/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <unistd.h>

#include "refdepth/error.hpp"

using namespace refdepth;

TEST(Config, DefaultsResolve) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.get_int("k_bins"), 101);
  EXPECT_DOUBLE_EQ(cfg.get_double("alpha"), 1.0);
  EXPECT_DOUBLE_EQ(cfg.get_double("laser_height"), 0.8);
  EXPECT_EQ(cfg.get_string("bins"), "residual");
  EXPECT_TRUE(cfg.get_bool("use_reference"));
  EXPECT_EQ(cfg.get_int("batch_size"), 16);
}

TEST(Config, UnknownKeyNamedInError) {
  RunConfig cfg;
  try {
    cfg.set("no_such_key", "1");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no_such_key"), std::string::npos);
  }
}

TEST(Config, TypeValidation) {
  RunConfig cfg;
  EXPECT_THROW(cfg.set("k_bins", "many"), ConfigError);
  EXPECT_THROW(cfg.set("alpha", "fast"), ConfigError);
  EXPECT_THROW(cfg.set("augment_flip", "maybe"), ConfigError);
  EXPECT_THROW(cfg.set("bins", "log"), ConfigError);
  cfg.set("bins", "absolute");
  EXPECT_EQ(cfg.get_string("bins"), "absolute");
}

TEST(Config, EchoReloadsIdentically) {
  RunConfig cfg;
  cfg.set("n_scenes", "42");
  cfg.set("lr0", "0.005");
  const auto dir = std::filesystem::temp_directory_path() /
                   ("refdepth_cfg_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "resolved.cfg").string();
  cfg.write(path);
  const RunConfig back = RunConfig::from_file(path);
  EXPECT_EQ(back.values(), cfg.values());
}
