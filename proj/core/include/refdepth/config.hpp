#pragma once

#include <map>
#include <string>

namespace refdepth {

/// Flat key=value run configuration. Every key is validated against a fixed
/// schema with defaults; unknown keys are rejected by name. The fully
/// resolved set (defaults plus overrides) can be echoed back to disk so a
/// run directory always records the exact configuration it ran with.
class RunConfig {
 public:
  /// All defaults, no overrides.
  RunConfig();

  static RunConfig from_file(const std::string& path);
  static RunConfig from_map(const std::map<std::string, std::string>& kv);

  /// Applies one override; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;

  /// Writes the resolved configuration, keys sorted.
  void write(const std::string& path) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace refdepth
