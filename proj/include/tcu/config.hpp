#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tcu {

/// Flat `key = value` configuration file.
///
/// Syntax: one `key = value` pair per line, `#` starts a comment, blank
/// lines ignored. Keys are dotted lowercase (`plant.heat_gain`). Values are
/// scalars or, for reference profiles, a comma-separated list of
/// `duration_s:level_c` segments, e.g. `profile = 600:40, 900:55`.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  /// Required variants: throw ConfigError when the key is missing.
  double require_double(const std::string& key) const;

  /// Parses a `duration_s:level_c, ...` list. Throws ConfigError on syntax errors.
  std::vector<std::pair<double, double>> get_profile(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// FNV-1a over the canonical `key=value` lines; stable across reordering.
  std::uint64_t hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace tcu
