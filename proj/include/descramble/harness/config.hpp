#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace descramble::harness {

/// Flat key/value store read from an INI-like file. Keys inside `[section]`
/// are stored as `section.key`; `#` and `;` start comments.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<string>");
  static Config load(const std::filesystem::path& path);

  /// Later values win; used for `--set key=value` overrides and layered files.
  void set(const std::string& key, const std::string& value);
  void merge(const Config& other);
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace descramble::harness
