#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace insole {

// Plain key=value configuration. Lines starting with '#' and blank lines are
// ignored; whitespace around keys and values is trimmed.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  // Typed getters return `fallback` when the key is absent and throw
  // std::invalid_argument when the value does not parse.
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  std::string get_string(const std::string& key, std::string fallback) const;
  // Comma-separated list of reals, e.g. "1200, 1100, 1400".
  std::vector<double> get_list(const std::string& key) const;

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace insole
