#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mtgrid::cli {

// Flat key/value configuration read from a TOML-style file:
//
//   # comment
//   seed = 3
//   [train]
//   peak_lr = 1e-3          -> key "train.peak_lr"
//   stages = "pretrain_1,pretrain_2"
//
// Values are scalars (numbers, booleans, bare words or quoted strings).
// Dotted overrides ("train.peak_lr=2e-3") replace or add keys.
class RunConfig {
 public:
  static RunConfig parse(std::string_view text, const std::string& origin = "<string>");
  static RunConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  // "key=value"; throws InvalidArgument when malformed.
  void apply_override(std::string_view assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list; empty entries dropped.
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  // Same format as parse() accepts, keys grouped by section in sorted order.
  // Every value read through a getter is recorded, so the snapshot also
  // holds the defaults that were used.
  std::string serialize() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> defaults_used_;
};

}  // namespace mtgrid::cli
