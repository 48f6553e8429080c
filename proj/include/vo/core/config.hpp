// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

namespace vo {

// Plain-text key-value configuration. One `key = value` per line, '#'
// starts a comment, keys use dotted paths (e.g. ransac.threshold).
// Command-line overrides of the form `--key=value` take precedence over
// file entries, which take precedence over built-in defaults.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  std::string get_str(const std::string& key, const std::string& dflt) const;
  double get_double(const std::string& key, double dflt) const;
  int get_int(const std::string& key, int dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) const;

  // Accepts "key=value" or "--key=value".
  void apply_override(const std::string& arg);

  std::string serialize() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace vo
