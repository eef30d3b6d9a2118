#pragma once

// Study configuration: TOML files with [section] tables, flat dotted keys
// ("model.alpha") and `--set key=value` overrides. Every key a study accepts
// is declared up front with a default; anything else is rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rbm {

struct KeySpec {
  std::string key;            // "section.name"
  std::string default_value;  // TOML literal, e.g. 1.0, 64, "dirac", [0.5, 0.25]
  std::string help;
};

class Config {
 public:
  explicit Config(std::span<const KeySpec> keys);
  Config(const Config& other);
  Config& operator=(const Config& other);
  Config(Config&&) noexcept;
  Config& operator=(Config&&) noexcept;
  ~Config();

  /// Overlays a TOML file. Missing file, parse errors and unknown keys throw
  /// ConfigError (the message names the path).
  void merge_file(const std::filesystem::path& path);
  /// Overlays TOML text (same rules as merge_file).
  void merge_text(const std::string& text, const std::string& origin = "<text>");
  /// Applies one "key=value" override. Bare words are taken as strings.
  void set(const std::string& assignment);

  bool has(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;

  /// Resolved configuration as TOML text (keys sorted by section).
  std::string to_toml() const;
  /// Resolved configuration as a JSON object string.
  std::string to_json() const;

  std::span<const KeySpec> keys() const noexcept { return keys_; }

 private:
  struct Impl;
  std::vector<KeySpec> keys_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rbm
