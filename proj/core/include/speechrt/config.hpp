#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "speechrt/backbone.hpp"
#include "speechrt/codec.hpp"
#include "speechrt/reasoner.hpp"
#include "speechrt/refiner.hpp"
#include "speechrt/training.hpp"

namespace speechrt {

// `key = value` lines; `#` starts a comment. Every lookup marks the key as used
// so leftovers can be reported as unknown.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  std::uint64_t get(const std::string& key, std::uint64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  int get(const std::string& key, int fallback) const;

  std::vector<std::string> unused() const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

struct RuntimeConfig {
  StubConfig reasoner;
  BackboneConfig backbone;
  RefinerConfig refiner;
  CodecConfig codec;
  TrainConfig train;
  std::size_t codec_pool_speakers = 16;
  std::size_t codec_pool_frames = 128;
  std::uint64_t codec_pool_seed = 13;
  std::size_t decode_group = 4;
  std::size_t channel_capacity = 8;

  // Throws ConfigError on unknown keys or inconsistent shared dimensions.
  static RuntimeConfig from(const KeyValueConfig& kv);
  static RuntimeConfig from_text(const std::string& text) { return from(KeyValueConfig::parse(text)); }
  static RuntimeConfig from_file(const std::filesystem::path& path) { return from(KeyValueConfig::load(path)); }

  std::string to_text() const;
  void validate() const;
};

}  // namespace speechrt
