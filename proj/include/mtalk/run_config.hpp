#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtalk/model.hpp"
#include "mtalk/training.hpp"

namespace mtalk::cli {

struct ConfigKey {
  std::string name;
  std::string description;
};

// Flat key=value settings. Blank lines and lines starting with '#' are ignored.
// Unset keys take model defaults or the stage's TrainConfig defaults.
class RunConfig {
 public:
  static const std::vector<ConfigKey>& keys();

  // ConfigError naming the line for malformed lines, unknown keys or bad values.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text, const std::string& source = "<config>");

  // ConfigError for an unknown key or a value of the wrong type.
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void apply_override(const std::string& assignment);
  bool has(const std::string& key) const { return values_.contains(key); }

  ModelConfig model_config(std::size_t motion_dim, std::size_t video_dim, std::size_t vocab) const;
  training::TrainConfig train_config(int stage) const;
  std::size_t max_new_tokens() const;
  std::size_t tolerance() const;

  // Every key with its effective value for the stage.
  std::map<std::string, std::string> effective(int stage) const;
  // The same as sorted "key=value" lines.
  std::string effective_text(int stage) const;

 private:
  std::string get(const std::string& key, const std::string& fallback) const;

  std::map<std::string, std::string> values_;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace mtalk::cli
