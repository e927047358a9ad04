#include "mtalk/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mtalk/errors.hpp"

namespace mtalk::cli {

namespace {

enum class Kind { kCount, kReal, kFlag };

struct KeyInfo {
  const char* name;
  Kind kind;
  const char* description;
};

constexpr KeyInfo kKeys[] = {
    {"seed", Kind::kCount, "model initialization and shuffle seed"},
    {"hidden", Kind::kCount, "feature width H"},
    {"max_tokens", Kind::kCount, "decoder positional table size"},
    {"viewpoints", Kind::kCount, "viewpoint frames K"},
    {"segment_size", Kind::kCount, "frames per pooled segment S_n"},
    {"score_scaling", Kind::kFlag, "weight viewpoints by their relevance scores"},
    {"lr_max", Kind::kReal, "peak learning rate"},
    {"epochs", Kind::kCount, "training epochs"},
    {"warmup_fraction", Kind::kReal, "fraction of steps spent in linear warmup"},
    {"beta1", Kind::kReal, "Adam first-moment decay"},
    {"beta2", Kind::kReal, "Adam second-moment decay"},
    {"epsilon", Kind::kReal, "Adam epsilon"},
    {"clip_norm", Kind::kReal, "global gradient-norm clip, 0 disables"},
    {"pretrain_epochs", Kind::kCount, "decoder reading pretraining epochs before stage 1"},
    {"lora_enabled", Kind::kFlag, "attach LoRA adapters in stage 2"},
    {"lora_rank", Kind::kCount, "LoRA rank r"},
    {"lora_alpha", Kind::kReal, "LoRA alpha"},
    {"max_new_tokens", Kind::kCount, "greedy decoding length limit for eval"},
    {"tolerance", Kind::kCount, "key-frame matching tolerance in frames"},
};

const KeyInfo* find_key(const std::string& name) {
  for (const auto& k : kKeys)
    if (name == k.name) return &k;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool to_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string format_real(double v) { return nlohmann::json(v).dump(); }

}  // namespace

const std::vector<ConfigKey>& RunConfig::keys() {
  static const std::vector<ConfigKey> out = [] {
    std::vector<ConfigKey> v;
    for (const auto& k : kKeys) v.push_back({k.name, k.description});
    return v;
  }();
  return out;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key=value");
    }
    try {
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeyInfo* info = find_key(key);
  if (!info) throw ConfigError("unknown config key '" + key + "'");
  switch (info->kind) {
    case Kind::kCount: to_count(key, value); break;
    case Kind::kReal: to_real(key, value); break;
    case Kind::kFlag: to_flag(key, value); break;
  }
  values_[key] = value;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

ModelConfig RunConfig::model_config(std::size_t motion_dim, std::size_t video_dim, std::size_t vocab) const {
  const auto e = effective(1);
  ModelConfig m;
  m.motion_dim = motion_dim;
  m.video_dim = video_dim;
  m.vocab = vocab;
  m.seed = to_count("seed", e.at("seed"));
  m.hidden = to_count("hidden", e.at("hidden"));
  m.max_tokens = to_count("max_tokens", e.at("max_tokens"));
  m.viewpoints = to_count("viewpoints", e.at("viewpoints"));
  m.segment_size = to_count("segment_size", e.at("segment_size"));
  m.score_scaling = to_flag("score_scaling", e.at("score_scaling"));
  if (m.hidden == 0) throw ConfigError("hidden must be positive");
  if (m.segment_size == 0) throw ConfigError("segment_size must be positive");
  return m;
}

training::TrainConfig RunConfig::train_config(int stage) const {
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  const auto e = effective(stage);
  training::TrainConfig c = training::TrainConfig::defaults(stage);
  c.seed = to_count("seed", e.at("seed"));
  c.lr_max = to_real("lr_max", e.at("lr_max"));
  c.epochs = to_count("epochs", e.at("epochs"));
  c.warmup_fraction = to_real("warmup_fraction", e.at("warmup_fraction"));
  c.beta1 = to_real("beta1", e.at("beta1"));
  c.beta2 = to_real("beta2", e.at("beta2"));
  c.epsilon = to_real("epsilon", e.at("epsilon"));
  c.clip_norm = to_real("clip_norm", e.at("clip_norm"));
  c.pretrain_epochs = to_count("pretrain_epochs", e.at("pretrain_epochs"));
  c.lora.enabled = to_flag("lora_enabled", e.at("lora_enabled"));
  c.lora.rank = to_count("lora_rank", e.at("lora_rank"));
  c.lora.alpha = to_real("lora_alpha", e.at("lora_alpha"));
  c.validate();
  return c;
}

std::size_t RunConfig::max_new_tokens() const {
  return to_count("max_new_tokens", effective(1).at("max_new_tokens"));
}

std::size_t RunConfig::tolerance() const { return to_count("tolerance", effective(1).at("tolerance")); }

std::map<std::string, std::string> RunConfig::effective(int stage) const {
  const ModelConfig m;
  const training::TrainConfig t = training::TrainConfig::defaults(stage == 2 ? 2 : 1);
  const std::map<std::string, std::string> defaults = {
      {"seed", std::to_string(m.seed)},
      {"hidden", std::to_string(m.hidden)},
      {"max_tokens", std::to_string(m.max_tokens)},
      {"viewpoints", std::to_string(m.viewpoints)},
      {"segment_size", std::to_string(m.segment_size)},
      {"score_scaling", m.score_scaling ? "true" : "false"},
      {"lr_max", format_real(t.lr_max)},
      {"epochs", std::to_string(t.epochs)},
      {"warmup_fraction", format_real(t.warmup_fraction)},
      {"beta1", format_real(t.beta1)},
      {"beta2", format_real(t.beta2)},
      {"epsilon", format_real(t.epsilon)},
      {"clip_norm", format_real(t.clip_norm)},
      {"pretrain_epochs", std::to_string(t.pretrain_epochs)},
      {"lora_enabled", t.lora.enabled ? "true" : "false"},
      {"lora_rank", std::to_string(t.lora.rank)},
      {"lora_alpha", format_real(t.lora.alpha)},
      {"max_new_tokens", "16"},
      {"tolerance", "2"},
  };
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : defaults) out[k] = get(k, v);
  return out;
}

std::string RunConfig::effective_text(int stage) const {
  std::string out;
  for (const auto& [k, v] : effective(stage)) out += k + "=" + v + "\n";
  return out;
}

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"motion_dim", cfg.motion_dim}, {"video_dim", cfg.video_dim},   {"hidden", cfg.hidden},
          {"vocab", cfg.vocab},           {"max_tokens", cfg.max_tokens}, {"viewpoints", cfg.viewpoints},
          {"segment_size", cfg.segment_size}, {"score_scaling", cfg.score_scaling}, {"seed", cfg.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig m;
    m.motion_dim = j.at("motion_dim").get<std::size_t>();
    m.video_dim = j.at("video_dim").get<std::size_t>();
    m.hidden = j.at("hidden").get<std::size_t>();
    m.vocab = j.at("vocab").get<std::size_t>();
    m.max_tokens = j.at("max_tokens").get<std::size_t>();
    m.viewpoints = j.at("viewpoints").get<std::size_t>();
    m.segment_size = j.at("segment_size").get<std::size_t>();
    m.score_scaling = j.at("score_scaling").get<bool>();
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
}

}  // namespace mtalk::cli
