#include "mtalk/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mtalk/errors.hpp"

namespace mtalk::data {

using json = nlohmann::json;

namespace {

struct MotionClass {
  const char* name;
  const char* body_part;
  const char* direction;
};

constexpr MotionClass kClasses[] = {
    {"arm_raise", "the left arm", "upward"},
    {"squat", "both legs", "downward"},
    {"side_step", "the right leg", "sideways"},
    {"torso_twist", "the torso", "around the spine"},
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string join_frames(const std::vector<std::size_t>& frames) {
  std::string out = "frames";
  for (std::size_t f : frames) out += " " + std::to_string(f);
  return out;
}

constexpr const char* kCountingQuery = "how many repetitions does the person perform";
constexpr const char* kSequenceQuery = "at which frames does each repetition reach its peak";
constexpr const char* kBodyPartQuery = "which body part moves the most";
constexpr const char* kDirectionQuery = "in which direction does the main motion go";

void fill_query(MotionSample& s, QueryFamily family, const MotionClass& cls) {
  switch (family) {
    case QueryFamily::kCounting:
      s.query = kCountingQuery;
      s.answer = std::to_string(s.labels.rep_count) + " repetitions";
      break;
    case QueryFamily::kSequence:
      s.query = kSequenceQuery;
      s.answer = join_frames(s.labels.key_frames);
      break;
    case QueryFamily::kBodyPart:
      s.query = kBodyPartQuery;
      s.answer = cls.body_part;
      break;
    case QueryFamily::kDirection:
      s.query = kDirectionQuery;
      s.answer = cls.direction;
      break;
  }
}

}  // namespace

bool operator==(const MotionSample& a, const MotionSample& b) {
  const bool video_equal = a.video.has_value() == b.video.has_value() &&
                           (!a.video || a.video->values == b.video->values);
  return a.id == b.id && a.motion.values == b.motion.values && a.motion.fps == b.motion.fps &&
         video_equal && a.query == b.query && a.answer == b.answer && a.labels == b.labels;
}

std::string to_string(QueryFamily family) {
  switch (family) {
    case QueryFamily::kCounting: return "counting";
    case QueryFamily::kSequence: return "sequence";
    case QueryFamily::kBodyPart: return "body_part";
    case QueryFamily::kDirection: return "direction";
  }
  return "unknown";
}

QueryFamily parse_family(const std::string& name) {
  for (QueryFamily f : kAllFamilies)
    if (to_string(f) == name) return f;
  throw ConfigError("unknown query family '" + name + "'");
}

std::optional<QueryFamily> query_family(const std::string& query) {
  const std::string q = Tokenizer::normalize(query);
  if (q == kCountingQuery) return QueryFamily::kCounting;
  if (q == kSequenceQuery) return QueryFamily::kSequence;
  if (q == kBodyPartQuery) return QueryFamily::kBodyPart;
  if (q == kDirectionQuery) return QueryFamily::kDirection;
  return std::nullopt;
}

std::vector<std::size_t> cyclic_peaks(std::size_t cycles, std::size_t frames) {
  if (cycles == 0 || frames < 2 * cycles) {
    throw DomainError("cyclic_peaks: need T >= 2f, got T=" + std::to_string(frames) +
                      " f=" + std::to_string(cycles));
  }
  const double f = static_cast<double>(cycles);
  const double t_len = static_cast<double>(frames);
  auto value = [&](double t) { return std::sin(2.0 * std::numbers::pi * f * t / t_len); };
  std::vector<std::size_t> peaks;
  for (std::size_t n = 0; n < cycles; ++n) {
    const double ideal = t_len / (4.0 * f) + static_cast<double>(n) * t_len / f;
    const auto lo = static_cast<std::size_t>(std::floor(ideal));
    std::size_t best = lo;
    const std::size_t hi = lo + 1;
    if (hi < frames && value(static_cast<double>(hi)) > value(static_cast<double>(lo))) best = hi;
    peaks.push_back(std::min(best, frames - 1));
  }
  return peaks;
}

MotionSample generate_cyclic(std::uint64_t seed, std::size_t cycles, std::size_t frames,
                             std::size_t motion_dim, double noise,
                             std::optional<QueryFamily> family) {
  if (motion_dim == 0) throw DomainError("generate_cyclic: motion dimension must be positive");
  MotionSample s;
  s.labels.key_frames = cyclic_peaks(cycles, frames);
  s.labels.rep_count = cycles;

  std::mt19937_64 rng(seed);
  const MotionClass& cls = kClasses[rng() % std::size(kClasses)];
  const QueryFamily fam = family ? *family : kAllFamilies[rng() % std::size(kAllFamilies)];
  s.labels.motion_class = cls.name;
  const std::size_t class_index = static_cast<std::size_t>(&cls - kClasses);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double two_pi = 2.0 * std::numbers::pi;
  const double f = static_cast<double>(cycles);
  const double t_len = static_cast<double>(frames);

  Matrix values(frames, motion_dim);
  for (std::size_t t = 0; t < frames; ++t) {
    const double x = noise > 0 ? noise * gauss(rng) : 0.0;
    values(t, 0) = std::sin(two_pi * f * static_cast<double>(t) / t_len) + x;
  }
  for (std::size_t c = 1; c < motion_dim; ++c) {
    double amplitude = 0.3;
    double freq = static_cast<double>(1 + rng() % 2);
    double offset = phase(rng);
    if (c == 1 + class_index) {
      amplitude = 0.8;
      freq = f;
      offset = std::numbers::pi / 2;
    } else if (c == motion_dim - 1) {
      // Slow root drift across the clip.
      const double slope = 1.0 + amplitude * offset / std::numbers::pi;
      for (std::size_t t = 0; t < frames; ++t)
        values(t, c) = slope * (static_cast<double>(t) / t_len - 0.5);
      continue;
    }
    for (std::size_t t = 0; t < frames; ++t)
      values(t, c) = amplitude * std::sin(two_pi * freq * static_cast<double>(t) / t_len + offset);
  }
  s.motion = MotionSequence{std::move(values), encoders::kDefaultFps};
  s.id = "cyclic-" + std::to_string(seed);
  fill_query(s, fam, cls);
  return s;
}

VideoFeatureSequence paired_video(const MotionSample& sample, const Matrix& map, double noise,
                                  std::uint64_t seed) {
  Matrix values = numerics::matmul(sample.motion.values, map);
  if (noise > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise);
    for (auto& v : values.data()) v += gauss(rng);
  }
  return {std::move(values)};
}

Matrix dataset_video_map(std::uint64_t seed, std::size_t motion_dim, std::size_t video_dim) {
  std::mt19937_64 rng(splitmix64(seed ^ 0x766964656fULL));
  return Matrix::uniform(motion_dim, video_dim, 1.0 / std::sqrt(static_cast<double>(motion_dim)),
                         rng);
}

std::vector<MotionSample> generate_dataset(const DatasetOptions& options) {
  if (options.families.empty()) throw ConfigError("dataset needs at least one query family");
  if (options.min_cycles == 0 || options.min_cycles > options.max_cycles) {
    throw ConfigError("invalid cycles range");
  }
  const Matrix map = dataset_video_map(options.seed, options.motion_dim, options.video_dim);
  std::vector<MotionSample> out;
  out.reserve(options.samples);
  for (std::size_t i = 0; i < options.samples; ++i) {
    const std::uint64_t sample_seed = splitmix64(options.seed * 0x100000001b3ULL + i);
    const std::size_t span = options.max_cycles - options.min_cycles + 1;
    const std::size_t cycles = options.min_cycles + splitmix64(sample_seed) % span;
    const QueryFamily family = options.families[i % options.families.size()];
    MotionSample s = generate_cyclic(sample_seed, cycles, options.frames, options.motion_dim,
                                     options.noise, family);
    char id[32];
    std::snprintf(id, sizeof id, "s%04zu", i);
    s.id = id;
    const double u = static_cast<double>(splitmix64(sample_seed ^ 0xabcdefULL) % 1000) / 1000.0;
    if (u < options.video_fraction) {
      s.video = paired_video(s, map, 0.01, splitmix64(sample_seed + 17));
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

Matrix matrix_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw ParseError(std::string(field) + " must be an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j.front().size() : 0;
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ParseError(std::string(field) + " row " + std::to_string(i) + " is ragged");
    }
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace

void save_jsonl(std::span<const MotionSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json{{"schema", kSchemaName}, {"version", kSchemaVersion}}.dump() << '\n';
  for (const auto& s : samples) {
    json rec;
    rec["id"] = s.id;
    rec["fps"] = s.motion.fps;
    rec["motion"] = matrix_to_json(s.motion.values);
    if (s.video) rec["video"] = matrix_to_json(s.video->values);
    rec["query"] = s.query;
    rec["answer"] = s.answer;
    rec["labels"] = {{"rep_count", s.labels.rep_count},
                     {"key_frames", s.labels.key_frames},
                     {"motion_class", s.labels.motion_class}};
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<MotionSample> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  std::vector<MotionSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      if (rec.contains("schema")) {
        if (rec.at("schema") != kSchemaName || rec.at("version").get<int>() != kSchemaVersion) {
          throw ParseError("unsupported schema header");
        }
        continue;
      }
      MotionSample s;
      s.id = rec.at("id").get<std::string>();
      s.motion.values = matrix_from_json(rec.at("motion"), "motion");
      s.motion.fps = rec.value("fps", encoders::kDefaultFps);
      if (rec.contains("video") && !rec.at("video").is_null()) {
        s.video = VideoFeatureSequence{matrix_from_json(rec.at("video"), "video")};
        if (s.video->frames() != s.motion.frames()) throw ParseError("video/motion frame count mismatch");
      }
      s.query = rec.at("query").get<std::string>();
      s.answer = rec.at("answer").get<std::string>();
      const json& labels = rec.at("labels");
      s.labels.rep_count = labels.at("rep_count").get<std::size_t>();
      s.labels.key_frames = labels.at("key_frames").get<std::vector<std::size_t>>();
      s.labels.motion_class = labels.at("motion_class").get<std::string>();
      if (s.motion.frames() == 0) throw ParseError("motion has no frames");
      for (std::size_t k : s.labels.key_frames) {
        if (k >= s.motion.frames()) throw ParseError("key frame outside the sequence");
      }
      samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return samples;
}

std::string Tokenizer::normalize(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '_') {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::vector<std::string> Tokenizer::split(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(normalize(text));
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

Tokenizer Tokenizer::build(std::span<const std::string> corpus) {
  std::set<std::string> words;
  for (const auto& text : corpus)
    for (auto& w : split(text)) words.insert(std::move(w));
  generator::Vocabulary vocab;
  for (const auto& w : words) vocab.add(w);
  return Tokenizer(std::move(vocab));
}

Tokenizer Tokenizer::build(std::span<const MotionSample> samples) {
  std::vector<std::string> corpus;
  for (const auto& s : samples) {
    corpus.push_back(s.query);
    corpus.push_back(s.answer);
  }
  return build(corpus);
}

generator::TokenSequence Tokenizer::tokenize(const std::string& text) const {
  generator::TokenSequence ids;
  for (const auto& w : split(text)) ids.push_back(vocab_.id(w));
  return ids;
}

std::string Tokenizer::detokenize(std::span<const std::size_t> ids) const {
  std::string out;
  for (std::size_t id : ids) {
    if (id < generator::kUnk) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab_.token(id);
  }
  return out;
}

}  // namespace mtalk::data
