#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtalk/encoders.hpp"
#include "mtalk/generator.hpp"

namespace mtalk::data {

using encoders::MotionSequence;
using encoders::VideoFeatureSequence;

struct Labels {
  std::size_t rep_count = 0;
  std::vector<std::size_t> key_frames;
  std::string motion_class;

  bool operator==(const Labels&) const = default;
};

struct MotionSample {
  std::string id;
  MotionSequence motion;
  std::optional<VideoFeatureSequence> video;
  std::string query;
  std::string answer;
  Labels labels;
};

bool operator==(const MotionSample& a, const MotionSample& b);

enum class QueryFamily { kCounting, kSequence, kBodyPart, kDirection };

std::string to_string(QueryFamily family);
QueryFamily parse_family(const std::string& name);
inline constexpr QueryFamily kAllFamilies[] = {QueryFamily::kCounting, QueryFamily::kSequence,
                                               QueryFamily::kBodyPart, QueryFamily::kDirection};

// Family of a template query, or nullopt for free text.
std::optional<QueryFamily> query_family(const std::string& query);

// Frame indices of the channel-0 maxima of sin(2 pi f t / T), one per cycle.
std::vector<std::size_t> cyclic_peaks(std::size_t cycles, std::size_t frames);

// Channel 0 is sin(2 pi f t / T) plus N(0, noise^2); the remaining channels are
// seeded smooth signals keyed to the motion class. Throws DomainError if T < 2f.
MotionSample generate_cyclic(std::uint64_t seed, std::size_t cycles, std::size_t frames,
                             std::size_t motion_dim, double noise,
                             std::optional<QueryFamily> family = std::nullopt);

// motion * map + N(0, noise^2), same frame count.
VideoFeatureSequence paired_video(const MotionSample& sample, const Matrix& map, double noise,
                                  std::uint64_t seed);

struct DatasetOptions {
  std::size_t samples = 32;
  std::uint64_t seed = 7;
  std::size_t min_cycles = 2;
  std::size_t max_cycles = 5;
  std::size_t frames = 40;
  std::size_t motion_dim = 8;
  std::size_t video_dim = 8;
  double noise = 0.05;
  double video_fraction = 0.5;
  std::vector<QueryFamily> families = {std::begin(kAllFamilies), std::end(kAllFamilies)};
};

// Pure function of the options. Sample i is derived from (seed, i) alone.
std::vector<MotionSample> generate_dataset(const DatasetOptions& options);

// The fixed motion-to-video map used by generate_dataset for a given seed.
Matrix dataset_video_map(std::uint64_t seed, std::size_t motion_dim, std::size_t video_dim);

// JSONL with a leading schema header record.
void save_jsonl(std::span<const MotionSample> samples, const std::filesystem::path& path);
std::vector<MotionSample> load_jsonl(const std::filesystem::path& path);

inline constexpr const char* kSchemaName = "mtalk.motion";
inline constexpr int kSchemaVersion = 1;

// Lowercases, splits on whitespace and punctuation.
class Tokenizer {
 public:
  Tokenizer() = default;
  explicit Tokenizer(generator::Vocabulary vocab) : vocab_(std::move(vocab)) {}

  // Vocabulary of every word in the corpus, sorted, after the reserved ids.
  static Tokenizer build(std::span<const std::string> corpus);
  static Tokenizer build(std::span<const MotionSample> samples);

  static std::string normalize(const std::string& text);
  static std::vector<std::string> split(const std::string& text);

  generator::TokenSequence tokenize(const std::string& text) const;
  // Reserved ids are skipped.
  std::string detokenize(std::span<const std::size_t> ids) const;

  const generator::Vocabulary& vocabulary() const { return vocab_; }

 private:
  generator::Vocabulary vocab_;
};

}  // namespace mtalk::data
