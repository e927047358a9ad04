#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtalk/layers.hpp"

namespace mtalk::generator {

inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kBos = 1;
inline constexpr std::size_t kEos = 2;
inline constexpr std::size_t kUnk = 3;

using TokenSequence = std::vector<std::size_t>;

// Bijective token <-> id map. Ids 0..3 are PAD, BOS, EOS, UNK.
class Vocabulary {
 public:
  Vocabulary();

  // `tokens` must begin with the four reserved tokens in order.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);
  // One token per line; line number (0-based) is the id.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t add(const std::string& token);
  // kUnk for unknown tokens.
  std::size_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.contains(token); }
  const std::string& token(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct DecoderConfig {
  std::size_t vocab = 16;
  std::size_t hidden = 32;
  std::size_t max_tokens = 24;   // positional table size for token positions
  std::size_t max_prefix = 1024;
};

// One causal single-head block over [prefix; token embeddings]. Prefix rows carry no
// positional code and are visible to every position; token i sees prefix plus
// tokens 0..i. Logits are W_o h_t for token positions only.
class Decoder {
 public:
  Decoder() = default;
  Decoder(const DecoderConfig& cfg, std::mt19937_64& rng);

  // Token embeddings without positions; used as text features for queries.
  Var embed_text(Tape& tape, std::span<const std::size_t> ids);

  Var decode_forward(Tape& tape, Var prefix, std::span<const std::size_t> tokens);
  Matrix decode_forward(const Matrix& prefix, std::span<const std::size_t> tokens);

  // Runs the block over a sequence whose first `prefix_rows` rows are the prefix.
  // The attention core is counted under the "decoder.attention" MAC section.
  Var hidden_states(Tape& tape, Var sequence, std::size_t prefix_rows);

  // Starts from BOS, appends argmax tokens (lowest id on ties), stops after EOS or
  // max_len tokens. The BOS is not part of the result; an emitted EOS is.
  TokenSequence generate_greedy(const Matrix& prefix, std::size_t max_len);

  void attach_adapters(const training::LoraConfig& cfg, std::mt19937_64& rng);
  void zero_output_layers();
  void collect(ParameterList& out);
  // Parameters excluding adapters.
  void collect_base(ParameterList& out);
  void collect_adapters(ParameterList& out);

  const DecoderConfig& config() const { return cfg_; }

  Parameter embedding;  // V x H
  Parameter positions;  // max_tokens x H
  AttentionBlock attention;
  FeedForward ffn;
  Linear output;  // H x V, no bias

 private:
  DecoderConfig cfg_;
};

inline constexpr const char* kDecoderAttentionSection = "decoder.attention";

// Mean token NLL over non-PAD targets. targets[t] is predicted from logits row t.
Var nll_loss(Var logits, std::span<const std::size_t> targets);
double nll_loss(const Matrix& logits, std::span<const std::size_t> targets);

}  // namespace mtalk::generator
