#include "mtalk/generator.hpp"

#include <fstream>
#include <numeric>

#include "mtalk/errors.hpp"

namespace mtalk::generator {

namespace {

const std::vector<std::string> kReserved = {"<pad>", "<bos>", "<eos>", "<unk>"};

}  // namespace

Vocabulary::Vocabulary() {
  for (const auto& t : kReserved) add(t);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kReserved.size() ||
      !std::equal(kReserved.begin(), kReserved.end(), tokens.begin())) {
    throw ParseError("vocabulary must start with <pad>, <bos>, <eos>, <unk>");
  }
  Vocabulary vocab;
  for (std::size_t i = kReserved.size(); i < tokens.size(); ++i) {
    if (vocab.contains(tokens[i])) throw ParseError("duplicate vocabulary token '" + tokens[i] + "'");
    vocab.add(tokens[i]);
  }
  return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) tokens.push_back(line);
  return from_tokens(tokens);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

std::size_t Vocabulary::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  tokens_.push_back(token);
  ids_.emplace(token, tokens_.size() - 1);
  return tokens_.size() - 1;
}

std::size_t Vocabulary::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw DomainError("token id " + std::to_string(id) + " out of vocabulary");
  return tokens_[id];
}

Decoder::Decoder(const DecoderConfig& cfg, std::mt19937_64& rng)
    : embedding("decoder.embedding", Matrix::uniform(cfg.vocab, cfg.hidden, 1.0, rng)),
      positions("decoder.positions", Matrix::uniform(cfg.max_tokens, cfg.hidden, 0.5, rng)),
      attention("decoder.attention", cfg.hidden, rng),
      ffn("decoder.ffn", cfg.hidden, rng),
      output("decoder.output", cfg.hidden, cfg.vocab, false, rng),
      cfg_(cfg) {}

Var Decoder::embed_text(Tape& tape, std::span<const std::size_t> ids) {
  for (std::size_t id : ids) {
    if (id >= cfg_.vocab) throw DomainError("token id " + std::to_string(id) + " out of vocabulary");
  }
  return numerics::gather_rows(tape.parameter(embedding), ids);
}

Var Decoder::hidden_states(Tape& tape, Var sequence, std::size_t prefix_rows) {
  const std::size_t n = sequence.rows();
  Matrix visible(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) visible(i, j) = (j < prefix_rows || j <= i) ? 1.0 : 0.0;

  Var q = attention.q.forward(tape, sequence);
  Var k = attention.k.forward(tape, sequence);
  Var v = attention.v.forward(tape, sequence);
  numerics::Attention core;
  {
    numerics::MacCounter::Section section(tape.macs(), kDecoderAttentionSection);
    core = numerics::scaled_dot_attention(q, k, v, &visible);
  }
  Var h = numerics::add(sequence, attention.out.forward(tape, core.output));
  return numerics::add(h, ffn.forward(tape, h));
}

Var Decoder::decode_forward(Tape& tape, Var prefix, std::span<const std::size_t> tokens) {
  if (tokens.empty()) throw DomainError("decode_forward: empty token sequence");
  if (tokens.size() > cfg_.max_tokens) {
    throw DomainError("decode_forward: " + std::to_string(tokens.size()) +
                      " tokens exceed the positional table of " + std::to_string(cfg_.max_tokens));
  }
  if (prefix.valid() && prefix.rows() > cfg_.max_prefix) {
    throw DomainError("decode_forward: prefix longer than " + std::to_string(cfg_.max_prefix));
  }
  if (prefix.valid() && prefix.cols() != cfg_.hidden) {
    throw DimensionError("decode_forward: prefix width " + std::to_string(prefix.cols()));
  }
  std::vector<std::size_t> pos(tokens.size());
  std::iota(pos.begin(), pos.end(), 0);
  Var embedded = numerics::add(embed_text(tape, tokens),
                               numerics::gather_rows(tape.parameter(positions), pos));
  const std::size_t prefix_rows = prefix.valid() ? prefix.rows() : 0;
  Var sequence = embedded;
  if (prefix_rows > 0) {
    const Var parts[] = {prefix, embedded};
    sequence = numerics::concat_rows(parts);
  }
  Var h = hidden_states(tape, sequence, prefix_rows);
  Var token_rows = numerics::slice_rows(h, prefix_rows, prefix_rows + tokens.size());
  return output.forward(tape, token_rows);
}

Matrix Decoder::decode_forward(const Matrix& prefix, std::span<const std::size_t> tokens) {
  Tape tape;
  Var p = prefix.rows() ? tape.constant(prefix) : Var{};
  return decode_forward(tape, p, tokens).value();
}

TokenSequence Decoder::generate_greedy(const Matrix& prefix, std::size_t max_len) {
  TokenSequence input = {kBos};
  TokenSequence result;
  while (result.size() < max_len && input.size() <= cfg_.max_tokens) {
    const Matrix logits = decode_forward(prefix, input);
    const auto last = logits.row(logits.rows() - 1);
    std::size_t best = 0;
    for (std::size_t j = 1; j < last.size(); ++j)
      if (last[j] > last[best]) best = j;
    result.push_back(best);
    if (best == kEos) break;
    input.push_back(best);
  }
  return result;
}

void Decoder::attach_adapters(const training::LoraConfig& cfg, std::mt19937_64& rng) {
  attention.q.attach_adapter(cfg, rng);
  attention.k.attach_adapter(cfg, rng);
  attention.v.attach_adapter(cfg, rng);
  attention.out.attach_adapter(cfg, rng);
  output.attach_adapter(cfg, rng);
}

void Decoder::zero_output_layers() {
  attention.out.zero();
  ffn.down.zero();
}

void Decoder::collect_base(ParameterList& out) {
  out.push_back(&embedding);
  out.push_back(&positions);
  for (Linear* l : {&attention.q, &attention.k, &attention.v, &attention.out, &ffn.up, &ffn.down,
                    &output}) {
    out.push_back(&l->weight);
    if (l->bias) out.push_back(&*l->bias);
  }
}

void Decoder::collect_adapters(ParameterList& out) {
  for (Linear* l : {&attention.q, &attention.k, &attention.v, &attention.out, &output}) {
    if (l->adapter) {
      out.push_back(&l->adapter->a);
      out.push_back(&l->adapter->b);
    }
  }
}

void Decoder::collect(ParameterList& out) {
  collect_base(out);
  collect_adapters(out);
}

Var nll_loss(Var logits, std::span<const std::size_t> targets) {
  return numerics::cross_entropy(logits, targets, kPad);
}

double nll_loss(const Matrix& logits, std::span<const std::size_t> targets) {
  Tape tape;
  return nll_loss(tape.constant(logits), targets).value()(0, 0);
}

}  // namespace mtalk::generator
