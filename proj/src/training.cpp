#include "mtalk/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "mtalk/errors.hpp"

namespace mtalk::training {

TrainConfig TrainConfig::defaults(int stage) {
  TrainConfig cfg;
  cfg.stage = stage;
  if (stage == 2) {
    cfg.lr_max = 4e-4;
    cfg.epochs = 5;
    cfg.lora.enabled = true;
  } else {
    cfg.pretrain_epochs = 20;
  }
  return cfg;
}

void TrainConfig::validate() const {
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  if (!(lr_max > 0)) throw ConfigError("lr_max must be positive");
  if (!(warmup_fraction > 0 && warmup_fraction < 1)) {
    throw ConfigError("warmup fraction must lie in (0, 1)");
  }
  if (batch_size != 1) throw ConfigError("only batch size 1 is supported");
  if (lora.enabled && lora.rank < 1) throw ConfigError("LoRA rank must be at least 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("Adam epsilon must be positive");
}

std::size_t warmup_steps(std::size_t total_steps, const TrainConfig& cfg) {
  const auto w = static_cast<std::size_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total_steps)));
  return std::clamp<std::size_t>(w, 1, std::max<std::size_t>(total_steps, 1));
}

double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (total_steps == 0) throw DomainError("lr_at: total_steps must be positive");
  if (step > total_steps) throw DomainError("lr_at: step beyond the schedule");
  const std::size_t warmup = warmup_steps(total_steps, cfg);
  if (step < warmup) {
    return cfg.lr_max * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total_steps == warmup) return cfg.lr_max;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return cfg.lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr,
               const TrainConfig& cfg) {
  for (Parameter* p : params) {
    if (!p->frozen && !p->grad.same_shape(p->value)) {
      throw DimensionError("adam_step: gradient of " + p->name + " has shape " +
                           p->grad.shape_string() + ", value " + p->value.shape_string());
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (Parameter* p : params) {
    if (p->frozen) continue;
    auto [it, inserted] = state.moments.try_emplace(p->name);
    AdamMoments& m = it->second;
    if (inserted) {
      m.first = Matrix(p->value.rows(), p->value.cols());
      m.second = Matrix(p->value.rows(), p->value.cols());
    } else if (!m.first.same_shape(p->value)) {
      throw DimensionError("adam_step: optimizer moments of " + p->name + " have the wrong shape");
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.data()[i];
      double& m1 = m.first.data()[i];
      double& m2 = m.second.data()[i];
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m1 / correction1;
      const double v_hat = m2 / correction2;
      p->value.data()[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

double clip_global_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    if (p->frozen) continue;
    for (double g : p->grad.data()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Parameter* p : params) {
      if (p->frozen) continue;
      for (double& g : p->grad.data()) g *= factor;
    }
  }
  return norm;
}

// --- checkpoint serialization -------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', 'T', 'A', 'L', 'K', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  template <typename T>
  void integer(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
    }
  }
  void f64(double v) { integer(std::bit_cast<std::uint64_t>(v)); }
  void string(const std::string& s) {
    integer(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void matrix(const Matrix& m) {
    integer(static_cast<std::uint64_t>(m.rows()));
    integer(static_cast<std::uint64_t>(m.cols()));
    for (double v : m.data()) f64(v);
  }
  void values(const Matrix& m) {
    for (double v : m.data()) f64(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw ParseError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  template <typename T>
  T integer() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double f64() { return std::bit_cast<double>(integer<std::uint64_t>()); }
  std::string string() {
    const auto n = integer<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Matrix values(std::size_t rows, std::size_t cols) {
    if (cols != 0 && rows > (in_.size() - pos_) / 8 / cols) throw ParseError("checkpoint block larger than file");
    Matrix m(rows, cols);
    for (double& v : m.data()) v = f64();
    return m;
  }
  Matrix matrix() {
    const auto rows = integer<std::uint64_t>();
    const auto cols = integer<std::uint64_t>();
    return values(rows, cols);
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.integer(kVersion);
  w.string(ckpt.config_json);
  w.integer(static_cast<std::int32_t>(ckpt.stage));
  w.integer(ckpt.step);
  w.integer(ckpt.epoch);
  w.integer(static_cast<std::uint32_t>(ckpt.parameters.size()));
  for (const auto& b : ckpt.parameters) {
    w.string(b.name);
    w.integer(static_cast<std::uint8_t>(b.frozen ? 1 : 0));
    w.matrix(b.value);
  }
  w.integer(ckpt.optimizer.step);
  w.integer(static_cast<std::uint32_t>(ckpt.optimizer.moments.size()));
  for (const auto& [name, m] : ckpt.optimizer.moments) {
    w.string(name);
    w.integer(static_cast<std::uint64_t>(m.first.rows()));
    w.integer(static_cast<std::uint64_t>(m.first.cols()));
    w.values(m.first);
    w.values(m.second);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic);
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw ParseError("not a checkpoint file");
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.integer<std::uint8_t>();
  const auto version = r.integer<std::uint32_t>();
  if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config_json = r.string();
  ckpt.stage = r.integer<std::int32_t>();
  ckpt.step = r.integer<std::uint64_t>();
  ckpt.epoch = r.integer<std::uint64_t>();
  const auto n = r.integer<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    Checkpoint::Block b;
    b.name = r.string();
    b.frozen = r.integer<std::uint8_t>() != 0;
    b.value = r.matrix();
    ckpt.parameters.push_back(std::move(b));
  }
  ckpt.optimizer.step = r.integer<std::uint64_t>();
  const auto m = r.integer<std::uint32_t>();
  for (std::uint32_t i = 0; i < m; ++i) {
    std::string name = r.string();
    const auto rows = r.integer<std::uint64_t>();
    const auto cols = r.integer<std::uint64_t>();
    AdamMoments mom;
    mom.first = r.values(rows, cols);
    mom.second = r.values(rows, cols);
    ckpt.optimizer.moments.emplace(std::move(name), std::move(mom));
  }
  if (!r.done()) throw ParseError("trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

namespace {

constexpr const char* kEstimatorWeight = "estimator.w";
constexpr const char* kEstimatorBias = "estimator.b";

}  // namespace

Checkpoint capture(MotionTalkModel& model, const std::string& config_json, int stage,
                   std::uint64_t step, std::uint64_t epoch, const AdamState& optimizer) {
  Checkpoint ckpt;
  ckpt.config_json = config_json;
  ckpt.stage = stage;
  ckpt.step = step;
  ckpt.epoch = epoch;
  for (Parameter* p : model.parameters()) ckpt.parameters.push_back({p->name, p->frozen, p->value});
  // The estimator is not gradient-trained; it rides along as frozen blocks.
  const bool ready = model.estimator.ready();
  ckpt.parameters.push_back({kEstimatorWeight, !ready, model.estimator.weight});
  ckpt.parameters.push_back({kEstimatorBias, !ready, model.estimator.bias});
  ckpt.optimizer = optimizer;
  return ckpt;
}

void restore(MotionTalkModel& model, const Checkpoint& ckpt) {
  std::map<std::string, const Checkpoint::Block*> blocks;
  for (const auto& b : ckpt.parameters) blocks.emplace(b.name, &b);
  auto take = [&](const std::string& name, Matrix& target) {
    const auto it = blocks.find(name);
    if (it == blocks.end()) return false;
    if (!it->second->value.same_shape(target)) {
      throw DimensionError("checkpoint block " + name + " has shape " +
                           it->second->value.shape_string() + ", model expects " + target.shape_string());
    }
    target = it->second->value;
    blocks.erase(it);
    return true;
  };
  for (Parameter* p : model.parameters()) {
    const bool adapter = p->name.find(".lora_") != std::string::npos;
    if (!take(p->name, p->value) && !adapter) {
      throw ParseError("checkpoint is missing parameter " + p->name);
    }
  }
  const auto ready_it = blocks.find(kEstimatorWeight);
  const bool estimator_ready = ready_it != blocks.end() && !ready_it->second->frozen;
  take(kEstimatorWeight, model.estimator.weight);
  take(kEstimatorBias, model.estimator.bias);
  if (estimator_ready) model.estimator.mark_ready();
  if (!blocks.empty()) throw ParseError("checkpoint has unknown parameter " + blocks.begin()->first);
}

// --- training loop ------------------------------------------------------------

namespace {

using LossFn = std::function<Var(Tape&, const EncodedSample&)>;

TrainResult run_epochs(ParameterList params, std::span<const EncodedSample> samples,
                       const TrainConfig& cfg, std::size_t epochs, TrainState state,
                       const LossFn& loss_fn, const EpochCallback& on_epoch) {
  const std::size_t total = epochs * samples.size();
  if (total == 0) return {{}, std::move(state)};
  for (Parameter* p : params) p->grad = Matrix(p->value.rows(), p->value.cols());

  TrainResult result;
  std::vector<std::size_t> order(samples.size());
  for (std::size_t epoch = state.epoch; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(cfg.seed * 1000003ULL + epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng() % i]);
    }
    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t idx : order) {
      for (Parameter* p : params) p->zero_grad();
      Tape tape;
      Var loss = loss_fn(tape, samples[idx]);
      loss_sum += loss.value()(0, 0);
      tape.backward(loss);
      clip_global_norm(params, cfg.clip_norm);
      lr = lr_at(std::min<std::size_t>(state.step + 1, total), total, cfg);
      adam_step(params, state.optimizer, lr, cfg);
      ++state.step;
    }
    state.epoch = epoch + 1;
    EpochRecord rec{epoch + 1, loss_sum / static_cast<double>(samples.size()), lr};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, state);
  }
  result.state = std::move(state);
  return result;
}

}  // namespace

TrainResult train_stage(MotionTalkModel& model, std::span<const EncodedSample> samples,
                        const TrainConfig& cfg, TrainState state, const EpochCallback& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw DomainError("train_stage: empty dataset");
  return run_epochs(
      model.trainable_parameters(), samples, cfg, cfg.epochs, std::move(state),
      [&model](Tape& tape, const EncodedSample& s) { return model.loss(tape, s); }, on_epoch);
}

TrainResult pretrain_decoder(MotionTalkModel& model, std::span<const EncodedSample> samples,
                             const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw DomainError("pretrain_decoder: empty dataset");
  ParameterList all = model.parameters();
  set_frozen(all, true);
  ParameterList params;
  model.decoder.collect_base(params);
  set_frozen(params, false);
  auto& decoder = model.decoder;
  auto loss_fn = [&decoder](Tape& tape, const EncodedSample& s) {
    std::vector<std::size_t> context = s.query;
    context.insert(context.end(), s.targets.begin(), s.targets.end() - 1);
    Var prefix = decoder.embed_text(tape, context);
    return generator::nll_loss(decoder.decode_forward(tape, prefix, s.input), s.targets);
  };
  TrainResult result = run_epochs(params, samples, cfg, cfg.pretrain_epochs, {}, loss_fn, on_epoch);
  set_frozen(params, true);
  return result;
}

}  // namespace mtalk::training
