#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtalk/lora.hpp"
#include "mtalk/model.hpp"

namespace mtalk::training {

struct TrainConfig {
  int stage = 1;
  double lr_max = 2e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 1;
  double warmup_fraction = 0.03;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // global L2 norm; <= 0 disables clipping
  std::uint64_t seed = 1;
  LoraConfig lora;
  // Epochs of decoder reading pretraining run before stage 1 (0 skips it).
  std::size_t pretrain_epochs = 0;

  // Stage 1: lr 2e-3 for 10 epochs. Stage 2: lr 4e-4 for 5 epochs with adapters.
  static TrainConfig defaults(int stage);
  void validate() const;
};

std::size_t warmup_steps(std::size_t total_steps, const TrainConfig& cfg);

// Linear warmup from 0 to lr_max over round(warmup_fraction * total) steps, then
// lr_max * 0.5 * (1 + cos(pi * (step - warmup) / (total - warmup))).
double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

struct AdamMoments {
  Matrix first;
  Matrix second;
};

struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, AdamMoments> moments;  // keyed by parameter name
};

// One bias-corrected Adam update without weight decay over the unfrozen parameters,
// using each Parameter::grad. Frozen parameters are skipped.
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr,
               const TrainConfig& cfg);

// Scales all gradients so their joint L2 norm is at most max_norm. Returns the
// pre-clip norm.
double clip_global_norm(std::span<Parameter* const> params, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double lr = 0.0;        // rate used by the epoch's final step
};

struct Checkpoint {
  std::string config_json;
  int stage = 1;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;  // completed epochs within the stage
  struct Block {
    std::string name;
    bool frozen = false;
    Matrix value;
  };
  std::vector<Block> parameters;
  AdamState optimizer;
};

// Binary container, all integers and floats little-endian:
//   "MTALKCKP" | u32 version | u32 len + config JSON | i32 stage | u64 step | u64 epoch
//   u32 n | n x (u32 len + name | u8 frozen | u64 rows | u64 cols | rows*cols f64)
//   u64 adam_t | u32 m | m x (u32 len + name | u64 rows | u64 cols | f64 first | f64 second)
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

// Copies model parameter values (including the motion estimator) into a checkpoint.
Checkpoint capture(MotionTalkModel& model, const std::string& config_json, int stage,
                   std::uint64_t step, std::uint64_t epoch, const AdamState& optimizer);
// Writes checkpoint values into same-named model parameters. Unknown or missing
// names are an error unless the missing ones are adapters absent from the checkpoint.
void restore(MotionTalkModel& model, const Checkpoint& ckpt);

struct TrainState {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  AdamState optimizer;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  TrainState state;
};

using EpochCallback = std::function<void(const EpochRecord&, const TrainState&)>;

// Runs epochs x samples steps of forward -> nll -> backward -> clip -> Adam, resuming
// from `state` (epoch/step counters and optimizer moments). The model must already be
// configured for the stage. Sample order per epoch is a seeded shuffle.
TrainResult train_stage(MotionTalkModel& model, std::span<const EncodedSample> samples,
                        const TrainConfig& cfg, TrainState state = {},
                        const EpochCallback& on_epoch = {});

// Stand-in for a pretrained language model: trains every decoder weight to emit each
// sample's answer when its prefix holds the embedded query followed by the answer
// tokens. Motion is not involved, so nothing about the motion-to-answer mapping is
// learned here. Uses cfg.pretrain_epochs, lr_max and seed with a fresh optimizer and
// leaves every parameter frozen; call configure_stage afterwards.
TrainResult pretrain_decoder(MotionTalkModel& model, std::span<const EncodedSample> samples,
                             const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace mtalk::training
