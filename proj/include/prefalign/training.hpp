#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefalign/channel.hpp"
#include "prefalign/dpo.hpp"
#include "prefalign/pairgen.hpp"
#include "prefalign/run_config.hpp"
#include "prefalign/toymodels.hpp"

namespace prefalign {

/// One pair (or positive) visited at one optimizer step.
struct StepRecord {
  std::int64_t step = 0;
  std::size_t pair_id = 0;
  double loss = 0.0;
  double margin = 0.0;
  double lr = 0.0;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct TrainLog {
  std::vector<StepRecord> records;
  std::int64_t steps = 0;

  /// JSON lines {"step", "pair_id", "loss", "margin", "lr"} in visit order.
  std::string to_jsonl() const;
  /// Mean loss per step, in step order.
  std::vector<double> step_losses() const;
};

struct TrainResult {
  GenerativeModel model;
  TrainLog log;
};

/// Paradigm DPO loss for one pair; `rng` supplies the FM time/noise or MGM mask draws.
LossReport dpo_pair_loss(const GenerativeModel& model, const GenerativeModel& ref, const PreferencePair& pair,
                         double beta, RngStream& rng);

/// Shuffled minibatch AdamW over the paradigm's DPO loss with the inverse-sqrt
/// schedule. `ref` is only read.
TrainResult train_dpo(GenerativeModel model, const GenerativeModel& ref, const std::vector<PreferencePair>& data,
                      const RunConfig& cfg);

/// Mean DPO margin over `data` with draws fixed by `seed`.
double mean_margin(const GenerativeModel& model, const GenerativeModel& ref, const std::vector<PreferencePair>& data,
                   double beta, std::uint64_t seed);

struct Positive {
  ToyPrompt prompt;
  SpeechSample sample;
};

std::vector<Positive> winners_of(const std::vector<PreferencePair>& pairs);

/// Negative log-likelihood (AR, MGM) or OT-FM loss (FM) of one positive.
LossReport sft_loss(const GenerativeModel& model, const Positive& p, RngStream& rng);

/// Same loop as train_dpo on the positives' likelihood objective.
TrainResult train_sft(GenerativeModel model, const std::vector<Positive>& positives, const RunConfig& cfg);

enum class NoiseShape {
  /// Every position corrupted with probability `noise` by a uniformly drawn entry.
  Uniform,
  /// Corruption substitutes the word's first near-homophone. Every fourth word of each
  /// language half is hard and corrupted with probability kHardWordNoise; the rest
  /// share the remaining budget so the mean rate stays `noise`.
  HardWords,
};

inline constexpr double kHardWordNoise = 0.55;

/// Corruption probability of word `w` under `shape` with mean rate `noise`.
double word_noise(int w, double noise, NoiseShape shape, const Domain& d);

struct PretrainOptions {
  std::size_t utterances = 3000;
  int epochs = 10;
  double lr = 0.1;
  std::int64_t warmup = 20;
  std::size_t batch_size = 32;
  /// Mean probability that a target position is corrupted.
  double noise = 0.2;
  NoiseShape shape = NoiseShape::HardWords;
  std::uint64_t seed = 0;
};

/// Clean rendering of `x` with positions corrupted per word_noise.
SpeechSample render_noisy(const ToyPrompt& x, const ChannelSpec& channel, SampleKind kind, double noise,
                          NoiseShape shape, RngStream& rng);

/// Maximum-likelihood fit of a fresh model to noisy renderings of random prompts.
GenerativeModel pretrain_base(Paradigm p, const ChannelSpec& channel, const PretrainOptions& opts);

}  // namespace prefalign
