#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefalign/channel.hpp"
#include "prefalign/corpus.hpp"
#include "prefalign/run_config.hpp"
#include "prefalign/toymodels.hpp"
#include "prefalign/training.hpp"

namespace prefalign {

struct Metrics {
  double wer = 0.0;            // percent
  double sim = 0.0;            // [-1, 1]
  double quality_proxy = 0.0;  // mean per-position log-likelihood under the channel
  std::size_t n = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct EvalOptions {
  double hyper = 1.0;
  SamplerDefaults sampler;
  std::uint64_t seed = 0;
};

/// Probability mass a discrete position keeps on its codebook token in the quality proxy.
inline constexpr double kQualityTokenEpsilon = 1e-3;
/// Standard deviation of the continuous quality-proxy likelihood.
inline constexpr double kQualityFrameSigma = 0.05;

/// Cosine between the speaker offset recovered from `y` and the offset of `speaker`.
/// Continuous: mean residual of each frame from its nearest grid point. Discrete: mean
/// offset of the speakers whose codebook entry for the aligned word equals the token.
double sample_sim(const SpeechSample& y, const std::vector<int>& text, int speaker, const ChannelSpec& channel);
double sample_quality(const SpeechSample& y, const std::vector<int>& text, int speaker, const ChannelSpec& channel);

/// One draw per prompt from RngStream(seed, prompt index); prompts run in parallel.
Metrics evaluate(const GenerativeModel& model, const EvalSet& set, const ChannelSpec& channel,
                 const EvalOptions& opts);
Metrics evaluate_serial(const GenerativeModel& model, const EvalSet& set, const ChannelSpec& channel,
                        const EvalOptions& opts);

struct ScenarioMetrics {
  Scenario scenario = Scenario::Regular;
  Metrics metrics;
  friend bool operator==(const ScenarioMetrics&, const ScenarioMetrics&) = default;
};

struct SuiteMetrics {
  std::vector<ScenarioMetrics> scenarios;
  double average_wer = 0.0;  // unweighted mean over scenarios

  const Metrics& at(Scenario s) const;
  friend bool operator==(const SuiteMetrics&, const SuiteMetrics&) = default;
};

SuiteMetrics evaluate_suite(const GenerativeModel& model, const std::vector<EvalSet>& suite,
                            const ChannelSpec& channel, const EvalOptions& opts);

struct IterateOptions {
  std::size_t rounds = 2;
  RunConfig config;
  ChannelSpec channel;
  SamplerDefaults sampler;
  std::vector<EvalSet> suite;
  EvalOptions eval;
};

struct RoundReport {
  std::size_t round = 0;
  std::size_t prompts = 0;
  std::size_t pairs = 0;
  SuiteMetrics metrics;
};

struct IterateResult {
  std::vector<GenerativeModel> models;  // models[0] is the base
  SuiteMetrics base_metrics;
  std::vector<RoundReport> rounds;
  std::vector<TextType> subset_types;  // text type of every prompt in the challenging subset
  bool halted = false;
  std::string diagnostic;
};

/// Flywheel: round k samples intra pairs from model k-1 on the repeated and
/// code-switching prompts and trains model k against reference model k-1.
IterateResult iterate_alignment(const GenerativeModel& base, const PromptCorpus& corpus, const IterateOptions& opts);

}  // namespace prefalign
