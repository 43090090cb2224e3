#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefalign/channel.hpp"
#include "prefalign/domain.hpp"
#include "prefalign/rng.hpp"
#include "prefalign/toymodels.hpp"

namespace prefalign {

inline constexpr double kDefaultGapThreshold = 6.0;
inline constexpr std::size_t kSamplingsPerPrompt = 5;
inline constexpr std::array<double, 5> kDefaultTemperatures = {0.4, 0.6, 0.8, 1.0, 1.2};
inline constexpr std::array<double, 5> kDefaultDurationScales = {0.8, 0.9, 1.0, 1.1, 1.2};
inline constexpr int kDefaultTopK = 20;
inline constexpr double kDefaultTopP = 1.0;

/// Temperatures for AR/MGM, duration scales for FM.
std::vector<double> default_schedule(Paradigm p);

enum class Provenance { Intra, Inter, Perturbed };
std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct PreferencePair {
  ToyPrompt prompt;
  SpeechSample winner;
  SpeechSample loser;
  double wer_w = 0.0;
  double wer_l = 0.0;
  Provenance provenance = Provenance::Intra;
  std::vector<std::string> source_models;  // [winner model, loser model] for inter pairs

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

/// Word error rate in percent: 100 * Levenshtein(reference, hypothesis) / |reference|.
double wer(const std::vector<int>& reference, const std::vector<int>& hypothesis);
/// Unnormalized word-level edit distance.
std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b);

struct ScoredSample {
  SpeechSample sample;
  double wer = 0.0;
  std::size_t schedule_index = 0;
};

/// Everything one model produced for one prompt during intra-pair construction.
struct PromptSamples {
  std::size_t prompt_id = 0;
  std::vector<ScoredSample> samples;
  std::size_t best = 0;   // index into samples of the min-WER draw
  std::size_t worst = 0;  // index into samples of the max-WER draw
  bool failed = false;
  std::string error;
};

struct IntraResult {
  std::string model_id;
  std::vector<PromptSamples> per_prompt;  // ordered by prompt id
  std::vector<PreferencePair> pairs;      // ordered by prompt id
  std::size_t skipped = 0;
};

struct PairGenOptions {
  double gap_threshold = kDefaultGapThreshold;
  std::uint64_t seed = 0;
  SamplerDefaults sampler;
};

/// Picks min/max-WER samples (ties to the lowest schedule index) and applies the gap filter.
std::optional<std::pair<std::size_t, std::size_t>> select_intra(const std::vector<double>& wers, double gap);

/// Per prompt: one sample per schedule entry, transcribe, WER, keep (min, max) if the
/// gap clears the threshold. Prompt p uses RngStream(seed, p); prompts are processed
/// in parallel and merged in prompt order.
IntraResult build_intra_pairs(const GenerativeModel& model, const std::string& model_id,
                              const std::vector<ToyPrompt>& prompts, const std::vector<double>& schedule,
                              const ChannelSpec& channel, const PairGenOptions& opts);
/// Single-threaded reference with identical output.
IntraResult build_intra_pairs_serial(const GenerativeModel& model, const std::string& model_id,
                                     const std::vector<ToyPrompt>& prompts, const std::vector<double>& schedule,
                                     const ChannelSpec& channel, const PairGenOptions& opts);

struct InterResult {
  std::vector<PreferencePair> pairs;
  std::size_t comparisons = 0;
  std::size_t loser_vs_loser_comparisons = 0;
  std::size_t shared_prompts = 0;
  /// Surviving comparisons won by A's / B's sample.
  std::size_t a_wins = 0;
  std::size_t b_wins = 0;
};

/// Cross-model comparisons per shared prompt: (w_A, w_B), (w_A, l_B), (l_A, w_B).
InterResult build_inter_pairs(const IntraResult& a, const IntraResult& b, const std::vector<ToyPrompt>& prompts,
                              double gap_threshold = kDefaultGapThreshold);

/// Near-homophone alternatives per word.
struct ConfusionTable {
  std::map<int, std::vector<int>> alternatives;

  /// Each word maps to its neighbours w^1 and w^2 inside the same language half.
  static ConfusionTable make_default(const Domain& d);
  double coverage(const Domain& d) const;
  void validate(const Domain& d) const;
};

std::vector<int> perturb_pronunciation(const std::vector<int>& text, const ConfusionTable& table, double rate,
                                       const Domain& d, RngStream& rng);
std::vector<int> perturb_punctuation(const std::vector<int>& text, const Domain& d, RngStream& rng);

using Perturber = std::function<std::vector<int>(const std::vector<int>&, RngStream&)>;

struct PerturbedResult {
  std::vector<PreferencePair> pairs;
  std::size_t degenerate = 0;
  std::size_t non_regular_skipped = 0;
  /// Discrete losers whose length differs from the clean text (boundary edits), which the
  /// length-aligned AR and MGM likelihoods cannot score under the clean prompt.
  std::size_t misaligned = 0;
};

/// Winner generated from the clean prompt, loser from the perturbed one; both scored
/// against the clean text. Only Regular prompts are used; no gap threshold.
PerturbedResult build_perturbed_pairs(const GenerativeModel& model, const std::string& model_id,
                                      const std::vector<ToyPrompt>& prompts, const std::vector<TextType>& types,
                                      const Perturber& perturber, double hyper, const ChannelSpec& channel,
                                      const PairGenOptions& opts);

struct ArenaReport {
  std::vector<std::string> models;
  /// cells[i][j]: percent of i-vs-j comparisons won by model i with a gap >= threshold.
  std::vector<std::vector<double>> cells;
  std::vector<double> win_rate;  // row sums
  std::vector<std::vector<std::size_t>> comparisons;
  std::vector<std::vector<std::size_t>> filtered;  // comparisons below the gap threshold
};

ArenaReport arena(const std::vector<GenerativeModel>& models, const std::vector<std::string>& ids,
                  const std::vector<ToyPrompt>& prompts, const ChannelSpec& channel, const PairGenOptions& opts);

}  // namespace prefalign
