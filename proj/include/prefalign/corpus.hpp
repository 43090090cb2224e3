#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "prefalign/domain.hpp"
#include "prefalign/pairgen.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

/// Reference-speech language -> target-text language.
enum class Combination { L1toL1, L2toL2, L1toL2, L2toL1 };
inline constexpr std::array<Combination, 4> kAllCombinations = {Combination::L1toL1, Combination::L2toL2,
                                                                Combination::L1toL2, Combination::L2toL1};
std::string_view to_string(Combination c);
Combination combination_from_string(std::string_view s);
Language speech_language(Combination c);
Language text_language(Combination c);

struct PromptCorpus {
  std::vector<ToyPrompt> prompts;
  std::vector<TextType> types;
  std::vector<Combination> combos;

  std::size_t size() const noexcept { return prompts.size(); }
  /// Prompts (and their types) whose type is in `keep`.
  PromptCorpus subset(std::initializer_list<TextType> keep) const;
  friend bool operator==(const PromptCorpus&, const PromptCorpus&) = default;
};

inline constexpr std::size_t kPaperPromptsPerType = 12000;
inline constexpr std::size_t kDeskPromptsPerType = 400;
inline constexpr int kMinTextWords = 3;
inline constexpr int kMaxTextWords = 12;

struct CorpusConfig {
  std::size_t per_type = kDeskPromptsPerType;
  std::uint64_t seed = 0;
  int min_words = kMinTextWords;
  int max_words = kMaxTextWords;
  double pronunciation_rate = 0.5;
};

/// Stratified prompt construction: per text type, combinations cycle so they stay
/// balanced within one prompt, and within a combination (speaker, length) strata
/// are visited round-robin. Text types other than Regular are variants of a fresh
/// regular draw.
PromptCorpus build_prompt_corpus(const Domain& d, const CorpusConfig& cfg);

struct TextVariants {
  std::vector<int> repeated;
  std::vector<int> code_switching;
  std::vector<int> pronunciation;
  std::vector<int> punctuation;
};

/// Rule-based text-type transforms of a regular (monolingual, boundary-free) text.
TextVariants make_text_variants(const std::vector<int>& regular, const Domain& d, const ConfusionTable& table,
                                double pronunciation_rate, RngStream& rng);

std::vector<int> repeat_words(const std::vector<int>& text, RngStream& rng);
std::vector<int> code_switch(const std::vector<int>& text, const Domain& d, RngStream& rng);

enum class Scenario { Regular, Articulatory, CodeSwitching, CrossLingual };
inline constexpr std::array<Scenario, 4> kAllScenarios = {Scenario::Regular, Scenario::Articulatory,
                                                          Scenario::CodeSwitching, Scenario::CrossLingual};
std::string_view to_string(Scenario s);

struct EvalSet {
  Scenario scenario = Scenario::Regular;
  std::vector<ToyPrompt> prompts;
};

/// Per-scenario evaluation sizes at one tenth of the reference suite (3000/800/1000/1000).
inline constexpr std::array<std::size_t, 4> kEvalSizes = {300, 80, 100, 100};

std::vector<EvalSet> make_eval_suite(const Domain& d, std::uint64_t seed, double scale = 1.0);
void validate_eval_set(const EvalSet& s);

}  // namespace prefalign
