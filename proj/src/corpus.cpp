#include "prefalign/corpus.hpp"

#include <algorithm>
#include <cmath>

namespace prefalign {

std::string_view to_string(Combination c) {
  switch (c) {
    case Combination::L1toL1: return "L1->L1";
    case Combination::L2toL2: return "L2->L2";
    case Combination::L1toL2: return "L1->L2";
    case Combination::L2toL1: return "L2->L1";
  }
  return "?";
}

Combination combination_from_string(std::string_view s) {
  for (auto c : kAllCombinations)
    if (to_string(c) == s) return c;
  throw ContractViolation("unknown combination: " + std::string(s));
}

Language speech_language(Combination c) {
  return c == Combination::L1toL1 || c == Combination::L1toL2 ? Language::L1 : Language::L2;
}

Language text_language(Combination c) {
  return c == Combination::L1toL1 || c == Combination::L2toL1 ? Language::L1 : Language::L2;
}

PromptCorpus PromptCorpus::subset(std::initializer_list<TextType> keep) const {
  PromptCorpus out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (std::find(keep.begin(), keep.end(), types[i]) == keep.end()) continue;
    out.prompts.push_back(prompts[i]);
    out.types.push_back(types[i]);
    out.combos.push_back(combos[i]);
  }
  return out;
}

namespace {

std::vector<int> draw_text(const Domain& d, Language lang, int len, RngStream& rng) {
  const int half = d.v_text / 2;
  const int base = lang == Language::L1 ? 0 : half;
  std::vector<int> text(static_cast<std::size_t>(len));
  for (int& w : text) w = base + static_cast<int>(rng.index(static_cast<std::size_t>(half)));
  return text;
}

}  // namespace

std::vector<int> repeat_words(const std::vector<int>& text, RngStream& rng) {
  require(text.size() >= 2, "repeat_words: text needs at least two words");
  std::vector<int> out = text;
  const std::size_t count = 1 + rng.index(3);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t start = rng.index(out.size());
    const std::size_t span = std::min<std::size_t>(1 + rng.index(2), out.size() - start);
    std::vector<int> dup(out.begin() + static_cast<long>(start), out.begin() + static_cast<long>(start + span));
    out.insert(out.begin() + static_cast<long>(start + span), dup.begin(), dup.end());
  }
  return out;
}

std::vector<int> code_switch(const std::vector<int>& text, const Domain& d, RngStream& rng) {
  require(text.size() >= 2, "code_switch: text needs at least two words");
  std::vector<int> out = text;
  std::vector<bool> switched(text.size());
  std::size_t n_switched = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    switched[i] = rng.bernoulli(0.5);
    n_switched += switched[i];
  }
  // keep both languages present: at least one switched and one untouched word
  if (n_switched == 0) switched[rng.index(out.size())] = true;
  if (n_switched == out.size()) switched[rng.index(out.size())] = false;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (switched[i]) out[i] = d.counterpart(out[i]);
  return out;
}

TextVariants make_text_variants(const std::vector<int>& regular, const Domain& d, const ConfusionTable& table,
                                double pronunciation_rate, RngStream& rng) {
  require(regular.size() >= 2, "make_text_variants: regular text needs at least two words");
  TextVariants v;
  v.repeated = repeat_words(regular, rng);
  v.code_switching = code_switch(regular, d, rng);
  v.pronunciation = perturb_pronunciation(regular, table, pronunciation_rate, d, rng);
  v.punctuation = perturb_punctuation(regular, d, rng);
  return v;
}

PromptCorpus build_prompt_corpus(const Domain& d, const CorpusConfig& cfg) {
  d.validate();
  require(cfg.per_type >= 4, "build_prompt_corpus: per-type count must be >= 4");
  require(cfg.min_words >= 2 && cfg.max_words >= cfg.min_words, "build_prompt_corpus: bad length range");
  const auto table = ConfusionTable::make_default(d);
  const std::size_t n_lengths = static_cast<std::size_t>(cfg.max_words - cfg.min_words + 1);
  const std::size_t n_speakers = static_cast<std::size_t>(d.speakers);
  const std::size_t total = cfg.per_type * kAllTextTypes.size();

  PromptCorpus c;
  c.prompts.resize(total);
  c.types.resize(total);
  c.combos.resize(total);
  const auto n = static_cast<std::int64_t>(total);
#pragma omp parallel for schedule(static)
  for (std::int64_t g = 0; g < n; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    const std::size_t ti = gi / cfg.per_type;
    const std::size_t i = gi % cfg.per_type;
    const TextType type = kAllTextTypes[ti];
    const Combination combo = kAllCombinations[i % 4];
    const std::size_t within = i / 4;
    RngStream rng(cfg.seed, gi);

    ToyPrompt p;
    p.speaker = static_cast<int>(within % n_speakers);
    p.speech_language = speech_language(combo);
    p.text_language = text_language(combo);
    const int len = cfg.min_words + static_cast<int>((within / n_speakers) % n_lengths);
    auto regular = draw_text(d, p.text_language, len, rng);
    switch (type) {
      case TextType::Regular: p.text = std::move(regular); break;
      case TextType::Repeated: p.text = repeat_words(regular, rng); break;
      case TextType::CodeSwitching:
        p.text = code_switch(regular, d, rng);
        p.text_language = Language::Mixed;
        break;
      case TextType::PronunciationPerturbed:
        p.text = perturb_pronunciation(regular, table, cfg.pronunciation_rate, d, rng);
        break;
      case TextType::PunctuationPerturbed: p.text = perturb_punctuation(regular, d, rng); break;
    }
    c.prompts[gi] = std::move(p);
    c.types[gi] = type;
    c.combos[gi] = combo;
  }
  return c;
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::Regular: return "regular";
    case Scenario::Articulatory: return "articulatory";
    case Scenario::CodeSwitching: return "code_switching";
    case Scenario::CrossLingual: return "cross_lingual";
  }
  return "?";
}

void validate_eval_set(const EvalSet& s) {
  for (const auto& p : s.prompts) {
    if (s.scenario == Scenario::CrossLingual)
      require(p.text_language != p.speech_language && p.text_language != Language::Mixed,
              "cross-lingual prompt must pair different languages");
    if (s.scenario == Scenario::CodeSwitching)
      require(p.text_language == Language::Mixed, "code-switching prompt must have mixed text");
  }
}

std::vector<EvalSet> make_eval_suite(const Domain& d, std::uint64_t seed, double scale) {
  require(scale > 0.0, "make_eval_suite: scale must be positive");
  std::vector<EvalSet> suite;
  const RngStream root(splitmix64(seed ^ 0xE7A1E7A1ULL), 0);
  for (std::size_t si = 0; si < kAllScenarios.size(); ++si) {
    EvalSet set;
    set.scenario = kAllScenarios[si];
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(kEvalSizes[si] * scale)));
    for (std::size_t i = 0; i < count; ++i) {
      RngStream rng = root.derive(si * 1000003ULL + i);
      ToyPrompt p;
      p.speaker = static_cast<int>(rng.index(static_cast<std::size_t>(d.speakers)));
      const int len = kMinTextWords + static_cast<int>(rng.index(kMaxTextWords - kMinTextWords + 1));
      switch (set.scenario) {
        case Scenario::Regular: {
          // one third L1, two thirds L2, mirroring the 1000/2000 language split
          const Language l = (i % 3 == 0) ? Language::L1 : Language::L2;
          p.text_language = p.speech_language = l;
          p.text = draw_text(d, l, len, rng);
          break;
        }
        case Scenario::Articulatory: {
          const Language l = (i % 2 == 0) ? Language::L1 : Language::L2;
          p.text_language = p.speech_language = l;
          p.text = repeat_words(draw_text(d, l, len, rng), rng);
          break;
        }
        case Scenario::CodeSwitching: {
          const Language l = (i % 2 == 0) ? Language::L1 : Language::L2;
          p.speech_language = l;
          p.text_language = Language::Mixed;
          p.text = code_switch(draw_text(d, l, len, rng), d, rng);
          break;
        }
        case Scenario::CrossLingual: {
          const Language text_l = (i % 2 == 0) ? Language::L2 : Language::L1;
          p.text_language = text_l;
          p.speech_language = text_l == Language::L1 ? Language::L2 : Language::L1;
          p.text = draw_text(d, text_l, len, rng);
          break;
        }
      }
      set.prompts.push_back(std::move(p));
    }
    suite.push_back(std::move(set));
  }
  return suite;
}

}  // namespace prefalign
