#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace prefalign {

/// Sizes of the synthetic text-to-speech domain.
///
/// Text word ids live in [0, v_text); the lower half is language L1 and the upper half
/// L2, with word w and w + v_text/2 forming a translation pair. The id v_text is the
/// phrase-boundary marker (the toy analog of a comma). Speech tokens live in
/// [0, v_speech); MGM models use v_speech itself as the mask symbol.
struct Domain {
  int v_text = 40;
  int v_speech = 64;
  int speakers = 8;
  int hidden = 32;
  int embed = 4;

  int boundary() const noexcept { return v_text; }
  /// Number of text elements a model conditions on (words plus boundary).
  int text_symbols() const noexcept { return v_text + 1; }
  int mask_token() const noexcept { return v_speech; }
  bool is_word(int id) const noexcept { return id >= 0 && id < v_text; }
  bool is_l1(int w) const noexcept { return w >= 0 && w < v_text / 2; }
  int counterpart(int w) const noexcept { return is_l1(w) ? w + v_text / 2 : w - v_text / 2; }

  void validate() const;
  friend bool operator==(const Domain&, const Domain&) = default;
};

inline constexpr int kFrameDim = 2;
using Frame = std::array<double, kFrameDim>;

enum class Language { L1, L2, Mixed };

std::string_view to_string(Language l);
Language language_from_string(std::string_view s);

/// Model input: target text plus the reference-speech condition.
struct ToyPrompt {
  std::vector<int> text;
  int speaker = 0;
  Language text_language = Language::L1;
  Language speech_language = Language::L1;

  friend bool operator==(const ToyPrompt&, const ToyPrompt&) = default;
};

/// Throws ContractViolation when the prompt breaks the domain invariants.
void validate_prompt(const ToyPrompt& p, const Domain& d);
/// Words of `text` with boundary markers removed.
std::vector<int> words_only(const std::vector<int>& text, const Domain& d);

enum class SampleKind { Discrete, Continuous };

/// One generated utterance. `hyper` is the sampling temperature for discrete samples
/// and the duration scale for continuous ones.
struct SpeechSample {
  SampleKind kind = SampleKind::Discrete;
  std::vector<int> tokens;
  std::vector<Frame> frames;
  double hyper = 1.0;

  std::size_t length() const noexcept { return kind == SampleKind::Discrete ? tokens.size() : frames.size(); }
  friend bool operator==(const SpeechSample&, const SpeechSample&) = default;
};

std::string_view to_string(SampleKind k);
SampleKind sample_kind_from_string(std::string_view s);

enum class TextType { Regular, Repeated, CodeSwitching, PronunciationPerturbed, PunctuationPerturbed };
inline constexpr std::array<TextType, 5> kAllTextTypes = {TextType::Regular, TextType::Repeated,
                                                          TextType::CodeSwitching, TextType::PronunciationPerturbed,
                                                          TextType::PunctuationPerturbed};
std::string_view to_string(TextType t);
TextType text_type_from_string(std::string_view s);

/// Readable rendering of a toy text ("w3 w17 , w22"), used on the wire and in the UI.
std::string render_text(const std::vector<int>& text, const Domain& d);
/// Inverse of render_text; throws ContractViolation on unknown tokens.
std::vector<int> parse_text(std::string_view s, const Domain& d);

}  // namespace prefalign
