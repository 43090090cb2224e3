#include "prefalign/domain.hpp"

#include <charconv>
#include <sstream>

#include "prefalign/numerics.hpp"

namespace prefalign {

void Domain::validate() const {
  require(v_text >= 2 && v_text % 2 == 0, "Domain: v_text must be even and >= 2");
  require(v_speech >= v_text + 1, "Domain: v_speech must cover every text symbol");
  require(v_text + 1 <= 64, "Domain: continuous codebook holds at most 64 symbols");
  require(speakers >= 1 && speakers <= v_speech, "Domain: speakers out of range");
  require(hidden >= 1 && embed >= 1, "Domain: hidden/embed must be positive");
}

std::string_view to_string(Language l) {
  switch (l) {
    case Language::L1: return "L1";
    case Language::L2: return "L2";
    case Language::Mixed: return "mixed";
  }
  return "?";
}

Language language_from_string(std::string_view s) {
  if (s == "L1") return Language::L1;
  if (s == "L2") return Language::L2;
  if (s == "mixed") return Language::Mixed;
  throw ContractViolation("unknown language tag: " + std::string(s));
}

void validate_prompt(const ToyPrompt& p, const Domain& d) {
  require(!p.text.empty(), "ToyPrompt: empty text");
  require(p.speaker >= 0 && p.speaker < d.speakers, "ToyPrompt: speaker out of range");
  require(p.speech_language != Language::Mixed, "ToyPrompt: speech language must be L1 or L2");
  bool any_word = false;
  for (int w : p.text) {
    require(w >= 0 && w <= d.boundary(), "ToyPrompt: word id outside vocabulary");
    if (w == d.boundary()) continue;
    any_word = true;
    if (p.text_language == Language::L1) require(d.is_l1(w), "ToyPrompt: L2 word in L1 text");
    if (p.text_language == Language::L2) require(!d.is_l1(w), "ToyPrompt: L1 word in L2 text");
  }
  require(any_word, "ToyPrompt: text has no words");
}

std::vector<int> words_only(const std::vector<int>& text, const Domain& d) {
  std::vector<int> out;
  out.reserve(text.size());
  for (int w : text)
    if (w != d.boundary()) out.push_back(w);
  return out;
}

std::string_view to_string(SampleKind k) { return k == SampleKind::Discrete ? "discrete" : "continuous"; }

SampleKind sample_kind_from_string(std::string_view s) {
  if (s == "discrete") return SampleKind::Discrete;
  if (s == "continuous") return SampleKind::Continuous;
  throw ContractViolation("unknown sample kind: " + std::string(s));
}

std::string_view to_string(TextType t) {
  switch (t) {
    case TextType::Regular: return "regular";
    case TextType::Repeated: return "repeated";
    case TextType::CodeSwitching: return "code_switching";
    case TextType::PronunciationPerturbed: return "pronunciation_perturbed";
    case TextType::PunctuationPerturbed: return "punctuation_perturbed";
  }
  return "?";
}

TextType text_type_from_string(std::string_view s) {
  for (auto t : kAllTextTypes)
    if (to_string(t) == s) return t;
  throw ContractViolation("unknown text type: " + std::string(s));
}

std::string render_text(const std::vector<int>& text, const Domain& d) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (i) out += ' ';
    if (text[i] == d.boundary())
      out += ',';
    else
      out += 'w' + std::to_string(text[i]);
  }
  return out;
}

std::vector<int> parse_text(std::string_view s, const Domain& d) {
  std::vector<int> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) {
    if (tok == ",") {
      out.push_back(d.boundary());
      continue;
    }
    int id = -1;
    const char* first = tok.data() + 1;
    const char* last = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(first, last, id);
    require(tok.size() >= 2 && tok[0] == 'w' && ec == std::errc{} && ptr == last && d.is_word(id),
            "parse_text: unrecognized token");
    out.push_back(id);
  }
  return out;
}

}  // namespace prefalign
