#pragma once

#include <optional>
#include <vector>

#include "prefalign/domain.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

/// Ground-truth text-to-speech channel plus a noisy transcriber.
///
/// Discrete codebook: token(w, s) = (w + stride * s) mod v_speech with
/// stride = v_speech / speakers, injective per speaker and distinct across speakers
/// for a fixed word. Continuous codebook: word w sits on point w of an 8x8 grid over
/// [-1, 1]^2, shifted by a small speaker offset of fixed radius.
struct ChannelSpec {
  Domain domain;
  double substitution_rate = 0.0;
  double deletion_rate = 0.0;
  double insertion_rate = 0.0;

  static constexpr double kOffsetRadius = 0.06;
  static constexpr int kGridSide = 8;

  void validate() const;
  int stride() const noexcept;
  int token(int word, int speaker) const;
  /// Word whose codebook entry for `speaker` is `token`, if any.
  std::optional<int> word_of_token(int token, int speaker) const;
  Frame grid_point(int word) const;
  Frame offset(int speaker) const;
  Frame codeword(int word, int speaker) const;
  /// Nearest text symbol (word or boundary) to `f`, ignoring speaker offsets.
  int nearest_symbol(const Frame& f) const;
  ChannelSpec with_noise(double sub, double del, double ins) const;
};

/// Transcriber output for a discrete token that is not in the speaker's codebook.
inline constexpr int kUnintelligible = -1;

SpeechSample render_reference(const std::vector<int>& text, int speaker, const ChannelSpec& channel,
                              SampleKind kind);

/// Decode to text symbols, drop boundaries, then apply the configured
/// substitution/deletion/insertion noise per decoded word.
std::vector<int> transcribe(const SpeechSample& speech, int speaker, const ChannelSpec& channel, RngStream& rng);

/// Index of the text element that frame/token `pos` of an `out_len`-long sample is aligned to.
inline std::size_t aligned_index(std::size_t pos, std::size_t out_len, std::size_t text_len) {
  return pos * text_len / out_len;
}

}  // namespace prefalign
