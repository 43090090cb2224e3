#include "prefalign/channel.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "prefalign/numerics.hpp"

namespace prefalign {

void ChannelSpec::validate() const {
  domain.validate();
  for (double r : {substitution_rate, deletion_rate, insertion_rate})
    require(r >= 0.0 && r <= 1.0, "ChannelSpec: rates must lie in [0, 1]");
  require(substitution_rate + deletion_rate + insertion_rate <= 1.0 + 1e-12, "ChannelSpec: rates sum above 1");
}

int ChannelSpec::stride() const noexcept { return std::max(1, domain.v_speech / domain.speakers); }

int ChannelSpec::token(int word, int speaker) const {
  require(word >= 0 && word <= domain.boundary(), "ChannelSpec::token: word outside codebook");
  require(speaker >= 0 && speaker < domain.speakers, "ChannelSpec::token: speaker out of range");
  return (word + stride() * speaker) % domain.v_speech;
}

std::optional<int> ChannelSpec::word_of_token(int tok, int speaker) const {
  if (tok < 0 || tok >= domain.v_speech) return std::nullopt;
  const int v = domain.v_speech;
  const int w = ((tok - stride() * speaker) % v + v) % v;
  if (w > domain.boundary()) return std::nullopt;
  return w;
}

Frame ChannelSpec::grid_point(int word) const {
  require(word >= 0 && word <= domain.boundary(), "ChannelSpec::grid_point: word outside codebook");
  const double step = 2.0 / (kGridSide - 1);
  return {-1.0 + step * (word % kGridSide), -1.0 + step * (word / kGridSide)};
}

Frame ChannelSpec::offset(int speaker) const {
  require(speaker >= 0 && speaker < domain.speakers, "ChannelSpec::offset: speaker out of range");
  const double a = 2.0 * std::numbers::pi * speaker / domain.speakers;
  return {kOffsetRadius * std::cos(a), kOffsetRadius * std::sin(a)};
}

Frame ChannelSpec::codeword(int word, int speaker) const {
  const auto g = grid_point(word);
  const auto o = offset(speaker);
  return {g[0] + o[0], g[1] + o[1]};
}

int ChannelSpec::nearest_symbol(const Frame& f) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int w = 0; w <= domain.boundary(); ++w) {
    const auto g = grid_point(w);
    const double d = (f[0] - g[0]) * (f[0] - g[0]) + (f[1] - g[1]) * (f[1] - g[1]);
    if (d < best_d) {
      best_d = d;
      best = w;
    }
  }
  return best;
}

ChannelSpec ChannelSpec::with_noise(double sub, double del, double ins) const {
  ChannelSpec c = *this;
  c.substitution_rate = sub;
  c.deletion_rate = del;
  c.insertion_rate = ins;
  c.validate();
  return c;
}

SpeechSample render_reference(const std::vector<int>& text, int speaker, const ChannelSpec& channel,
                              SampleKind kind) {
  require(!text.empty(), "render_reference: empty text");
  SpeechSample s;
  s.kind = kind;
  s.hyper = 1.0;
  for (int w : text) {
    if (kind == SampleKind::Discrete)
      s.tokens.push_back(channel.token(w, speaker));
    else
      s.frames.push_back(channel.codeword(w, speaker));
  }
  return s;
}

std::vector<int> transcribe(const SpeechSample& speech, int speaker, const ChannelSpec& channel, RngStream& rng) {
  const Domain& d = channel.domain;
  std::vector<int> decoded;
  if (speech.kind == SampleKind::Discrete) {
    for (int t : speech.tokens) {
      auto w = channel.word_of_token(t, speaker);
      decoded.push_back(w ? *w : kUnintelligible);
    }
  } else {
    for (const auto& f : speech.frames) decoded.push_back(channel.nearest_symbol(f));
  }

  const double p_sub = channel.substitution_rate;
  const double p_del = p_sub + channel.deletion_rate;
  const double p_ins = p_del + channel.insertion_rate;
  const bool noisy = p_ins > 0.0;
  std::vector<int> out;
  out.reserve(decoded.size());
  for (int w : decoded) {
    if (w == d.boundary()) continue;
    if (!noisy) {
      out.push_back(w);
      continue;
    }
    const double u = rng.uniform();
    if (u < p_sub) {
      int r = static_cast<int>(rng.index(static_cast<std::size_t>(d.v_text - 1)));
      if (r >= w && w >= 0) ++r;
      out.push_back(r);
    } else if (u < p_del) {
      // dropped
    } else if (u < p_ins) {
      out.push_back(w);
      out.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(d.v_text))));
    } else {
      out.push_back(w);
    }
  }
  return out;
}

}  // namespace prefalign
