#pragma once

#include <string_view>
#include <variant>
#include <vector>

#include "prefalign/channel.hpp"
#include "prefalign/domain.hpp"
#include "prefalign/numerics.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

enum class Paradigm { AR, FM, MGM };
std::string_view to_string(Paradigm p);
Paradigm paradigm_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Autoregressive model
//
// logit(k | prev, word, speaker) = emit[word, speaker, k] + trans[prev, k] + bias[k]
// with prev = v_speech (a BOS row) at the first position. One token per text element.
// ---------------------------------------------------------------------------
struct ToyARModel {
  enum : std::size_t { kEmit = 0, kTrans = 1, kBias = 2 };

  Domain domain;
  ParamSet params;

  static ToyARModel uniform(const Domain& d);
  std::vector<double> logits(int prev, int word, int speaker) const;
};

struct ArLogProb {
  double total = 0.0;
  std::vector<double> per_token;
};

ArLogProb ar_logprob(const ToyARModel& m, const ToyPrompt& x, const SpeechSample& y);
/// grads += scale * d(log p(y|x)) / d(params). Returns log p(y|x).
double ar_logprob_backward(const ToyARModel& m, const ToyPrompt& x, const SpeechSample& y, double scale,
                           ParamSet& grads);

struct ArSampling {
  double temperature = 1.0;
  int top_k = 20;
  double top_p = 1.0;
};

/// Temperature-scaled, top-k then top-p truncated and renormalized next-token
/// distribution. Temperatures below 1e-6 collapse to a one-hot argmax.
std::vector<double> truncated_distribution(std::span<const double> logits, const ArSampling& s);

SpeechSample ar_sample(const ToyARModel& m, const ToyPrompt& x, const ArSampling& s, RngStream& rng);

// ---------------------------------------------------------------------------
// Flow-matching model: per-frame two-layer tanh perceptron
//   in  = [y_t (2), t, word_emb[w] (E), spk_emb[s] (E)]
//   v   = W2 tanh(W1 in + b1) + b2
// ---------------------------------------------------------------------------
struct ToyFMModel {
  enum : std::size_t { kWordEmb = 0, kSpkEmb = 1, kW1 = 2, kB1 = 3, kW2 = 4, kB2 = 5 };

  Domain domain;
  ParamSet params;

  /// Random embeddings and first layer; zero output layer (so the field starts at zero).
  static ToyFMModel init(const Domain& d, RngStream& rng, double scale = 0.5);
  std::size_t input_width() const noexcept { return 3 + 2 * static_cast<std::size_t>(domain.embed); }
};

std::vector<Frame> fm_velocity(const ToyFMModel& m, const std::vector<Frame>& y_t, double t, const ToyPrompt& x);

/// grads += scale * d(||v(y_t) - target||^2) / d(params). Returns the squared error.
double fm_sqerr_backward(const ToyFMModel& m, const std::vector<Frame>& y_t, double t, const ToyPrompt& x,
                         const std::vector<Frame>& target, double scale, ParamSet& grads);

inline constexpr int kDefaultFmSteps = 32;

/// Euler integration from standard-normal noise; frame count round(scale * |text|), min 1.
SpeechSample fm_sample(const ToyFMModel& m, const ToyPrompt& x, double duration_scale, int steps, RngStream& rng);
/// Integrate a given initial noise draw; the noise is consumed as y_0.
std::vector<Frame> fm_integrate(const ToyFMModel& m, const ToyPrompt& x, std::vector<Frame> y0, int steps);

/// (1 - t) y0 + t y1
std::vector<Frame> interpolate(const std::vector<Frame>& y0, const std::vector<Frame>& y1, double t);

// ---------------------------------------------------------------------------
// Masked generative model
//   ctx          = sum of tok_emb[y_j] over unmasked positions j
//   logit_i(k)   = emit[word_i, speaker, k] + ctx_proj[k] . ctx + bias[k]
// ---------------------------------------------------------------------------
struct ToyMGMModel {
  enum : std::size_t { kEmit = 0, kCtxProj = 1, kTokEmb = 2, kBias = 3 };

  Domain domain;
  ParamSet params;

  static ToyMGMModel uniform(const Domain& d);
  static ToyMGMModel init(const Domain& d, RngStream& rng, double scale = 0.1);
};

struct MgmPrediction {
  std::vector<std::size_t> positions;
  std::vector<std::vector<double>> probs;  // one distribution per masked position
};

/// Masked positions of `y_t` are those with mask[i] == 1; their contents are ignored.
MgmPrediction mgm_predict(const ToyMGMModel& m, const std::vector<int>& y_t, const std::vector<int>& mask,
                          const ToyPrompt& x);

/// grads += scale * d(sum_{masked i} log p(y_i | y_t, x)) / d(params). Returns that sum.
double mgm_logprob_backward(const ToyMGMModel& m, const ToyPrompt& x, const std::vector<int>& y,
                            const std::vector<int>& mask, double scale, ParamSet* grads);

struct MgmSampling {
  double temperature = 1.0;
  int steps = 8;
};

/// Iterative confidence-ordered unmasking from an all-mask start.
SpeechSample mgm_sample(const ToyMGMModel& m, const ToyPrompt& x, const MgmSampling& s, RngStream& rng);

// ---------------------------------------------------------------------------

using GenerativeModel = std::variant<ToyARModel, ToyFMModel, ToyMGMModel>;

Paradigm paradigm_of(const GenerativeModel& m);
const Domain& domain_of(const GenerativeModel& m);
const ParamSet& params_of(const GenerativeModel& m);
ParamSet& params_of(GenerativeModel& m);

/// Sampling knobs shared by every paradigm. `hyper` (the value varied by the
/// 5-sampling schedule) is a temperature for AR/MGM and a duration scale for FM.
struct SamplerDefaults {
  int top_k = 20;
  double top_p = 1.0;
  int fm_steps = kDefaultFmSteps;
  int mgm_steps = 8;
};

SpeechSample generate(const GenerativeModel& m, const ToyPrompt& x, double hyper, const SamplerDefaults& defaults,
                      RngStream& rng);

}  // namespace prefalign
