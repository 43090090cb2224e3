#include "prefalign/toymodels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prefalign {

std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::AR: return "ar";
    case Paradigm::FM: return "fm";
    case Paradigm::MGM: return "mgm";
  }
  return "?";
}

Paradigm paradigm_from_string(std::string_view s) {
  if (s == "ar" || s == "AR") return Paradigm::AR;
  if (s == "fm" || s == "FM") return Paradigm::FM;
  if (s == "mgm" || s == "MGM") return Paradigm::MGM;
  throw ContractViolation("unknown paradigm: " + std::string(s));
}

namespace {

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

std::size_t emit_offset(const Domain& d, int word, int speaker) {
  return (sz(word) * sz(d.speakers) + sz(speaker)) * sz(d.v_speech);
}

void check_prompt_speaker(const ToyPrompt& x, const Domain& d) {
  require(!x.text.empty(), "prompt text must be non-empty");
  require(x.speaker >= 0 && x.speaker < d.speakers, "prompt speaker out of range");
  for (int w : x.text) require(w >= 0 && w <= d.boundary(), "prompt word id outside vocabulary");
}

}  // namespace

// --------------------------------------------------------------------------- AR

ToyARModel ToyARModel::uniform(const Domain& d) {
  d.validate();
  ToyARModel m;
  m.domain = d;
  m.params.emplace_back(std::vector<std::size_t>{sz(d.text_symbols()), sz(d.speakers), sz(d.v_speech)});
  m.params.emplace_back(std::vector<std::size_t>{sz(d.v_speech + 1), sz(d.v_speech)});
  m.params.emplace_back(std::vector<std::size_t>{sz(d.v_speech)});
  return m;
}

std::vector<double> ToyARModel::logits(int prev, int word, int speaker) const {
  const std::size_t v = sz(domain.v_speech);
  std::vector<double> out(v);
  const double* emit = params[kEmit].data() + emit_offset(domain, word, speaker);
  const double* trans = params[kTrans].data() + sz(prev) * v;
  const double* bias = params[kBias].data();
  for (std::size_t k = 0; k < v; ++k) out[k] = emit[k] + trans[k] + bias[k];
  return out;
}

ArLogProb ar_logprob(const ToyARModel& m, const ToyPrompt& x, const SpeechSample& y) {
  require(y.kind == SampleKind::Discrete, "ar_logprob: sample must be discrete");
  require(y.tokens.size() == x.text.size(), "ar_logprob: sample length must equal text length");
  check_prompt_speaker(x, m.domain);
  ArLogProb out;
  int prev = m.domain.v_speech;
  for (std::size_t i = 0; i < y.tokens.size(); ++i) {
    const int tok = y.tokens[i];
    require(tok >= 0 && tok < m.domain.v_speech, "ar_logprob: token out of range");
    const auto lp = log_softmax(m.logits(prev, x.text[i], x.speaker));
    out.per_token.push_back(lp[sz(tok)]);
    out.total += lp[sz(tok)];
    prev = tok;
  }
  return out;
}

double ar_logprob_backward(const ToyARModel& m, const ToyPrompt& x, const SpeechSample& y, double scale,
                           ParamSet& grads) {
  require(y.kind == SampleKind::Discrete, "ar_logprob_backward: sample must be discrete");
  require(y.tokens.size() == x.text.size(), "ar_logprob_backward: sample length must equal text length");
  const std::size_t v = sz(m.domain.v_speech);
  double total = 0.0;
  int prev = m.domain.v_speech;
  for (std::size_t i = 0; i < y.tokens.size(); ++i) {
    const int tok = y.tokens[i];
    const auto lp = log_softmax(m.logits(prev, x.text[i], x.speaker));
    total += lp[sz(tok)];
    double* ge = grads[ToyARModel::kEmit].data() + emit_offset(m.domain, x.text[i], x.speaker);
    double* gt = grads[ToyARModel::kTrans].data() + sz(prev) * v;
    double* gb = grads[ToyARModel::kBias].data();
    for (std::size_t k = 0; k < v; ++k) {
      const double d = scale * ((k == sz(tok) ? 1.0 : 0.0) - std::exp(lp[k]));
      ge[k] += d;
      gt[k] += d;
      gb[k] += d;
    }
    prev = tok;
  }
  return total;
}

std::vector<double> truncated_distribution(std::span<const double> logits, const ArSampling& s) {
  require(s.top_k >= 1, "top_k must be positive");
  require(s.top_p > 0.0 && s.top_p <= 1.0, "top_p must lie in (0, 1]");
  require(s.temperature > 0.0, "temperature must be positive");
  const std::size_t n = logits.size();
  std::vector<double> out(n, 0.0);
  if (s.temperature < 1e-6 || s.top_k == 1) {
    out[sz(static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()))] = 1.0;
    return out;
  }
  std::vector<double> scaled(logits.begin(), logits.end());
  for (double& v : scaled) v /= s.temperature;
  const auto p = softmax(scaled);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  const std::size_t k = std::min(n, sz(s.top_k));
  double kept_mass = 0.0;
  for (std::size_t i = 0; i < k; ++i) kept_mass += p[order[i]];
  double acc = 0.0;
  std::size_t keep = 0;
  while (keep < k) {
    acc += p[order[keep]] / kept_mass;
    ++keep;
    if (acc >= s.top_p) break;
  }
  double z = 0.0;
  for (std::size_t i = 0; i < keep; ++i) z += p[order[i]];
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = p[order[i]] / z;
  return out;
}

SpeechSample ar_sample(const ToyARModel& m, const ToyPrompt& x, const ArSampling& s, RngStream& rng) {
  check_prompt_speaker(x, m.domain);
  SpeechSample y;
  y.kind = SampleKind::Discrete;
  y.hyper = s.temperature;
  int prev = m.domain.v_speech;
  for (int w : x.text) {
    const auto dist = truncated_distribution(m.logits(prev, w, x.speaker), s);
    const int tok = static_cast<int>(rng.categorical(dist));
    y.tokens.push_back(tok);
    prev = tok;
  }
  return y;
}

// --------------------------------------------------------------------------- FM

ToyFMModel ToyFMModel::init(const Domain& d, RngStream& rng, double scale) {
  d.validate();
  ToyFMModel m;
  m.domain = d;
  const std::size_t e = sz(d.embed), h = sz(d.hidden);
  m.params.emplace_back(std::vector<std::size_t>{sz(d.text_symbols()), e});
  m.params.emplace_back(std::vector<std::size_t>{sz(d.speakers), e});
  m.params.emplace_back(std::vector<std::size_t>{h, m.input_width()});
  m.params.emplace_back(std::vector<std::size_t>{h});
  m.params.emplace_back(std::vector<std::size_t>{sz(kFrameDim), h});
  m.params.emplace_back(std::vector<std::size_t>{sz(kFrameDim)});
  for (std::size_t k : {kWordEmb, kSpkEmb, kW1})
    for (double& v : m.params[k].values()) v = scale * rng.normal();
  return m;
}

namespace {

struct FmActivation {
  std::vector<double> in;
  std::vector<double> h;
  Frame v{};
};

FmActivation fm_forward(const ToyFMModel& m, const Frame& y, double t, int word, int speaker) {
  const std::size_t e = sz(m.domain.embed), hdim = sz(m.domain.hidden), iw = m.input_width();
  FmActivation a;
  a.in.resize(iw);
  a.in[0] = y[0];
  a.in[1] = y[1];
  a.in[2] = t;
  const double* we = m.params[ToyFMModel::kWordEmb].data() + sz(word) * e;
  const double* se = m.params[ToyFMModel::kSpkEmb].data() + sz(speaker) * e;
  for (std::size_t i = 0; i < e; ++i) {
    a.in[3 + i] = we[i];
    a.in[3 + e + i] = se[i];
  }
  const auto& w1 = m.params[ToyFMModel::kW1];
  const auto& b1 = m.params[ToyFMModel::kB1];
  a.h.resize(hdim);
  for (std::size_t j = 0; j < hdim; ++j) {
    double acc = b1[j];
    for (std::size_t i = 0; i < iw; ++i) acc += w1[j * iw + i] * a.in[i];
    a.h[j] = std::tanh(acc);
  }
  const auto& w2 = m.params[ToyFMModel::kW2];
  const auto& b2 = m.params[ToyFMModel::kB2];
  for (std::size_t o = 0; o < sz(kFrameDim); ++o) {
    double acc = b2[o];
    for (std::size_t j = 0; j < hdim; ++j) acc += w2[o * hdim + j] * a.h[j];
    a.v[o] = acc;
  }
  return a;
}

}  // namespace

std::vector<Frame> fm_velocity(const ToyFMModel& m, const std::vector<Frame>& y_t, double t, const ToyPrompt& x) {
  require(t >= 0.0 && t <= 1.0, "fm_velocity: t must lie in [0, 1]");
  require(!y_t.empty(), "fm_velocity: no frames");
  check_prompt_speaker(x, m.domain);
  std::vector<Frame> out(y_t.size());
  for (std::size_t j = 0; j < y_t.size(); ++j) {
    const int w = x.text[aligned_index(j, y_t.size(), x.text.size())];
    out[j] = fm_forward(m, y_t[j], t, w, x.speaker).v;
  }
  return out;
}

double fm_sqerr_backward(const ToyFMModel& m, const std::vector<Frame>& y_t, double t, const ToyPrompt& x,
                         const std::vector<Frame>& target, double scale, ParamSet& grads) {
  require(y_t.size() == target.size(), "fm_sqerr_backward: frame count mismatch");
  const std::size_t e = sz(m.domain.embed), hdim = sz(m.domain.hidden), iw = m.input_width();
  const auto& w1 = m.params[ToyFMModel::kW1];
  const auto& w2 = m.params[ToyFMModel::kW2];
  double err = 0.0;
  std::vector<double> da(hdim), din(iw);
  for (std::size_t j = 0; j < y_t.size(); ++j) {
    const int w = x.text[aligned_index(j, y_t.size(), x.text.size())];
    const auto a = fm_forward(m, y_t[j], t, w, x.speaker);
    Frame dv{};
    for (std::size_t o = 0; o < sz(kFrameDim); ++o) {
      const double r = a.v[o] - target[j][o];
      err += r * r;
      dv[o] = 2.0 * r * scale;
    }
    auto& gw2 = grads[ToyFMModel::kW2];
    auto& gb2 = grads[ToyFMModel::kB2];
    for (std::size_t o = 0; o < sz(kFrameDim); ++o) {
      gb2[o] += dv[o];
      for (std::size_t k = 0; k < hdim; ++k) gw2[o * hdim + k] += dv[o] * a.h[k];
    }
    for (std::size_t k = 0; k < hdim; ++k) {
      double dh = 0.0;
      for (std::size_t o = 0; o < sz(kFrameDim); ++o) dh += w2[o * hdim + k] * dv[o];
      da[k] = dh * (1.0 - a.h[k] * a.h[k]);
    }
    auto& gw1 = grads[ToyFMModel::kW1];
    auto& gb1 = grads[ToyFMModel::kB1];
    std::fill(din.begin(), din.end(), 0.0);
    for (std::size_t k = 0; k < hdim; ++k) {
      gb1[k] += da[k];
      for (std::size_t i = 0; i < iw; ++i) {
        gw1[k * iw + i] += da[k] * a.in[i];
        din[i] += w1[k * iw + i] * da[k];
      }
    }
    double* gwe = grads[ToyFMModel::kWordEmb].data() + sz(w) * e;
    double* gse = grads[ToyFMModel::kSpkEmb].data() + sz(x.speaker) * e;
    for (std::size_t i = 0; i < e; ++i) {
      gwe[i] += din[3 + i];
      gse[i] += din[3 + e + i];
    }
  }
  return err;
}

std::vector<Frame> interpolate(const std::vector<Frame>& y0, const std::vector<Frame>& y1, double t) {
  require(y0.size() == y1.size(), "interpolate: frame count mismatch");
  std::vector<Frame> out(y0.size());
  for (std::size_t j = 0; j < y0.size(); ++j)
    for (std::size_t o = 0; o < sz(kFrameDim); ++o) out[j][o] = (1.0 - t) * y0[j][o] + t * y1[j][o];
  return out;
}

std::vector<Frame> fm_integrate(const ToyFMModel& m, const ToyPrompt& x, std::vector<Frame> y, int steps) {
  require(steps >= 1, "fm_integrate: steps must be >= 1");
  const double dt = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    const auto v = fm_velocity(m, y, s * dt, x);
    for (std::size_t j = 0; j < y.size(); ++j)
      for (std::size_t o = 0; o < sz(kFrameDim); ++o) y[j][o] += dt * v[j][o];
  }
  return y;
}

SpeechSample fm_sample(const ToyFMModel& m, const ToyPrompt& x, double duration_scale, int steps, RngStream& rng) {
  require(steps >= 1, "fm_sample: steps must be >= 1");
  require(duration_scale > 0.0, "fm_sample: duration scale must be positive");
  const auto n = std::max<long>(1, std::lround(duration_scale * static_cast<double>(x.text.size())));
  std::vector<Frame> y0(static_cast<std::size_t>(n));
  for (auto& f : y0)
    for (double& v : f) v = rng.normal();
  SpeechSample out;
  out.kind = SampleKind::Continuous;
  out.hyper = duration_scale;
  out.frames = fm_integrate(m, x, std::move(y0), steps);
  return out;
}

// --------------------------------------------------------------------------- MGM

ToyMGMModel ToyMGMModel::uniform(const Domain& d) {
  d.validate();
  ToyMGMModel m;
  m.domain = d;
  const std::size_t v = sz(d.v_speech), e = sz(d.embed);
  m.params.emplace_back(std::vector<std::size_t>{sz(d.text_symbols()), sz(d.speakers), v});
  m.params.emplace_back(std::vector<std::size_t>{v, e});
  m.params.emplace_back(std::vector<std::size_t>{v, e});
  m.params.emplace_back(std::vector<std::size_t>{v});
  return m;
}

ToyMGMModel ToyMGMModel::init(const Domain& d, RngStream& rng, double scale) {
  auto m = uniform(d);
  for (std::size_t k : {kCtxProj, kTokEmb})
    for (double& v : m.params[k].values()) v = scale * rng.normal();
  return m;
}

namespace {

std::vector<double> mgm_context(const ToyMGMModel& m, const std::vector<int>& y, const std::vector<int>& mask) {
  const std::size_t e = sz(m.domain.embed);
  std::vector<double> ctx(e, 0.0);
  const auto& emb = m.params[ToyMGMModel::kTokEmb];
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (mask[j]) continue;
    require(y[j] >= 0 && y[j] < m.domain.v_speech, "mgm: unmasked token out of range");
    for (std::size_t d = 0; d < e; ++d) ctx[d] += emb[sz(y[j]) * e + d];
  }
  return ctx;
}

std::vector<double> mgm_logits(const ToyMGMModel& m, const std::vector<double>& ctx, int word, int speaker) {
  const std::size_t v = sz(m.domain.v_speech), e = sz(m.domain.embed);
  const double* emit = m.params[ToyMGMModel::kEmit].data() + emit_offset(m.domain, word, speaker);
  const auto& proj = m.params[ToyMGMModel::kCtxProj];
  const auto& bias = m.params[ToyMGMModel::kBias];
  std::vector<double> out(v);
  for (std::size_t k = 0; k < v; ++k) {
    double acc = emit[k] + bias[k];
    for (std::size_t d = 0; d < e; ++d) acc += proj[k * e + d] * ctx[d];
    out[k] = acc;
  }
  return out;
}

void check_mgm_inputs(const ToyMGMModel& m, const std::vector<int>& y, const std::vector<int>& mask,
                      const ToyPrompt& x) {
  check_prompt_speaker(x, m.domain);
  require(mask.size() == y.size(), "mgm: mask length must equal sequence length");
  require(y.size() == x.text.size(), "mgm: sequence length must equal text length");
}

}  // namespace

MgmPrediction mgm_predict(const ToyMGMModel& m, const std::vector<int>& y_t, const std::vector<int>& mask,
                          const ToyPrompt& x) {
  check_mgm_inputs(m, y_t, mask, x);
  const auto ctx = mgm_context(m, y_t, mask);
  MgmPrediction out;
  for (std::size_t i = 0; i < y_t.size(); ++i) {
    if (!mask[i]) continue;
    out.positions.push_back(i);
    out.probs.push_back(softmax(mgm_logits(m, ctx, x.text[i], x.speaker)));
  }
  return out;
}

double mgm_logprob_backward(const ToyMGMModel& m, const ToyPrompt& x, const std::vector<int>& y,
                            const std::vector<int>& mask, double scale, ParamSet* grads) {
  check_mgm_inputs(m, y, mask, x);
  const std::size_t v = sz(m.domain.v_speech), e = sz(m.domain.embed);
  const auto ctx = mgm_context(m, y, mask);
  const auto& proj = m.params[ToyMGMModel::kCtxProj];
  std::vector<double> dctx(e, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!mask[i]) continue;
    require(y[i] >= 0 && y[i] < m.domain.v_speech, "mgm: target token out of range");
    const auto lp = log_softmax(mgm_logits(m, ctx, x.text[i], x.speaker));
    total += lp[sz(y[i])];
    if (!grads) continue;
    double* ge = (*grads)[ToyMGMModel::kEmit].data() + emit_offset(m.domain, x.text[i], x.speaker);
    auto& gp = (*grads)[ToyMGMModel::kCtxProj];
    auto& gb = (*grads)[ToyMGMModel::kBias];
    for (std::size_t k = 0; k < v; ++k) {
      const double d = scale * ((k == sz(y[i]) ? 1.0 : 0.0) - std::exp(lp[k]));
      ge[k] += d;
      gb[k] += d;
      for (std::size_t c = 0; c < e; ++c) {
        gp[k * e + c] += d * ctx[c];
        dctx[c] += d * proj[k * e + c];
      }
    }
  }
  if (grads) {
    auto& gemb = (*grads)[ToyMGMModel::kTokEmb];
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (mask[j]) continue;
      for (std::size_t c = 0; c < e; ++c) gemb[sz(y[j]) * e + c] += dctx[c];
    }
  }
  return total;
}

SpeechSample mgm_sample(const ToyMGMModel& m, const ToyPrompt& x, const MgmSampling& s, RngStream& rng) {
  require(s.steps >= 1, "mgm_sample: steps must be >= 1");
  require(s.temperature > 0.0, "mgm_sample: temperature must be positive");
  check_prompt_speaker(x, m.domain);
  const std::size_t n = x.text.size();
  std::vector<int> y(n, m.domain.mask_token());
  std::vector<int> mask(n, 1);
  const std::size_t per_step = (n + sz(s.steps) - 1) / sz(s.steps);
  const ArSampling tempered{s.temperature, m.domain.v_speech, 1.0};

  std::size_t remaining = n;
  while (remaining > 0) {
    const auto pred = mgm_predict(m, y, mask, x);
    std::vector<int> draws(pred.positions.size());
    std::vector<double> confidence(pred.positions.size());
    for (std::size_t i = 0; i < pred.positions.size(); ++i) {
      std::vector<double> logp(pred.probs[i].size());
      for (std::size_t k = 0; k < logp.size(); ++k) logp[k] = std::log(std::max(pred.probs[i][k], 1e-300));
      const auto dist = truncated_distribution(logp, tempered);
      draws[i] = static_cast<int>(rng.categorical(dist));
      confidence[i] = *std::max_element(dist.begin(), dist.end());
    }
    std::vector<std::size_t> order(pred.positions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return confidence[a] > confidence[b]; });
    const std::size_t take = std::min(per_step, remaining);
    for (std::size_t r = 0; r < take; ++r) {
      const std::size_t pos = pred.positions[order[r]];
      y[pos] = draws[order[r]];
      mask[pos] = 0;
    }
    remaining -= take;
  }

  SpeechSample out;
  out.kind = SampleKind::Discrete;
  out.tokens = std::move(y);
  out.hyper = s.temperature;
  return out;
}

// --------------------------------------------------------------------------- variant helpers

Paradigm paradigm_of(const GenerativeModel& m) {
  return std::visit(
      [](const auto& mm) {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, ToyARModel>) return Paradigm::AR;
        else if constexpr (std::is_same_v<T, ToyFMModel>) return Paradigm::FM;
        else return Paradigm::MGM;
      },
      m);
}

const Domain& domain_of(const GenerativeModel& m) {
  return std::visit([](const auto& mm) -> const Domain& { return mm.domain; }, m);
}

const ParamSet& params_of(const GenerativeModel& m) {
  return std::visit([](const auto& mm) -> const ParamSet& { return mm.params; }, m);
}

ParamSet& params_of(GenerativeModel& m) {
  return std::visit([](auto& mm) -> ParamSet& { return mm.params; }, m);
}

SpeechSample generate(const GenerativeModel& m, const ToyPrompt& x, double hyper, const SamplerDefaults& defaults,
                      RngStream& rng) {
  return std::visit(
      [&](const auto& mm) {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, ToyARModel>)
          return ar_sample(mm, x, ArSampling{hyper, defaults.top_k, defaults.top_p}, rng);
        else if constexpr (std::is_same_v<T, ToyFMModel>)
          return fm_sample(mm, x, hyper, defaults.fm_steps, rng);
        else
          return mgm_sample(mm, x, MgmSampling{hyper, defaults.mgm_steps}, rng);
      },
      m);
}

}  // namespace prefalign
