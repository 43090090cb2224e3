#include "prefalign/dpo.hpp"

#include <algorithm>
#include <cmath>

namespace prefalign {

double default_beta(Paradigm p) {
  switch (p) {
    case Paradigm::AR: return kDefaultBetaAR;
    case Paradigm::FM: return kDefaultBetaFM;
    case Paradigm::MGM: return kDefaultBetaMGM;
  }
  return kDefaultBetaAR;
}

DpoConfig DpoConfig::defaults(Paradigm p) { return DpoConfig{default_beta(p), p}; }

namespace {

LossReport logistic(double margin) {
  LossReport r;
  r.margin = margin;
  r.loss = -log_sigmoid(margin);
  return r;
}

void check_beta(double beta) { require(beta > 0.0 && std::isfinite(beta), "beta must be positive"); }

}  // namespace

LossReport bt_reward_loss(double r_w, double r_l) {
  auto r = logistic(r_w - r_l);
  const double g = -sigmoid(-r.margin);
  r.grad.emplace_back(std::vector<std::size_t>{2}, std::vector<double>{g, -g});
  return r;
}

LossReport dpo_ar_loss(double logp_w, double logp_ref_w, double logp_l, double logp_ref_l, double beta) {
  check_beta(beta);
  auto r = logistic(beta * ((logp_w - logp_ref_w) - (logp_l - logp_ref_l)));
  const double g = -beta * sigmoid(-r.margin);
  r.grad.emplace_back(std::vector<std::size_t>{2}, std::vector<double>{g, -g});
  return r;
}

LossReport dpo_ar_pair_loss(const ToyARModel& model, const ToyARModel& ref, const ToyPrompt& x,
                            const SpeechSample& y_w, const SpeechSample& y_l, double beta) {
  const double ref_w = ar_logprob(ref, x, y_w).total;
  const double ref_l = ar_logprob(ref, x, y_l).total;
  const double pol_w = ar_logprob(model, x, y_w).total;
  const double pol_l = ar_logprob(model, x, y_l).total;
  auto scalar = dpo_ar_loss(pol_w, ref_w, pol_l, ref_l, beta);
  LossReport r;
  r.loss = scalar.loss;
  r.margin = scalar.margin;
  r.grad = zeros_like(model.params);
  ar_logprob_backward(model, x, y_w, scalar.grad[0][0], r.grad);
  ar_logprob_backward(model, x, y_l, scalar.grad[0][1], r.grad);
  return r;
}

namespace {

std::vector<Frame> displacement(const std::vector<Frame>& y1, const std::vector<Frame>& y0) {
  std::vector<Frame> u(y1.size());
  for (std::size_t j = 0; j < y1.size(); ++j)
    for (std::size_t o = 0; o < kFrameDim; ++o) u[j][o] = y1[j][o] - y0[j][o];
  return u;
}

/// ||v - u||^2 - ||v_ref - u||^2 evaluated as sum (v - v_ref)(v + v_ref - 2u), which keeps
/// full relative precision when v and v_ref nearly coincide.
double sq_error_gap(const std::vector<Frame>& v, const std::vector<Frame>& v_ref, const std::vector<Frame>& u) {
  double s = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j)
    for (std::size_t o = 0; o < kFrameDim; ++o) s += (v[j][o] - v_ref[j][o]) * (v[j][o] + v_ref[j][o] - 2.0 * u[j][o]);
  return s;
}

}  // namespace

LossReport otfm_loss(const ToyFMModel& model, const ToyPrompt& x, const std::vector<Frame>& y1,
                     const std::vector<Frame>& y0, double t) {
  require(y1.size() == y0.size() && !y1.empty(), "otfm_loss: y0 and y1 must share a non-empty shape");
  require(t >= 0.0 && t <= 1.0, "otfm_loss: t must lie in [0, 1]");
  LossReport r;
  r.grad = zeros_like(model.params);
  r.loss = fm_sqerr_backward(model, interpolate(y0, y1, t), t, x, displacement(y1, y0), 1.0, r.grad);
  return r;
}

double fm_log_ratio(const ToyFMModel& model, const ToyFMModel& ref, const std::vector<Frame>& y1,
                    const std::vector<Frame>& y0, double t, const ToyPrompt& x) {
  require(y1.size() == y0.size() && !y1.empty(), "fm_log_ratio: y0 and y1 must share a non-empty shape");
  const auto y_t = interpolate(y0, y1, t);
  const auto u = displacement(y1, y0);
  return -sq_error_gap(fm_velocity(model, y_t, t, x), fm_velocity(ref, y_t, t, x), u);
}

FmPairDraw draw_fm_pair(std::size_t frames_w, std::size_t frames_l, RngStream& rng) {
  FmPairDraw d;
  d.t = rng.uniform();
  d.y0_w.resize(frames_w);
  d.y0_l.resize(frames_l);
  for (auto* ys : {&d.y0_w, &d.y0_l})
    for (auto& f : *ys)
      for (double& v : f) v = rng.normal();
  return d;
}

LossReport dpo_fm_loss(const ToyFMModel& model, const ToyFMModel& ref, const ToyPrompt& x,
                       const std::vector<Frame>& y1_w, const std::vector<Frame>& y1_l, double beta,
                       const FmPairDraw& draw) {
  check_beta(beta);
  require(draw.y0_w.size() == y1_w.size() && draw.y0_l.size() == y1_l.size(),
          "dpo_fm_loss: noise draws must match sample shapes");
  const double t = draw.t;
  const auto yt_w = interpolate(draw.y0_w, y1_w, t);
  const auto yt_l = interpolate(draw.y0_l, y1_l, t);
  const auto u_w = displacement(y1_w, draw.y0_w);
  const auto u_l = displacement(y1_l, draw.y0_l);

  ParamSet g_w = zeros_like(model.params);
  ParamSet g_l = zeros_like(model.params);
  fm_sqerr_backward(model, yt_w, t, x, u_w, 1.0, g_w);
  fm_sqerr_backward(model, yt_l, t, x, u_l, 1.0, g_l);
  const double delta_w = sq_error_gap(fm_velocity(model, yt_w, t, x), fm_velocity(ref, yt_w, t, x), u_w);
  const double delta_l = sq_error_gap(fm_velocity(model, yt_l, t, x), fm_velocity(ref, yt_l, t, x), u_l);

  auto r = logistic(-beta * (delta_w - delta_l));
  // dL/dtheta = -sigma(-m) * dm/dtheta, dm/dtheta = -beta (g_w - g_l)
  const double c = beta * sigmoid(-r.margin);
  r.grad = zeros_like(model.params);
  add_scaled(r.grad, g_w, c);
  add_scaled(r.grad, g_l, -c);
  return r;
}

double dpo_fm_margin_via_log_ratio(const ToyFMModel& model, const ToyFMModel& ref, const ToyPrompt& x,
                                   const std::vector<Frame>& y1_w, const std::vector<Frame>& y1_l, double beta,
                                   const FmPairDraw& draw) {
  check_beta(beta);
  const double ratio_w = fm_log_ratio(model, ref, y1_w, draw.y0_w, draw.t, x);
  const double ratio_l = fm_log_ratio(model, ref, y1_l, draw.y0_l, draw.t, x);
  return beta * (ratio_w - ratio_l);
}

LossReport mgm_masked_ce(const ToyMGMModel& model, const ToyPrompt& x, const std::vector<int>& y,
                         const std::vector<int>& mask) {
  require(mask.size() == y.size(), "mgm_masked_ce: mask length must equal sequence length");
  require(std::any_of(mask.begin(), mask.end(), [](int m) { return m != 0; }),
          "mgm_masked_ce: at least one position must be masked");
  LossReport r;
  r.grad = zeros_like(model.params);
  r.loss = -mgm_logprob_backward(model, x, y, mask, -1.0, &r.grad);
  return r;
}

std::vector<int> draw_mask(std::size_t n, double fraction, RngStream& rng) {
  require(n > 0, "draw_mask: empty sequence");
  require(fraction > 0.0 && fraction <= 1.0, "draw_mask: fraction must lie in (0, 1]");
  std::vector<int> mask(n);
  while (true) {
    bool any = false;
    for (auto& m : mask) {
      m = rng.bernoulli(fraction) ? 1 : 0;
      any |= m != 0;
    }
    if (any) return mask;
  }
}

std::vector<int> draw_mask(std::size_t n, RngStream& rng) {
  double t = rng.uniform();
  while (t <= 0.0) t = rng.uniform();
  return draw_mask(n, t, rng);
}

LossReport dpo_mgm_loss(const ToyMGMModel& model, const ToyMGMModel& ref, const ToyPrompt& x,
                        const std::vector<int>& y_w, const std::vector<int>& mask_w, const std::vector<int>& y_l,
                        const std::vector<int>& mask_l, double beta) {
  check_beta(beta);
  const double ref_w = mgm_logprob_backward(ref, x, y_w, mask_w, 0.0, nullptr);
  const double ref_l = mgm_logprob_backward(ref, x, y_l, mask_l, 0.0, nullptr);
  const double pol_w = mgm_logprob_backward(model, x, y_w, mask_w, 0.0, nullptr);
  const double pol_l = mgm_logprob_backward(model, x, y_l, mask_l, 0.0, nullptr);
  auto r = logistic(beta * ((pol_w - ref_w) - (pol_l - ref_l)));
  const double g = -beta * sigmoid(-r.margin);
  r.grad = zeros_like(model.params);
  mgm_logprob_backward(model, x, y_w, mask_w, g, &r.grad);
  mgm_logprob_backward(model, x, y_l, mask_l, -g, &r.grad);
  return r;
}

LossReport dpo_mgm_loss(const ToyMGMModel& model, const ToyMGMModel& ref, const ToyPrompt& x,
                        const std::vector<int>& y_w, const std::vector<int>& y_l, double beta, double mask_fraction,
                        RngStream& rng) {
  auto draw = [&](std::size_t n) { return mask_fraction > 0.0 ? draw_mask(n, mask_fraction, rng) : draw_mask(n, rng); };
  const auto mask_w = draw(y_w.size());
  const auto mask_l = y_l.size() == y_w.size() ? mask_w : draw(y_l.size());
  return dpo_mgm_loss(model, ref, x, y_w, mask_w, y_l, mask_l, beta);
}

double implicit_reward(const ToyARModel& model, const ToyARModel& ref, const ToyPrompt& x, const SpeechSample& y,
                       double beta) {
  check_beta(beta);
  return beta * (ar_logprob(model, x, y).total - ar_logprob(ref, x, y).total);
}

double implicit_reward(std::span<const double> policy, std::span<const double> ref, std::size_t outcome,
                       double beta) {
  check_beta(beta);
  require(policy.size() == ref.size() && outcome < policy.size(), "implicit_reward: bad outcome space");
  require(policy[outcome] > 0.0 && ref[outcome] > 0.0, "implicit_reward: zero probability");
  return beta * (std::log(policy[outcome]) - std::log(ref[outcome]));
}

std::vector<double> closed_form_policy(std::span<const double> ref, std::span<const double> reward, double beta) {
  check_beta(beta);
  require(!ref.empty() && ref.size() == reward.size(), "closed_form_policy: size mismatch");
  std::vector<double> logits(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    require(ref[i] > 0.0, "closed_form_policy: reference must be strictly positive");
    logits[i] = std::log(ref[i]) + reward[i] / beta;
  }
  return softmax(logits);
}

}  // namespace prefalign
