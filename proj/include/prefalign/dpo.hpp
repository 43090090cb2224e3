#pragma once

#include <span>
#include <vector>

#include "prefalign/numerics.hpp"
#include "prefalign/rng.hpp"
#include "prefalign/toymodels.hpp"

namespace prefalign {

/// Strength of the KL regularization (beta) for one paradigm.
struct DpoConfig {
  double beta = 0.1;
  Paradigm paradigm = Paradigm::AR;

  static DpoConfig defaults(Paradigm p);
};

inline constexpr double kDefaultBetaAR = 0.1;
inline constexpr double kDefaultBetaFM = 1000.0;
inline constexpr double kDefaultBetaMGM = 10.0;

double default_beta(Paradigm p);

/// Loss value, the logistic margin it was computed from, and gradients.
/// For scalar losses `grad` holds a single rank-1 array of input derivatives;
/// for model losses it mirrors the model's ParamSet.
struct LossReport {
  double loss = 0.0;
  double margin = 0.0;
  ParamSet grad;
};

/// -log sigma(r_w - r_l); grad = {d/dr_w, d/dr_l}.
LossReport bt_reward_loss(double r_w, double r_l);

/// DPO on precomputed sequence log-probabilities.
/// grad = {d/d logp_theta_w, d/d logp_theta_l}.
LossReport dpo_ar_loss(double logp_w, double logp_ref_w, double logp_l, double logp_ref_l, double beta);

/// DPO for the autoregressive model with gradients w.r.t. the policy parameters.
LossReport dpo_ar_pair_loss(const ToyARModel& model, const ToyARModel& ref, const ToyPrompt& x,
                            const SpeechSample& y_w, const SpeechSample& y_l, double beta);

/// ||v(y_t, t, x) - (y1 - y0)||^2 with y_t = (1 - t) y0 + t y1.
LossReport otfm_loss(const ToyFMModel& model, const ToyPrompt& x, const std::vector<Frame>& y1,
                     const std::vector<Frame>& y0, double t);

/// beta * log(p_theta / p_ref) under the Gaussian likelihood induced by OT-FM:
/// -(||v_theta - u||^2 - ||v_ref - u||^2), both fields evaluated at the same y_t.
double fm_log_ratio(const ToyFMModel& model, const ToyFMModel& ref, const std::vector<Frame>& y1,
                    const std::vector<Frame>& y0, double t, const ToyPrompt& x);

/// Noise draws and time shared by one DPO-FM evaluation.
struct FmPairDraw {
  double t = 0.5;
  std::vector<Frame> y0_w;
  std::vector<Frame> y0_l;
};

FmPairDraw draw_fm_pair(std::size_t frames_w, std::size_t frames_l, RngStream& rng);

/// Velocity-space DPO-FM: margin = -beta * (delta_w - delta_l),
/// delta = ||v_theta - u||^2 - ||v_ref - u||^2.
LossReport dpo_fm_loss(const ToyFMModel& model, const ToyFMModel& ref, const ToyPrompt& x,
                       const std::vector<Frame>& y1_w, const std::vector<Frame>& y1_l, double beta,
                       const FmPairDraw& draw);

/// The same margin assembled from fm_log_ratio terms: beta * (ratio_w - ratio_l).
double dpo_fm_margin_via_log_ratio(const ToyFMModel& model, const ToyFMModel& ref, const ToyPrompt& x,
                                   const std::vector<Frame>& y1_w, const std::vector<Frame>& y1_l, double beta,
                                   const FmPairDraw& draw);

/// -sum over masked positions of log p(y_i | y_t, x); margin unused.
LossReport mgm_masked_ce(const ToyMGMModel& model, const ToyPrompt& x, const std::vector<int>& y,
                         const std::vector<int>& mask);

/// Mask schedule gamma(t) = t with t ~ U(0, 1); each position masked independently
/// with probability t, redrawn until at least one position is masked.
std::vector<int> draw_mask(std::size_t n, RngStream& rng);
/// Fixed-probability variant; redrawn until at least one position is masked.
std::vector<int> draw_mask(std::size_t n, double fraction, RngStream& rng);

LossReport dpo_mgm_loss(const ToyMGMModel& model, const ToyMGMModel& ref, const ToyPrompt& x,
                        const std::vector<int>& y_w, const std::vector<int>& mask_w, const std::vector<int>& y_l,
                        const std::vector<int>& mask_l, double beta);

/// Draws the masks (one shared realization when lengths agree) and evaluates dpo_mgm_loss.
/// `mask_fraction` <= 0 selects the gamma(t) schedule.
LossReport dpo_mgm_loss(const ToyMGMModel& model, const ToyMGMModel& ref, const ToyPrompt& x,
                        const std::vector<int>& y_w, const std::vector<int>& y_l, double beta, double mask_fraction,
                        RngStream& rng);

/// beta * log(p_theta(y|x) / p_ref(y|x)); the beta * log Z(x) term cancels in every
/// pairwise difference and is omitted.
double implicit_reward(const ToyARModel& model, const ToyARModel& ref, const ToyPrompt& x, const SpeechSample& y,
                       double beta);
/// The same quantity on an explicit finite outcome space.
double implicit_reward(std::span<const double> policy, std::span<const double> ref, std::size_t outcome,
                       double beta);

/// p*(y) = ref(y) exp(r(y) / beta) / Z.
std::vector<double> closed_form_policy(std::span<const double> ref, std::span<const double> reward, double beta);

}  // namespace prefalign
