#include "prefalign/training.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace prefalign {

std::string TrainLog::to_jsonl() const {
  std::string out;
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "{\"step\":%lld,\"pair_id\":%zu,\"loss\":%.9g,\"margin\":%.9g,\"lr\":%.9g}\n",
                  static_cast<long long>(r.step), r.pair_id, r.loss, r.margin, r.lr);
    out += buf;
  }
  return out;
}

std::vector<double> TrainLog::step_losses() const {
  std::vector<double> sum(static_cast<std::size_t>(steps), 0.0);
  std::vector<std::size_t> count(sum.size(), 0);
  for (const auto& r : records) {
    sum[static_cast<std::size_t>(r.step - 1)] += r.loss;
    ++count[static_cast<std::size_t>(r.step - 1)];
  }
  for (std::size_t i = 0; i < sum.size(); ++i)
    if (count[i]) sum[i] /= static_cast<double>(count[i]);
  return sum;
}

LossReport dpo_pair_loss(const GenerativeModel& model, const GenerativeModel& ref, const PreferencePair& pair,
                         double beta, RngStream& rng) {
  require(paradigm_of(model) == paradigm_of(ref), "dpo_pair_loss: model and reference paradigms differ");
  switch (paradigm_of(model)) {
    case Paradigm::AR:
      return dpo_ar_pair_loss(std::get<ToyARModel>(model), std::get<ToyARModel>(ref), pair.prompt, pair.winner,
                              pair.loser, beta);
    case Paradigm::FM: {
      const auto draw = draw_fm_pair(pair.winner.frames.size(), pair.loser.frames.size(), rng);
      return dpo_fm_loss(std::get<ToyFMModel>(model), std::get<ToyFMModel>(ref), pair.prompt, pair.winner.frames,
                         pair.loser.frames, beta, draw);
    }
    case Paradigm::MGM:
      return dpo_mgm_loss(std::get<ToyMGMModel>(model), std::get<ToyMGMModel>(ref), pair.prompt, pair.winner.tokens,
                          pair.loser.tokens, beta, 0.0, rng);
  }
  throw ContractViolation("dpo_pair_loss: unknown paradigm");
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, RngStream rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

void check_config(const GenerativeModel& model, const RunConfig& cfg) {
  cfg.validate();
  require(paradigm_of(model) == cfg.paradigm, "train: config paradigm does not match the model");
}

/// Shared minibatch loop; `loss_of(i, rng)` evaluates item i against the current model.
template <typename LossFn>
TrainLog run_loop(GenerativeModel& model, std::size_t n, const RunConfig& cfg, LossFn&& loss_of) {
  TrainLog log;
  ParamSet& params = params_of(model);
  auto opt = OptimizerState::for_params(params, cfg.weight_decay);
  const RngStream root(cfg.seed, 0x7A41);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled(n, root.derive(2 * static_cast<std::uint64_t>(epoch)));
    const RngStream draws = root.derive(2 * static_cast<std::uint64_t>(epoch) + 1);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const double lr = lr_schedule(log.steps + 1, cfg.warmup, cfg.base_lr);
      ParamSet grad = zeros_like(params);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        RngStream rng = draws.derive(k);
        const auto report = loss_of(order[k], rng);
        add_scaled(grad, report.grad, inv);
        log.records.push_back({log.steps + 1, order[k], report.loss, report.margin, lr});
      }
      adamw_step(params, grad, opt, lr);
      ++log.steps;
    }
  }
  return log;
}

}  // namespace

TrainResult train_dpo(GenerativeModel model, const GenerativeModel& ref, const std::vector<PreferencePair>& data,
                      const RunConfig& cfg) {
  require(!data.empty(), "train_dpo: empty dataset");
  check_config(model, cfg);
  require(paradigm_of(ref) == cfg.paradigm, "train_dpo: reference paradigm does not match the config");
  auto log = run_loop(model, data.size(), cfg, [&](std::size_t i, RngStream& rng) {
    return dpo_pair_loss(model, ref, data[i], cfg.beta, rng);
  });
  return {std::move(model), std::move(log)};
}

double mean_margin(const GenerativeModel& model, const GenerativeModel& ref, const std::vector<PreferencePair>& data,
                   double beta, std::uint64_t seed) {
  require(!data.empty(), "mean_margin: empty dataset");
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    RngStream rng(seed, i);
    sum += dpo_pair_loss(model, ref, data[i], beta, rng).margin;
  }
  return sum / static_cast<double>(data.size());
}

std::vector<Positive> winners_of(const std::vector<PreferencePair>& pairs) {
  std::vector<Positive> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.prompt, p.winner});
  return out;
}

LossReport sft_loss(const GenerativeModel& model, const Positive& p, RngStream& rng) {
  LossReport r;
  switch (paradigm_of(model)) {
    case Paradigm::AR: {
      const auto& m = std::get<ToyARModel>(model);
      r.grad = zeros_like(m.params);
      r.loss = -ar_logprob_backward(m, p.prompt, p.sample, -1.0, r.grad);
      return r;
    }
    case Paradigm::FM: {
      const auto& m = std::get<ToyFMModel>(model);
      const double t = rng.uniform();
      std::vector<Frame> y0(p.sample.frames.size());
      for (auto& f : y0)
        for (double& v : f) v = rng.normal();
      return otfm_loss(m, p.prompt, p.sample.frames, y0, t);
    }
    case Paradigm::MGM: {
      const auto& m = std::get<ToyMGMModel>(model);
      return mgm_masked_ce(m, p.prompt, p.sample.tokens, draw_mask(p.sample.tokens.size(), rng));
    }
  }
  throw ContractViolation("sft_loss: unknown paradigm");
}

TrainResult train_sft(GenerativeModel model, const std::vector<Positive>& positives, const RunConfig& cfg) {
  require(!positives.empty(), "train_sft: no positives");
  check_config(model, cfg);
  auto log = run_loop(model, positives.size(), cfg,
                      [&](std::size_t i, RngStream& rng) { return sft_loss(model, positives[i], rng); });
  return {std::move(model), std::move(log)};
}

double word_noise(int w, double noise, NoiseShape shape, const Domain& d) {
  if (shape == NoiseShape::Uniform || !d.is_word(w)) return noise;
  const int local = w % (d.v_text / 2);
  const double hard_share = 0.25;
  if (local % 4 == 0) return std::min(1.0, kHardWordNoise * noise / 0.2);
  return std::max(0.0, (noise - hard_share * std::min(1.0, kHardWordNoise * noise / 0.2)) / (1.0 - hard_share));
}

SpeechSample render_noisy(const ToyPrompt& x, const ChannelSpec& channel, SampleKind kind, double noise,
                          NoiseShape shape, RngStream& rng) {
  auto s = render_reference(x.text, x.speaker, channel, kind);
  const Domain& d = channel.domain;
  const auto table = shape == NoiseShape::HardWords ? ConfusionTable::make_default(d) : ConfusionTable{};
  for (std::size_t i = 0; i < s.length(); ++i) {
    const int w = x.text[i];
    if (!rng.bernoulli(word_noise(w, noise, shape, d))) continue;
    int wrong = -1;
    if (shape == NoiseShape::HardWords) {
      auto it = table.alternatives.find(w);
      if (it == table.alternatives.end() || it->second.empty()) continue;
      wrong = it->second.front();
    }
    if (kind == SampleKind::Discrete) {
      s.tokens[i] = wrong >= 0 ? channel.token(wrong, x.speaker)
                               : static_cast<int>(rng.index(static_cast<std::size_t>(d.v_speech)));
    } else {
      if (wrong < 0) {
        wrong = static_cast<int>(rng.index(static_cast<std::size_t>(d.v_text - 1)));
        if (wrong >= w) ++wrong;
      }
      s.frames[i] = channel.codeword(wrong, x.speaker);
    }
  }
  return s;
}

GenerativeModel pretrain_base(Paradigm p, const ChannelSpec& channel, const PretrainOptions& opts) {
  require(opts.noise >= 0.0 && opts.noise <= 1.0, "pretrain_base: noise must lie in [0, 1]");
  require(opts.utterances > 0, "pretrain_base: no utterances");
  const Domain& d = channel.domain;
  RngStream init_rng(opts.seed, 0x1417);
  GenerativeModel model = [&]() -> GenerativeModel {
    switch (p) {
      case Paradigm::AR: return ToyARModel::uniform(d);
      case Paradigm::FM: return ToyFMModel::init(d, init_rng);
      case Paradigm::MGM: return ToyMGMModel::init(d, init_rng);
    }
    throw ContractViolation("pretrain_base: unknown paradigm");
  }();
  const SampleKind kind = p == Paradigm::FM ? SampleKind::Continuous : SampleKind::Discrete;

  std::vector<Positive> data(opts.utterances);
  const int half = d.v_text / 2;
  for (std::size_t i = 0; i < data.size(); ++i) {
    RngStream rng(opts.seed ^ 0x9E7A, i);
    ToyPrompt x;
    x.speaker = static_cast<int>(rng.index(static_cast<std::size_t>(d.speakers)));
    x.speech_language = rng.bernoulli(0.5) ? Language::L1 : Language::L2;
    const int mode = static_cast<int>(rng.index(3));
    x.text_language = mode == 0 ? Language::L1 : mode == 1 ? Language::L2 : Language::Mixed;
    const auto len = 3 + rng.index(10);
    for (std::size_t k = 0; k < len; ++k) {
      int w = static_cast<int>(rng.index(static_cast<std::size_t>(half)));
      if (mode == 1 || (mode == 2 && rng.bernoulli(0.5))) w += half;
      x.text.push_back(w);
    }
    data[i] = {x, render_noisy(x, channel, kind, opts.noise, opts.shape, rng)};
  }

  RunConfig cfg = default_run_config(p);
  cfg.base_lr = opts.lr;
  cfg.warmup = opts.warmup;
  cfg.epochs = opts.epochs;
  cfg.batch_size = opts.batch_size;
  cfg.seed = opts.seed;
  return train_sft(std::move(model), data, cfg).model;
}

}  // namespace prefalign
