#include "prefalign/evaluation.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

namespace prefalign {

namespace {

double cosine(const Frame& a, const Frame& b) {
  const double na = std::hypot(a[0], a[1]);
  const double nb = std::hypot(b[0], b[1]);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return (a[0] * b[0] + a[1] * b[1]) / (na * nb);
}

}  // namespace

double sample_sim(const SpeechSample& y, const std::vector<int>& text, int speaker, const ChannelSpec& channel) {
  require(!text.empty(), "sample_sim: empty text");
  const std::size_t n = y.length();
  if (n == 0) return 0.0;
  Frame acc{0.0, 0.0};
  std::size_t votes = 0;
  if (y.kind == SampleKind::Continuous) {
    for (const auto& f : y.frames) {
      const auto g = channel.grid_point(channel.nearest_symbol(f));
      acc[0] += f[0] - g[0];
      acc[1] += f[1] - g[1];
      ++votes;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const int w = text[aligned_index(i, n, text.size())];
      for (int s = 0; s < channel.domain.speakers; ++s) {
        if (channel.token(w, s) != y.tokens[i]) continue;
        const auto o = channel.offset(s);
        acc[0] += o[0];
        acc[1] += o[1];
        ++votes;
      }
    }
  }
  if (votes == 0) return 0.0;
  return cosine(acc, channel.offset(speaker));
}

double sample_quality(const SpeechSample& y, const std::vector<int>& text, int speaker, const ChannelSpec& channel) {
  require(!text.empty(), "sample_quality: empty text");
  const std::size_t n = y.length();
  if (n == 0) return 0.0;
  double sum = 0.0;
  if (y.kind == SampleKind::Discrete) {
    const double hit = std::log1p(-kQualityTokenEpsilon);
    const double miss = std::log(kQualityTokenEpsilon / (channel.domain.v_speech - 1));
    for (std::size_t i = 0; i < n; ++i)
      sum += channel.token(text[aligned_index(i, n, text.size())], speaker) == y.tokens[i] ? hit : miss;
  } else {
    const double var = kQualityFrameSigma * kQualityFrameSigma;
    const double norm = -std::log(2.0 * std::numbers::pi * var);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = channel.codeword(text[aligned_index(i, n, text.size())], speaker);
      const double d2 = (y.frames[i][0] - c[0]) * (y.frames[i][0] - c[0]) + (y.frames[i][1] - c[1]) * (y.frames[i][1] - c[1]);
      sum += norm - 0.5 * d2 / var;
    }
  }
  return sum / static_cast<double>(n);
}

namespace {

struct PromptScore {
  double wer = 0.0, sim = 0.0, quality = 0.0;
};

PromptScore score_prompt(const GenerativeModel& model, const ToyPrompt& x, std::size_t idx, const ChannelSpec& channel,
                         const EvalOptions& opts) {
  RngStream rng(opts.seed, idx);
  const auto y = generate(model, x, opts.hyper, opts.sampler, rng);
  const auto hyp = transcribe(y, x.speaker, channel, rng);
  return {wer(words_only(x.text, channel.domain), hyp), sample_sim(y, x.text, x.speaker, channel),
          sample_quality(y, x.text, x.speaker, channel)};
}

Metrics reduce(const std::vector<PromptScore>& scores) {
  Metrics m;
  m.n = scores.size();
  for (const auto& s : scores) {
    m.wer += s.wer;
    m.sim += s.sim;
    m.quality_proxy += s.quality;
  }
  const double inv = 1.0 / static_cast<double>(m.n);
  m.wer *= inv;
  m.sim *= inv;
  m.quality_proxy *= inv;
  return m;
}

}  // namespace

Metrics evaluate(const GenerativeModel& model, const EvalSet& set, const ChannelSpec& channel,
                 const EvalOptions& opts) {
  require(!set.prompts.empty(), "evaluate: empty evaluation set");
  std::vector<PromptScore> scores(set.prompts.size());
  const auto n = static_cast<std::int64_t>(scores.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    scores[k] = score_prompt(model, set.prompts[k], k, channel, opts);
  }
  return reduce(scores);
}

Metrics evaluate_serial(const GenerativeModel& model, const EvalSet& set, const ChannelSpec& channel,
                        const EvalOptions& opts) {
  require(!set.prompts.empty(), "evaluate: empty evaluation set");
  std::vector<PromptScore> scores;
  scores.reserve(set.prompts.size());
  for (std::size_t k = 0; k < set.prompts.size(); ++k)
    scores.push_back(score_prompt(model, set.prompts[k], k, channel, opts));
  return reduce(scores);
}

const Metrics& SuiteMetrics::at(Scenario s) const {
  for (const auto& sm : scenarios)
    if (sm.scenario == s) return sm.metrics;
  throw ContractViolation("SuiteMetrics: scenario not evaluated");
}

SuiteMetrics evaluate_suite(const GenerativeModel& model, const std::vector<EvalSet>& suite,
                            const ChannelSpec& channel, const EvalOptions& opts) {
  require(!suite.empty(), "evaluate_suite: empty suite");
  SuiteMetrics out;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    validate_eval_set(suite[i]);
    EvalOptions o = opts;
    o.seed = splitmix64(opts.seed + i);
    out.scenarios.push_back({suite[i].scenario, evaluate(model, suite[i], channel, o)});
    out.average_wer += out.scenarios.back().metrics.wer;
  }
  out.average_wer /= static_cast<double>(suite.size());
  return out;
}

IterateResult iterate_alignment(const GenerativeModel& base, const PromptCorpus& corpus, const IterateOptions& opts) {
  require(opts.rounds >= 1, "iterate_alignment: rounds must be >= 1");
  const auto subset = corpus.subset({TextType::Repeated, TextType::CodeSwitching});
  IterateResult out;
  out.subset_types = subset.types;
  out.models.push_back(base);
  if (!opts.suite.empty()) out.base_metrics = evaluate_suite(base, opts.suite, opts.channel, opts.eval);

  for (std::size_t k = 1; k <= opts.rounds; ++k) {
    const GenerativeModel& prev = out.models.back();
    PairGenOptions pg;
    pg.gap_threshold = opts.config.gap_threshold;
    pg.seed = splitmix64(opts.config.seed + 0x5EED * k);
    pg.sampler = opts.sampler;
    const auto intra = build_intra_pairs(prev, "round" + std::to_string(k - 1), subset.prompts, opts.config.schedule,
                                         opts.channel, pg);
    if (intra.pairs.empty()) {
      out.halted = true;
      out.diagnostic = "round " + std::to_string(k) + " produced zero pairs from " +
                       std::to_string(subset.size()) + " challenging prompts; stopping";
      std::cerr << out.diagnostic << "\n";
      break;
    }
    RunConfig cfg = opts.config;
    cfg.seed = splitmix64(opts.config.seed + k);
    auto trained = train_dpo(prev, prev, intra.pairs, cfg);
    RoundReport rep;
    rep.round = k;
    rep.prompts = subset.size();
    rep.pairs = intra.pairs.size();
    if (!opts.suite.empty()) rep.metrics = evaluate_suite(trained.model, opts.suite, opts.channel, opts.eval);
    out.models.push_back(std::move(trained.model));
    out.rounds.push_back(std::move(rep));
  }
  return out;
}

}  // namespace prefalign
