#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "prefalign/channel.hpp"
#include "prefalign/checkpoint.hpp"
#include "prefalign/dpo.hpp"
#include "prefalign/pairgen.hpp"
#include "prefalign/toymodels.hpp"

using namespace prefalign;

namespace {

ToyPrompt l1_prompt(std::vector<int> text, int speaker) {
  ToyPrompt x;
  x.text = std::move(text);
  x.speaker = speaker;
  return x;
}

std::vector<int> random_words(const Domain& d, RngStream& rng, std::size_t n) {
  std::vector<int> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(d.v_text))));
  return t;
}

}  // namespace

TEST_CASE("render_reference follows the codebook") {
  ChannelSpec ch;
  const auto y = render_reference({3, 7}, 0, ch, SampleKind::Discrete);
  CHECK(y.tokens == std::vector<int>{ch.token(3, 0), ch.token(7, 0)});
  CHECK(y.tokens == std::vector<int>{3, 7});
  CHECK(render_reference({3, 7}, 2, ch, SampleKind::Discrete).tokens == std::vector<int>{(3 + 16) % 64, (7 + 16) % 64});
  CHECK(render_reference({3, 7}, 0, ch, SampleKind::Discrete).tokens !=
        render_reference({3, 7}, 1, ch, SampleKind::Discrete).tokens);
  CHECK(render_reference({3, 7}, 0, ch, SampleKind::Continuous).frames !=
        render_reference({3, 7}, 1, ch, SampleKind::Continuous).frames);
  CHECK_THROWS_AS(render_reference({41}, 0, ch, SampleKind::Discrete), ContractViolation);
  CHECK_THROWS_AS(render_reference({}, 0, ch, SampleKind::Discrete), ContractViolation);
}

TEST_CASE("codebook is injective per speaker and distinct across speakers") {
  ChannelSpec ch;
  const Domain& d = ch.domain;
  for (int s = 0; s < d.speakers; ++s) {
    std::set<int> toks;
    std::set<std::pair<long, long>> points;
    for (int w = 0; w <= d.boundary(); ++w) {
      toks.insert(ch.token(w, s));
      const auto c = ch.codeword(w, s);
      points.insert({std::lround(c[0] * 1e9), std::lround(c[1] * 1e9)});
      CHECK(ch.word_of_token(ch.token(w, s), s) == w);
      CHECK(ch.nearest_symbol(c) == w);
    }
    CHECK(toks.size() == static_cast<std::size_t>(d.text_symbols()));
    CHECK(points.size() == static_cast<std::size_t>(d.text_symbols()));
  }
  for (int w = 0; w < d.v_text; ++w) {
    std::set<int> across;
    for (int s = 0; s < d.speakers; ++s) across.insert(ch.token(w, s));
    CHECK(across.size() == static_cast<std::size_t>(d.speakers));
  }
}

TEST_CASE("channel round trip at zero noise") {
  ChannelSpec ch;
  RngStream rng(1, 0);
  for (int i = 0; i < 500; ++i) {
    const auto text = random_words(ch.domain, rng, 1 + rng.index(12));
    const int s = static_cast<int>(rng.index(8));
    for (auto kind : {SampleKind::Discrete, SampleKind::Continuous})
      CHECK(transcribe(render_reference(text, s, ch, kind), s, ch, rng) == text);
  }
  // Boundaries are rendered but never transcribed.
  const std::vector<int> with_boundary{1, 40, 2};
  CHECK(transcribe(render_reference(with_boundary, 3, ch, SampleKind::Discrete), 3, ch, rng) ==
        std::vector<int>{1, 2});
}

TEST_CASE("transcribe noise rates") {
  ChannelSpec clean;
  RngStream rng(2, 0);
  std::vector<int> text;
  for (int i = 0; i < 10000; ++i) text.push_back(i % 40);
  const auto y = render_reference(text, 5, clean, SampleKind::Discrete);

  const auto sub = clean.with_noise(0.1, 0.0, 0.0);
  CHECK(std::abs(wer(text, transcribe(y, 5, sub, rng)) - 10.0) < 1.0);

  const auto del = clean.with_noise(0.0, 1.0, 0.0);
  const auto hyp = transcribe(render_reference({1, 2, 3}, 0, del, SampleKind::Continuous), 0, del, rng);
  CHECK(hyp.empty());
  CHECK(wer({1, 2, 3}, hyp) == 100.0);

  CHECK_THROWS_AS(clean.with_noise(0.6, 0.5, 0.0), ContractViolation);
  CHECK_THROWS_AS(clean.with_noise(-0.1, 0.0, 0.0), ContractViolation);
}

TEST_CASE("ar_logprob of a uniform model") {
  const auto m = ToyARModel::uniform(Domain{});
  const auto x = l1_prompt({1, 2, 3}, 0);
  SpeechSample y;
  y.tokens = {5, 9, 63};
  const auto lp = ar_logprob(m, x, y);
  CHECK(lp.total == doctest::Approx(-3.0 * std::log(64.0)).epsilon(1e-14));
  CHECK(lp.per_token.size() == 3);
  y.tokens.pop_back();
  CHECK_THROWS_AS(ar_logprob(m, x, y), ContractViolation);
  y.kind = SampleKind::Continuous;
  CHECK_THROWS_AS(ar_logprob(m, x, y), ContractViolation);
}

TEST_CASE("ar_logprob matches exhaustive enumeration of the chain") {
  const Domain d = oracle::tiny_domain();
  RngStream rng(3, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = oracle::random_ar(d, rng, 1.0);
    const auto x = oracle::random_prompt(d, rng, 3);
    const auto brute = oracle::ar_chain_logprobs(m, x);
    REQUIRE(brute.size() == 64);
    long double mass = 0.0L;
    std::size_t mode = 0;
    for (std::size_t code = 0; code < brute.size(); ++code) {
      SpeechSample y;
      y.tokens = {static_cast<int>(code / 16), static_cast<int>(code / 4 % 4), static_cast<int>(code % 4)};
      const auto lp = ar_logprob(m, x, y);
      CHECK(std::abs(lp.total - static_cast<double>(brute[code])) < 1e-12);
      double prod = 1.0;
      for (double t : lp.per_token) prod *= std::exp(t);
      CHECK(std::abs(std::exp(lp.total) - prod) < 1e-12);
      CHECK(lp.total <= 0.0);
      mass += std::exp(brute[code]);
      if (brute[code] > brute[mode]) mode = code;
    }
    CHECK(std::abs(static_cast<double>(mass) - 1.0) < 1e-12);
    for (std::size_t code = 0; code < brute.size(); ++code) CHECK(brute[mode] >= brute[code]);
  }
}

TEST_CASE("greedy decoding takes the per-step argmax") {
  const Domain d = oracle::tiny_domain();
  RngStream rng(4, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_ar(d, rng, 1.0);
    const auto x = oracle::random_prompt(d, rng, 4);
    RngStream r1(9, static_cast<std::uint64_t>(trial)), r2(10, static_cast<std::uint64_t>(trial));
    const auto greedy = ar_sample(m, x, ArSampling{1e-7, 20, 1.0}, r1);
    CHECK(greedy == ar_sample(m, x, ArSampling{1e-7, 20, 1.0}, r2));
    for (double temp : {0.4, 1.0, 5.0}) {
      RngStream r3(static_cast<std::uint64_t>(trial), 1);
      CHECK(ar_sample(m, x, ArSampling{temp, 1, 1.0}, r3).tokens == greedy.tokens);
    }
    // At every step the chosen token scores at least as high as any alternative.
    const auto lp = ar_logprob(m, x, greedy);
    for (std::size_t i = 0; i < greedy.tokens.size(); ++i) {
      for (int alt = 0; alt < d.v_speech; ++alt) {
        auto y = greedy;
        y.tokens[i] = alt;
        CHECK(lp.per_token[i] >= ar_logprob(m, x, y).per_token[i]);
      }
    }
  }
}

TEST_CASE("ar_sample stays inside the truncated support") {
  const Domain d;
  RngStream rng(5, 0);
  const auto m = oracle::random_ar(d, rng, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = oracle::random_prompt(d, rng, 1 + rng.index(12));
    const ArSampling s{rng.uniform(0.3, 1.5), 1 + static_cast<int>(rng.index(30)), rng.uniform(0.2, 1.0)};
    const auto y = ar_sample(m, x, s, rng);
    CHECK(y.hyper == s.temperature);
    int prev = d.v_speech;
    for (std::size_t i = 0; i < y.tokens.size(); ++i) {
      const auto dist = truncated_distribution(m.logits(prev, x.text[i], x.speaker), s);
      CHECK(dist[static_cast<std::size_t>(y.tokens[i])] > 0.0);
      CHECK(std::count_if(dist.begin(), dist.end(), [](double p) { return p > 0.0; }) <= s.top_k);
      prev = y.tokens[i];
    }
  }
  RngStream r(1, 1);
  CHECK_THROWS_AS(ar_sample(m, l1_prompt({1}, 0), ArSampling{1.0, 0, 1.0}, r), ContractViolation);
}

TEST_CASE("truncated_distribution top-p keeps the smallest sufficient prefix") {
  const std::vector<double> logits{std::log(0.5), std::log(0.3), std::log(0.2)};
  const auto p = truncated_distribution(logits, ArSampling{1.0, 20, 0.7});
  CHECK(p[0] == doctest::Approx(0.5 / 0.8));
  CHECK(p[1] == doctest::Approx(0.3 / 0.8));
  CHECK(p[2] == 0.0);
  const auto q = truncated_distribution(logits, ArSampling{1.0, 2, 1.0});
  CHECK(q[2] == 0.0);
  double s = 0.0;
  for (double v : truncated_distribution(logits, ArSampling{0.7, 20, 1.0})) s += v;
  CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("default sampling schedules") {
  CHECK(kSamplingsPerPrompt == 5);
  CHECK(default_schedule(Paradigm::AR) == std::vector<double>{0.4, 0.6, 0.8, 1.0, 1.2});
  CHECK(default_schedule(Paradigm::MGM) == std::vector<double>{0.4, 0.6, 0.8, 1.0, 1.2});
  CHECK(default_schedule(Paradigm::FM) == std::vector<double>{0.8, 0.9, 1.0, 1.1, 1.2});
}

TEST_CASE("fm_velocity of a fresh model is zero and keeps the frame shape") {
  const Domain d;
  RngStream rng(6, 0);
  const auto m = ToyFMModel::init(d, rng);
  for (std::size_t n = 1; n <= 8; ++n) {
    const auto x = oracle::random_prompt(d, rng, 1 + rng.index(6));
    const auto y = oracle::random_frames(rng, n);
    const auto v = fm_velocity(m, y, rng.uniform(), x);
    REQUIRE(v.size() == n);
    for (const auto& f : v) CHECK((f[0] == 0.0 && f[1] == 0.0));
    const auto r = oracle::random_fm(d, rng);
    const auto w = fm_velocity(r, y, 0.3, x);
    CHECK(w.size() == n);
    for (const auto& f : w) CHECK((std::isfinite(f[0]) && std::isfinite(f[1])));
  }
}

TEST_CASE("fm squared-error gradient matches finite differences") {
  Domain d;
  d.hidden = 6;
  d.embed = 2;
  RngStream rng(7, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_fm(d, rng);
    const auto x = oracle::random_prompt(d, rng, 1 + rng.index(4));
    const auto y = oracle::random_frames(rng, 1 + rng.index(5));
    const auto target = oracle::random_frames(rng, y.size());
    const double t = rng.uniform();
    auto g = zeros_like(m.params);
    fm_sqerr_backward(m, y, t, x, target, 1.0, g);
    auto f = [&](const ParamSet& p) {
      auto mm = m;
      mm.params = p;
      ParamSet scratch = zeros_like(p);
      return fm_sqerr_backward(mm, y, t, x, target, 1.0, scratch);
    };
    CHECK(max_relative_error(g, finite_diff_grad(f, m.params), 1e-6) < 1e-4);
  }
}

TEST_CASE("fm_sample frame count and zero-field identity") {
  const Domain d;
  RngStream rng(8, 0);
  const auto m = ToyFMModel::init(d, rng);
  const auto x = l1_prompt({1, 2, 3, 4, 5}, 2);
  for (double scale : {0.05, 0.8, 0.9, 1.0, 1.1, 1.2, 2.0}) {
    RngStream a(1, 2), b(1, 2);
    const auto y = fm_sample(m, x, scale, kDefaultFmSteps, a);
    const auto expected = std::max<long>(1, std::lround(scale * 5.0));
    CHECK(y.frames.size() == static_cast<std::size_t>(expected));
    CHECK(y.hyper == scale);
    CHECK(y.kind == SampleKind::Continuous);
    for (const auto& f : y.frames) {
      CHECK(f[0] == b.normal());
      CHECK(f[1] == b.normal());
    }
  }
  RngStream r(1, 1);
  CHECK_THROWS_AS(fm_sample(m, x, 1.0, 0, r), ContractViolation);
}

TEST_CASE("a field fitted to one transport path carries its noise to the target") {
  Domain d;
  d.hidden = 16;
  RngStream rng(9, 0);
  auto m = ToyFMModel::init(d, rng, 0.5);
  const auto x = l1_prompt({4, 9}, 1);
  const ChannelSpec ch{d};
  const auto y1 = render_reference(x.text, x.speaker, ch, SampleKind::Continuous).frames;
  const auto y0 = oracle::random_frames(rng, y1.size());
  auto st = OptimizerState::for_params(m.params);

  auto grid_loss = [&]() {
    double s = 0.0;
    for (int k = 0; k <= 32; ++k) s += otfm_loss(m, x, y1, y0, k / 32.0).loss;
    return s / 33.0;
  };
  int steps = 0;
  while (grid_loss() >= 1e-4 && steps < 20000) {
    auto g = zeros_like(m.params);
    for (int k = 0; k < 8; ++k) add_scaled(g, otfm_loss(m, x, y1, y0, rng.uniform()).grad, 1.0 / 8.0);
    adamw_step(m.params, g, st, steps < 4000 ? 3e-3 : 1e-3);
    ++steps;
  }
  REQUIRE(grid_loss() < 1e-4);
  const auto out = fm_integrate(m, x, y0, kDefaultFmSteps);
  double err = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j)
    for (std::size_t o = 0; o < 2; ++o) err += (out[j][o] - y1[j][o]) * (out[j][o] - y1[j][o]);
  CHECK(std::sqrt(err) < 0.1);
}

TEST_CASE("interpolation endpoints are exact") {
  RngStream rng(10, 0);
  for (int i = 0; i < 50; ++i) {
    const auto y0 = oracle::random_frames(rng, 1 + rng.index(9));
    const auto y1 = oracle::random_frames(rng, y0.size());
    CHECK(interpolate(y0, y1, 0.0) == y0);
    CHECK(interpolate(y0, y1, 1.0) == y1);
  }
}

TEST_CASE("mgm_predict distributions") {
  const Domain d;
  RngStream rng(11, 0);
  const auto u = ToyMGMModel::uniform(d);
  const auto x = oracle::random_prompt(d, rng, 6);
  const std::vector<int> y{1, 64, 3, 64, 5, 64};
  const std::vector<int> mask{0, 1, 0, 1, 0, 1};
  const auto pu = mgm_predict(u, y, mask, x);
  CHECK(pu.positions == std::vector<std::size_t>{1, 3, 5});
  for (const auto& p : pu.probs)
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 64.0).epsilon(1e-14));

  const auto m = oracle::random_mgm(d, rng, 1.0);
  for (const auto& p : mgm_predict(m, y, mask, x).probs) {
    double s = 0.0;
    for (double v : p) s += v;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  CHECK(mgm_predict(m, {1, 2, 3, 4, 5, 6}, std::vector<int>(6, 0), x).positions.empty());
  CHECK_THROWS_AS(mgm_predict(m, y, {1, 0}, x), ContractViolation);
}

TEST_CASE("mgm_predict matches the raw conditional table") {
  const Domain d = oracle::tiny_domain();
  RngStream rng(12, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = oracle::random_mgm(d, rng, 1.0);
    const auto x = oracle::random_prompt(d, rng, 5);
    std::vector<int> y(5), mask(5);
    for (std::size_t i = 0; i < 5; ++i) {
      mask[i] = rng.bernoulli(0.5) ? 1 : 0;
      y[i] = mask[i] ? d.mask_token() : static_cast<int>(rng.index(4));
    }
    mask[rng.index(5)] = 1;
    const auto pred = mgm_predict(m, y, mask, x);
    const auto& emit = m.params[ToyMGMModel::kEmit];
    const auto& proj = m.params[ToyMGMModel::kCtxProj];
    const auto& tok = m.params[ToyMGMModel::kTokEmb];
    const auto& bias = m.params[ToyMGMModel::kBias];
    std::size_t r = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      if (!mask[i]) continue;
      std::vector<long double> logit(4);
      long double z = 0.0L;
      for (std::size_t k = 0; k < 4; ++k) {
        long double v = emit[(static_cast<std::size_t>(x.text[i]) * 2 + static_cast<std::size_t>(x.speaker)) * 4 + k] +
                        bias[k];
        for (std::size_t j = 0; j < 5; ++j) {
          if (mask[j]) continue;
          for (std::size_t c = 0; c < 2; ++c)
            v += static_cast<long double>(proj[k * 2 + c]) * tok[static_cast<std::size_t>(y[j]) * 2 + c];
        }
        logit[k] = v;
        z += std::exp(v);
      }
      REQUIRE(pred.positions[r] == i);
      for (std::size_t k = 0; k < 4; ++k)
        CHECK(std::abs(pred.probs[r][k] - static_cast<double>(std::exp(logit[k]) / z)) < 1e-12);
      ++r;
    }
  }
}

namespace {

struct DecodeTrace {
  std::vector<int> tokens;
  std::vector<std::size_t> unmasked_per_round;
};

/// Replays confidence-ordered unmasking: each round draws every masked position from
/// the tempered prediction and commits the ceil(n / steps) most confident draws.
DecodeTrace replay_mgm(const ToyMGMModel& m, const ToyPrompt& x, const MgmSampling& s, RngStream& rng) {
  const std::size_t n = x.text.size();
  const std::size_t per = (n + static_cast<std::size_t>(s.steps) - 1) / static_cast<std::size_t>(s.steps);
  DecodeTrace tr;
  tr.tokens.assign(n, m.domain.mask_token());
  std::vector<int> mask(n, 1);
  std::size_t left = n;
  while (left > 0) {
    const auto before = tr.tokens;
    const auto pred = mgm_predict(m, tr.tokens, mask, x);
    std::vector<std::pair<double, std::size_t>> conf;
    std::vector<int> draws;
    for (std::size_t i = 0; i < pred.positions.size(); ++i) {
      std::vector<double> lp;
      for (double p : pred.probs[i]) lp.push_back(std::log(std::max(p, 1e-300)));
      const auto dist = truncated_distribution(lp, ArSampling{s.temperature, m.domain.v_speech, 1.0});
      draws.push_back(static_cast<int>(rng.categorical(dist)));
      conf.emplace_back(-*std::max_element(dist.begin(), dist.end()), i);
    }
    std::sort(conf.begin(), conf.end());
    const std::size_t take = std::min(per, left);
    for (std::size_t r = 0; r < take; ++r) {
      const auto i = conf[r].second;
      tr.tokens[pred.positions[i]] = draws[i];
      mask[pred.positions[i]] = 0;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (before[j] != m.domain.mask_token()) REQUIRE(tr.tokens[j] == before[j]);
    tr.unmasked_per_round.push_back(take);
    left -= take;
  }
  return tr;
}

}  // namespace

TEST_CASE("mgm_sample unmasking schedule") {
  const Domain d;
  RngStream rng(13, 0);
  const auto m = oracle::random_mgm(d, rng, 1.0);
  std::size_t cases = 0;
  for (int n = 1; n <= 20; ++n) {
    for (int steps : {1, 2, 3, 5, 8, n, n + 3, 40, 64, 100}) {
      const auto x = oracle::random_prompt(d, rng, static_cast<std::size_t>(n));
      const MgmSampling s{rng.uniform(0.4, 1.2), steps};
      RngStream a(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(steps));
      RngStream b = a;
      const auto y = mgm_sample(m, x, s, a);
      const auto tr = replay_mgm(m, x, s, b);
      CHECK(y.tokens == tr.tokens);
      for (int t : y.tokens) {
        CHECK(t >= 0);
        CHECK(t < d.v_speech);
      }
      if (steps == 1) CHECK(tr.unmasked_per_round == std::vector<std::size_t>{static_cast<std::size_t>(n)});
      if (steps == n) CHECK(tr.unmasked_per_round == std::vector<std::size_t>(static_cast<std::size_t>(n), 1));
      ++cases;
    }
  }
  CHECK(cases == 200);
}

TEST_CASE("checkpoint round trip") {
  const Domain d;
  RngStream rng(14, 0);
  const std::vector<GenerativeModel> models{oracle::random_ar(d, rng), oracle::random_fm(d, rng),
                                            oracle::random_mgm(d, rng)};
  for (const auto& m : models) {
    const auto bytes = encode_checkpoint(m);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PFA1");
    const auto back = decode_checkpoint(bytes);
    CHECK(paradigm_of(back) == paradigm_of(m));
    CHECK(params_of(back) == params_of(m));
    CHECK(domain_of(back) == domain_of(m));
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_checkpoint(truncated), CheckpointError);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), CheckpointError);
  }
}
