#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <map>
#include <vector>

#include "prefalign/domain.hpp"
#include "prefalign/rng.hpp"
#include "prefalign/toymodels.hpp"

namespace oracle {

using prefalign::Domain;
using prefalign::Frame;
using prefalign::RngStream;
using prefalign::SampleKind;
using prefalign::SpeechSample;
using prefalign::ToyPrompt;

inline long double log_sigmoid(long double x) { return -std::log1p(std::exp(-x)); }

/// Every string over {0, ..., symbols - 1} of length at most max_len, in shortlex order,
/// joined by single-symbol insertions, deletions and substitutions.
class StringSpace {
 public:
  StringSpace(int symbols, int max_len) : symbols_(symbols), max_len_(max_len) {
    std::size_t count = 1;
    for (int len = 0; len <= max_len; ++len) {
      offsets_.push_back(strings_.size());
      for (std::size_t v = 0; v < count; ++v) {
        std::vector<int> s(static_cast<std::size_t>(len));
        std::size_t r = v;
        for (int i = len - 1; i >= 0; --i) {
          s[static_cast<std::size_t>(i)] = static_cast<int>(r % static_cast<std::size_t>(symbols));
          r /= static_cast<std::size_t>(symbols);
        }
        strings_.push_back(std::move(s));
      }
      count *= static_cast<std::size_t>(symbols);
    }
    adjacency_.resize(strings_.size());
    for (std::size_t i = 0; i < strings_.size(); ++i) {
      const auto& s = strings_[i];
      for (std::size_t p = 0; p < s.size(); ++p) {
        auto del = s;
        del.erase(del.begin() + static_cast<std::ptrdiff_t>(p));
        adjacency_[i].push_back(index_of(del));
        for (int c = 0; c < symbols; ++c) {
          if (c == s[p]) continue;
          auto sub = s;
          sub[p] = c;
          adjacency_[i].push_back(index_of(sub));
        }
      }
      if (static_cast<int>(s.size()) < max_len) {
        for (std::size_t p = 0; p <= s.size(); ++p) {
          for (int c = 0; c < symbols; ++c) {
            auto ins = s;
            ins.insert(ins.begin() + static_cast<std::ptrdiff_t>(p), c);
            adjacency_[i].push_back(index_of(ins));
          }
        }
      }
    }
  }

  std::size_t size() const { return strings_.size(); }
  const std::vector<int>& at(std::size_t i) const { return strings_[i]; }

  std::size_t index_of(const std::vector<int>& s) const {
    std::size_t v = 0;
    for (int c : s) v = v * static_cast<std::size_t>(symbols_) + static_cast<std::size_t>(c);
    return offsets_[s.size()] + v;
  }

  /// Fewest edits from `source` to every string. An optimal edit script can delete
  /// before it substitutes and substitute before it inserts, so no intermediate string
  /// is longer than the longer endpoint and the length cap loses no shortest path.
  std::vector<int> edit_distances_from(std::size_t source) const {
    std::vector<int> dist(strings_.size(), -1);
    std::deque<std::size_t> queue{source};
    dist[source] = 0;
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto v : adjacency_[u]) {
        if (dist[v] >= 0) continue;
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
    return dist;
  }

  int max_len() const { return max_len_; }

 private:
  int symbols_;
  int max_len_;
  std::vector<std::vector<int>> strings_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// log p(y | x) of an AR model for every y in {0..V-1}^n, indexed by the base-V value of
/// y, computed from the raw parameter tables with explicit normalization per step.
inline std::vector<long double> ar_chain_logprobs(const prefalign::ToyARModel& m, const ToyPrompt& x) {
  const auto& d = m.domain;
  const std::size_t v = static_cast<std::size_t>(d.v_speech), n = x.text.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= v;
  const auto& emit = m.params[prefalign::ToyARModel::kEmit];
  const auto& trans = m.params[prefalign::ToyARModel::kTrans];
  const auto& bias = m.params[prefalign::ToyARModel::kBias];
  auto logit = [&](std::size_t prev, std::size_t i, std::size_t k) -> long double {
    const std::size_t w = static_cast<std::size_t>(x.text[i]);
    const std::size_t s = static_cast<std::size_t>(x.speaker);
    return static_cast<long double>(emit[(w * static_cast<std::size_t>(d.speakers) + s) * v + k]) +
           static_cast<long double>(trans[prev * v + k]) + static_cast<long double>(bias[k]);
  };
  std::vector<long double> out(total);
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<std::size_t> y(n);
    std::size_t r = code;
    for (std::size_t i = n; i-- > 0;) {
      y[i] = r % v;
      r /= v;
    }
    long double lp = 0.0L;
    std::size_t prev = v;
    for (std::size_t i = 0; i < n; ++i) {
      long double z = 0.0L;
      for (std::size_t k = 0; k < v; ++k) z += std::exp(logit(prev, i, k));
      lp += logit(prev, i, y[i]) - std::log(z);
      prev = y[i];
    }
    out[code] = lp;
  }
  return out;
}

/// ref(y) exp(r(y) / beta) / Z with Z summed explicitly in extended precision.
inline std::vector<long double> brute_force_policy(const std::vector<double>& ref, const std::vector<double>& reward,
                                                   double beta) {
  std::vector<long double> w(ref.size());
  long double z = 0.0L;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    w[i] = static_cast<long double>(ref[i]) * std::exp(static_cast<long double>(reward[i]) / beta);
    z += w[i];
  }
  for (auto& v : w) v /= z;
  return w;
}

inline ToyPrompt random_prompt(const Domain& d, RngStream& rng, std::size_t len) {
  ToyPrompt x;
  x.speaker = static_cast<int>(rng.index(static_cast<std::size_t>(d.speakers)));
  x.text_language = prefalign::Language::Mixed;
  x.speech_language = rng.bernoulli(0.5) ? prefalign::Language::L1 : prefalign::Language::L2;
  for (std::size_t i = 0; i < len; ++i) x.text.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(d.v_text))));
  return x;
}

inline SpeechSample random_tokens(const Domain& d, RngStream& rng, std::size_t len) {
  SpeechSample y;
  y.kind = SampleKind::Discrete;
  for (std::size_t i = 0; i < len; ++i) y.tokens.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(d.v_speech))));
  return y;
}

inline std::vector<Frame> random_frames(RngStream& rng, std::size_t len, double scale = 1.0) {
  std::vector<Frame> f(len);
  for (auto& fr : f)
    for (double& v : fr) v = scale * rng.normal();
  return f;
}

inline void randomize(prefalign::ParamSet& params, RngStream& rng, double scale) {
  for (auto& a : params)
    for (double& v : a.values()) v = scale * rng.normal();
}

inline prefalign::ToyARModel random_ar(const Domain& d, RngStream& rng, double scale = 0.5) {
  auto m = prefalign::ToyARModel::uniform(d);
  randomize(m.params, rng, scale);
  return m;
}

inline prefalign::ToyMGMModel random_mgm(const Domain& d, RngStream& rng, double scale = 0.5) {
  auto m = prefalign::ToyMGMModel::uniform(d);
  randomize(m.params, rng, scale);
  return m;
}

inline prefalign::ToyFMModel random_fm(const Domain& d, RngStream& rng, double scale = 0.5) {
  auto m = prefalign::ToyFMModel::init(d, rng, scale);
  randomize(m.params, rng, scale);
  return m;
}

/// A small domain where exhaustive enumeration stays cheap.
inline Domain tiny_domain() {
  Domain d;
  d.v_text = 2;
  d.v_speech = 4;
  d.speakers = 2;
  d.hidden = 5;
  d.embed = 2;
  return d;
}

}  // namespace oracle
