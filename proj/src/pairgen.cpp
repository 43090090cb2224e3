#include "prefalign/pairgen.hpp"

#include <algorithm>
#include <iostream>

namespace prefalign {

std::vector<double> default_schedule(Paradigm p) {
  const auto& s = p == Paradigm::FM ? kDefaultDurationScales : kDefaultTemperatures;
  return {s.begin(), s.end()};
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Intra: return "intra";
    case Provenance::Inter: return "inter";
    case Provenance::Perturbed: return "perturbed";
  }
  return "?";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "intra") return Provenance::Intra;
  if (s == "inter") return Provenance::Inter;
  if (s == "perturbed") return Provenance::Perturbed;
  throw ContractViolation("unknown provenance: " + std::string(s));
}

std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double wer(const std::vector<int>& reference, const std::vector<int>& hypothesis) {
  require(!reference.empty(), "wer: reference must be non-empty");
  return 100.0 * static_cast<double>(edit_distance(reference, hypothesis)) / static_cast<double>(reference.size());
}

std::optional<std::pair<std::size_t, std::size_t>> select_intra(const std::vector<double>& wers, double gap) {
  if (wers.empty()) return std::nullopt;
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 1; i < wers.size(); ++i) {
    if (wers[i] < wers[lo]) lo = i;
    if (wers[i] > wers[hi]) hi = i;
  }
  if (wers[hi] - wers[lo] < gap) return std::nullopt;
  return std::pair{lo, hi};
}

namespace {

PromptSamples sample_prompt(const GenerativeModel& model, const ToyPrompt& x, std::size_t prompt_id,
                            const std::vector<double>& schedule, const ChannelSpec& channel,
                            const PairGenOptions& opts) {
  PromptSamples ps;
  ps.prompt_id = prompt_id;
  try {
    RngStream rng(opts.seed, prompt_id);
    const auto ref = words_only(x.text, channel.domain);
    std::vector<double> wers;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
      ScoredSample s;
      s.sample = generate(model, x, schedule[k], opts.sampler, rng);
      s.wer = wer(ref, transcribe(s.sample, x.speaker, channel, rng));
      s.schedule_index = k;
      wers.push_back(s.wer);
      ps.samples.push_back(std::move(s));
    }
    auto sel = select_intra(wers, -1.0);
    ps.best = sel->first;
    ps.worst = sel->second;
  } catch (const std::exception& e) {
    ps.failed = true;
    ps.error = e.what();
    ps.samples.clear();
  }
  return ps;
}

void finish_intra(IntraResult& out, const std::vector<ToyPrompt>& prompts, double gap) {
  for (const auto& ps : out.per_prompt) {
    if (ps.failed) {
      ++out.skipped;
      std::cerr << "build_intra_pairs: skipping prompt " << ps.prompt_id << ": " << ps.error << '\n';
      continue;
    }
    const auto& w = ps.samples[ps.best];
    const auto& l = ps.samples[ps.worst];
    if (l.wer - w.wer < gap) continue;
    PreferencePair p;
    p.prompt = prompts[ps.prompt_id];
    p.winner = w.sample;
    p.loser = l.sample;
    p.wer_w = w.wer;
    p.wer_l = l.wer;
    p.provenance = Provenance::Intra;
    p.source_models = {out.model_id};
    out.pairs.push_back(std::move(p));
  }
}

void check_schedule(const std::vector<double>& schedule) {
  require(schedule.size() == kSamplingsPerPrompt, "build_intra_pairs: schedule must have 5 entries");
}

}  // namespace

IntraResult build_intra_pairs_serial(const GenerativeModel& model, const std::string& model_id,
                                     const std::vector<ToyPrompt>& prompts, const std::vector<double>& schedule,
                                     const ChannelSpec& channel, const PairGenOptions& opts) {
  check_schedule(schedule);
  IntraResult out;
  out.model_id = model_id;
  for (std::size_t p = 0; p < prompts.size(); ++p)
    out.per_prompt.push_back(sample_prompt(model, prompts[p], p, schedule, channel, opts));
  finish_intra(out, prompts, opts.gap_threshold);
  return out;
}

IntraResult build_intra_pairs(const GenerativeModel& model, const std::string& model_id,
                              const std::vector<ToyPrompt>& prompts, const std::vector<double>& schedule,
                              const ChannelSpec& channel, const PairGenOptions& opts) {
  check_schedule(schedule);
  IntraResult out;
  out.model_id = model_id;
  out.per_prompt.resize(prompts.size());
  const auto n = static_cast<std::int64_t>(prompts.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t p = 0; p < n; ++p) {
    const auto i = static_cast<std::size_t>(p);
    out.per_prompt[i] = sample_prompt(model, prompts[i], i, schedule, channel, opts);
  }
  finish_intra(out, prompts, opts.gap_threshold);
  return out;
}

InterResult build_inter_pairs(const IntraResult& a, const IntraResult& b, const std::vector<ToyPrompt>& prompts,
                              double gap_threshold) {
  require(a.model_id != b.model_id, "build_inter_pairs: the two inputs must come from distinct models");
  InterResult out;
  std::map<std::size_t, const PromptSamples*> by_prompt_b;
  for (const auto& ps : b.per_prompt)
    if (!ps.failed) by_prompt_b[ps.prompt_id] = &ps;

  for (const auto& pa : a.per_prompt) {
    if (pa.failed) continue;
    auto it = by_prompt_b.find(pa.prompt_id);
    if (it == by_prompt_b.end()) continue;
    require(pa.prompt_id < prompts.size(), "build_inter_pairs: prompt id outside prompt list");
    const auto& pb = *it->second;
    ++out.shared_prompts;

    const ScoredSample& wa = pa.samples[pa.best];
    const ScoredSample& la = pa.samples[pa.worst];
    const ScoredSample& wb = pb.samples[pb.best];
    const ScoredSample& lb = pb.samples[pb.worst];
    const std::array<std::pair<const ScoredSample*, const ScoredSample*>, 3> comparisons = {
        std::pair{&wa, &wb}, std::pair{&wa, &lb}, std::pair{&la, &wb}};
    for (const auto& [sa, sb] : comparisons) {
      ++out.comparisons;
      if (std::abs(sa->wer - sb->wer) < gap_threshold) continue;
      const bool a_better = sa->wer < sb->wer;
      (a_better ? out.a_wins : out.b_wins) += 1;
      PreferencePair p;
      p.prompt = prompts[pa.prompt_id];
      p.winner = a_better ? sa->sample : sb->sample;
      p.loser = a_better ? sb->sample : sa->sample;
      p.wer_w = a_better ? sa->wer : sb->wer;
      p.wer_l = a_better ? sb->wer : sa->wer;
      p.provenance = Provenance::Inter;
      p.source_models = a_better ? std::vector{a.model_id, b.model_id} : std::vector{b.model_id, a.model_id};
      out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

ConfusionTable ConfusionTable::make_default(const Domain& d) {
  ConfusionTable t;
  const int half = d.v_text / 2;
  for (int w = 0; w < d.v_text; ++w) {
    const int base = d.is_l1(w) ? 0 : half;
    const int local = w - base;
    std::vector<int> alts;
    for (int delta : {1, 2}) {
      const int cand = base + (local ^ delta);
      if (cand != w && cand >= base && cand < base + half) alts.push_back(cand);
    }
    if (!alts.empty()) t.alternatives[w] = std::move(alts);
  }
  return t;
}

double ConfusionTable::coverage(const Domain& d) const {
  return static_cast<double>(alternatives.size()) / static_cast<double>(d.v_text);
}

void ConfusionTable::validate(const Domain& d) const {
  for (const auto& [w, alts] : alternatives) {
    require(d.is_word(w), "ConfusionTable: key outside vocabulary");
    require(!alts.empty(), "ConfusionTable: empty alternative list");
    for (int a : alts) {
      require(a != w, "ConfusionTable: word maps to itself");
      require(d.is_word(a), "ConfusionTable: target outside vocabulary");
    }
  }
}

std::vector<int> perturb_pronunciation(const std::vector<int>& text, const ConfusionTable& table, double rate,
                                       const Domain& d, RngStream& rng) {
  require(rate > 0.0 && rate <= 1.0, "perturb_pronunciation: rate must lie in (0, 1]");
  require(table.coverage(d) >= 0.5, "perturb_pronunciation: table must cover at least half the vocabulary");
  std::vector<int> out = text;
  for (int& w : out) {
    auto it = table.alternatives.find(w);
    if (it == table.alternatives.end()) continue;
    if (!rng.bernoulli(rate)) continue;
    w = it->second[rng.index(it->second.size())];
  }
  return out;
}

std::vector<int> perturb_punctuation(const std::vector<int>& text, const Domain& d, RngStream& rng) {
  const int b = d.boundary();
  const auto words = words_only(text, d);
  if (words.size() <= 1) {
    auto out = text;
    out.push_back(b);
    return out;
  }
  // One site between each adjacent word pair; a site either holds a boundary or not.
  std::vector<bool> has(words.size() - 1, false);
  {
    std::size_t wi = 0;
    for (int t : text) {
      if (t == b) {
        if (wi > 0 && wi - 1 < has.size()) has[wi - 1] = true;
      } else {
        ++wi;
      }
    }
  }
  std::vector<bool> flipped = has;
  bool edited = false;
  for (std::size_t s = 0; s < has.size(); ++s) {
    if (rng.bernoulli(0.5)) {
      flipped[s] = !flipped[s];
      edited = true;
    }
  }
  if (!edited) {
    const std::size_t s = rng.index(has.size());
    flipped[s] = !flipped[s];
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    out.push_back(words[i]);
    if (i < flipped.size() && flipped[i]) out.push_back(b);
  }
  return out;
}

PerturbedResult build_perturbed_pairs(const GenerativeModel& model, const std::string& model_id,
                                      const std::vector<ToyPrompt>& prompts, const std::vector<TextType>& types,
                                      const Perturber& perturber, double hyper, const ChannelSpec& channel,
                                      const PairGenOptions& opts) {
  require(types.size() == prompts.size(), "build_perturbed_pairs: one text type per prompt");
  const auto n = static_cast<std::int64_t>(prompts.size());
  std::vector<std::optional<PreferencePair>> slots(prompts.size());
  std::vector<char> degenerate(prompts.size(), 0), misaligned(prompts.size(), 0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t p = 0; p < n; ++p) {
    const auto i = static_cast<std::size_t>(p);
    if (types[i] != TextType::Regular) continue;
    const ToyPrompt& clean = prompts[i];
    RngStream rng(opts.seed, i);
    ToyPrompt perturbed = clean;
    perturbed.text = perturber(clean.text, rng);
    if (perturbed.text == clean.text) {
      degenerate[i] = 1;
      continue;
    }
    const auto ref = words_only(clean.text, channel.domain);
    PreferencePair pair;
    pair.prompt = clean;
    pair.winner = generate(model, clean, hyper, opts.sampler, rng);
    pair.loser = generate(model, perturbed, hyper, opts.sampler, rng);
    if (pair.loser.kind == SampleKind::Discrete && pair.loser.length() != clean.text.size()) {
      misaligned[i] = 1;
      continue;
    }
    pair.wer_w = wer(ref, transcribe(pair.winner, clean.speaker, channel, rng));
    pair.wer_l = wer(ref, transcribe(pair.loser, clean.speaker, channel, rng));
    pair.provenance = Provenance::Perturbed;
    pair.source_models = {model_id};
    slots[i] = std::move(pair);
  }
  PerturbedResult out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (types[i] != TextType::Regular) ++out.non_regular_skipped;
    out.degenerate += static_cast<std::size_t>(degenerate[i]);
    out.misaligned += static_cast<std::size_t>(misaligned[i]);
    if (slots[i]) out.pairs.push_back(std::move(*slots[i]));
  }
  return out;
}

ArenaReport arena(const std::vector<GenerativeModel>& models, const std::vector<std::string>& ids,
                  const std::vector<ToyPrompt>& prompts, const ChannelSpec& channel, const PairGenOptions& opts) {
  require(models.size() >= 2, "arena: at least two models required");
  require(ids.size() == models.size(), "arena: one id per model");
  const std::size_t m = models.size();
  std::vector<IntraResult> intra;
  for (std::size_t i = 0; i < m; ++i) {
    PairGenOptions o = opts;
    o.seed = splitmix64(opts.seed + 0x100 * (i + 1));
    intra.push_back(build_intra_pairs(models[i], ids[i], prompts, default_schedule(paradigm_of(models[i])), channel, o));
  }
  ArenaReport r;
  r.models = ids;
  r.cells.assign(m, std::vector<double>(m, 0.0));
  r.comparisons.assign(m, std::vector<std::size_t>(m, 0));
  r.filtered.assign(m, std::vector<std::size_t>(m, 0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto inter = build_inter_pairs(intra[i], intra[j], prompts, opts.gap_threshold);
      const double denom = static_cast<double>(std::max<std::size_t>(inter.comparisons, 1));
      r.cells[i][j] = 100.0 * static_cast<double>(inter.a_wins) / denom;
      r.cells[j][i] = 100.0 * static_cast<double>(inter.b_wins) / denom;
      r.comparisons[i][j] = r.comparisons[j][i] = inter.comparisons;
      r.filtered[i][j] = r.filtered[j][i] = inter.comparisons - inter.a_wins - inter.b_wins;
    }
  }
  r.win_rate.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) r.win_rate[i] += r.cells[i][j];
  return r;
}

}  // namespace prefalign
