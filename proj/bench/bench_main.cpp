#include <benchmark/benchmark.h>

#include "checks.hpp"
#include "prefalign/corpus.hpp"
#include "prefalign/evaluation.hpp"
#include "prefalign/numerics.hpp"

using namespace prefalign;

namespace {

const ChannelSpec& channel() {
  static const ChannelSpec ch = ChannelSpec{Domain{}}.with_noise(0.1, 0.05, 0.05);
  return ch;
}

const std::vector<ToyPrompt>& prompts() {
  static const auto corpus = [] {
    CorpusConfig cc;
    cc.per_type = 40;
    cc.seed = 1;
    return build_prompt_corpus(Domain{}, cc);
  }();
  return corpus.prompts;
}

template <bool Serial>
void BM_IntraPairs(benchmark::State& state) {
  const auto model = checks::codebook_ar(channel(), 4.0);
  const auto sched = default_schedule(Paradigm::AR);
  PairGenOptions o;
  o.seed = 3;
  for (auto _ : state) {
    auto r = Serial ? build_intra_pairs_serial(model, "m", prompts(), sched, channel(), o)
                    : build_intra_pairs(model, "m", prompts(), sched, channel(), o);
    benchmark::DoNotOptimize(r.pairs.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * prompts().size()));
}

template <bool Serial>
void BM_Evaluate(benchmark::State& state) {
  const auto model = checks::codebook_ar(channel(), 4.0);
  const auto set = make_eval_suite(Domain{}, 5)[0];
  EvalOptions eo;
  eo.seed = 2;
  for (auto _ : state) {
    auto m = Serial ? evaluate_serial(model, set, channel(), eo) : evaluate(model, set, channel(), eo);
    benchmark::DoNotOptimize(m.wer);
  }
}

template <bool Serial>
void BM_FiniteDiff(benchmark::State& state) {
  const Domain d = checks::fd_domain();
  RngStream rng(7, 0);
  const auto ref = oracle::random_ar(d, rng, 1.0);
  const auto x = oracle::random_prompt(d, rng, 6);
  const auto yw = oracle::random_tokens(d, rng, 6), yl = oracle::random_tokens(d, rng, 6);
  const Objective f = [&](const ParamSet& p) {
    ToyARModel m = ref;
    m.params = p;
    return dpo_ar_pair_loss(m, ref, x, yw, yl, 0.1).loss;
  };
  for (auto _ : state) {
    auto g = Serial ? finite_diff_grad_serial(f, ref.params) : finite_diff_grad(f, ref.params);
    benchmark::DoNotOptimize(g);
  }
}

}  // namespace

BENCHMARK(BM_IntraPairs<true>)->Name("intra_pairs/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntraPairs<false>)->Name("intra_pairs/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate<true>)->Name("evaluate/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate<false>)->Name("evaluate/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FiniteDiff<true>)->Name("finite_diff/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FiniteDiff<false>)->Name("finite_diff/openmp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
