#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <thread>

#include "checks.hpp"
#include "doctest.h"
#include "experiments.hpp"
#include "httplib.h"
#include "json.hpp"
#include "oracles.hpp"
#include "prefalign/perturber_client.hpp"
#include "prefalign/run_config.hpp"

using namespace prefalign;

namespace {

double grid6(double v) { return std::round(v * 1e6) / 1e6; }

PreferencePair random_pair(const Domain& d, RngStream& rng) {
  PreferencePair p;
  p.prompt = oracle::random_prompt(d, rng, 1 + rng.index(12));
  const bool continuous = rng.bernoulli(0.5);
  for (auto* s : {&p.winner, &p.loser}) {
    if (continuous) {
      s->kind = SampleKind::Continuous;
      s->frames = oracle::random_frames(rng, rng.index(10));
      for (auto& f : s->frames)
        for (double& v : f) v = grid6(v);
    } else {
      *s = oracle::random_tokens(d, rng, rng.index(10));
    }
    s->hyper = grid6(rng.uniform(0.4, 1.2));
  }
  p.wer_w = grid6(rng.uniform(0.0, 100.0));
  p.wer_l = grid6(p.wer_w + rng.uniform(6.0, 100.0));
  const auto k = rng.index(3);
  p.provenance = k == 0 ? Provenance::Intra : k == 1 ? Provenance::Inter : Provenance::Perturbed;
  p.source_models = k == 1 ? std::vector<std::string>{"m\"1", "m2"} : std::vector<std::string>{"m1"};
  return p;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("prefalign_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<PreferencePair> codebook_pairs(std::size_t n, std::uint64_t seed) {
  const Domain d;
  const auto ch = ChannelSpec{d}.with_noise(0.1, 0.0, 0.0);
  RngStream rng(seed, 0);
  std::vector<ToyPrompt> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(oracle::random_prompt(d, rng, 3 + rng.index(6)));
  PairGenOptions opts;
  opts.seed = seed;
  return build_intra_pairs(GenerativeModel{checks::codebook_ar(ch, 3.0)}, "m", xs, default_schedule(Paradigm::AR), ch,
                           opts)
      .pairs;
}

}  // namespace

TEST_CASE("prompt corpus is balanced per text type and combination") {
  const Domain d;
  CorpusConfig cfg;
  cfg.seed = 1;
  const auto c = build_prompt_corpus(d, cfg);
  REQUIRE(c.size() == 5 * kDeskPromptsPerType);
  std::map<TextType, std::size_t> per_type;
  std::map<std::pair<TextType, Combination>, std::size_t> per_combo;
  std::map<std::tuple<TextType, Combination, int>, std::size_t> per_speaker;
  std::map<std::pair<TextType, std::size_t>, std::size_t> per_length;
  for (std::size_t i = 0; i < c.size(); ++i) {
    ++per_type[c.types[i]];
    ++per_combo[{c.types[i], c.combos[i]}];
    ++per_speaker[{c.types[i], c.combos[i], c.prompts[i].speaker}];
    if (c.types[i] == TextType::Regular) ++per_length[{c.types[i], c.prompts[i].text.size()}];
    validate_prompt(c.prompts[i], d);
    CHECK(c.prompts[i].speech_language == speech_language(c.combos[i]));
  }
  for (auto t : kAllTextTypes) CHECK(per_type[t] == kDeskPromptsPerType);
  for (const auto& [k, n] : per_combo) CHECK(n == kDeskPromptsPerType / 4);
  CHECK(per_combo.size() == 20);
  for (const auto& [k, n] : per_speaker) CHECK(n >= 12);
  CHECK(per_speaker.size() == 5 * 4 * 8);
  CHECK(per_length.size() == static_cast<std::size_t>(kMaxTextWords - kMinTextWords + 1));
  CHECK(kPaperPromptsPerType == 12000);
}

TEST_CASE("prompt corpus texts follow their type") {
  const Domain d;
  CorpusConfig cfg;
  cfg.per_type = 200;
  cfg.seed = 2;
  const auto c = build_prompt_corpus(d, cfg);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& p = c.prompts[i];
    const auto words = words_only(p.text, d);
    std::set<bool> halves;
    for (int w : words) halves.insert(d.is_l1(w));
    switch (c.types[i]) {
      case TextType::Regular:
      case TextType::Repeated:
        CHECK(halves.size() == 1);
        CHECK(*halves.begin() == (p.text_language == Language::L1));
        CHECK(words.size() == p.text.size());
        break;
      case TextType::CodeSwitching:
        CHECK(p.text_language == Language::Mixed);
        CHECK(halves.size() == 2);
        break;
      case TextType::PronunciationPerturbed: CHECK(words.size() == p.text.size()); break;
      case TextType::PunctuationPerturbed: CHECK(words.size() < p.text.size() + 1); break;
    }
    if (c.types[i] == TextType::Repeated) CHECK(p.text.size() > static_cast<std::size_t>(kMinTextWords) - 1);
  }
  CHECK(build_prompt_corpus(d, cfg) == c);
  cfg.seed = 3;
  CHECK_FALSE(build_prompt_corpus(d, cfg) == c);
  cfg.per_type = 3;
  CHECK_THROWS_AS(build_prompt_corpus(d, cfg), ContractViolation);
}

TEST_CASE("text variants of a regular text") {
  const Domain d;
  const auto table = ConfusionTable::make_default(d);
  RngStream rng(4, 0);
  for (int k = 0; k < 500; ++k) {
    std::vector<int> regular(2 + rng.index(10));
    const int base = rng.bernoulli(0.5) ? 0 : 20;
    for (int& w : regular) w = base + static_cast<int>(rng.index(20));
    const auto v = make_text_variants(regular, d, table, 0.5, rng);
    CHECK(v.repeated.size() > regular.size());
    CHECK(v.code_switching.size() == regular.size());
    std::size_t switched = 0;
    for (std::size_t i = 0; i < regular.size(); ++i) {
      if (v.code_switching[i] != regular[i]) {
        CHECK(v.code_switching[i] == d.counterpart(regular[i]));
        ++switched;
      }
    }
    CHECK(switched >= 1);
    CHECK(switched < regular.size());
    CHECK(v.pronunciation.size() == regular.size());
    CHECK(words_only(v.punctuation, d) == regular);
    CHECK(v.punctuation != regular);
  }
}

TEST_CASE("evaluation suite sizes and scenario invariants") {
  const Domain d;
  const auto suite = make_eval_suite(d, 1);
  REQUIRE(suite.size() == 4);
  const std::array<std::size_t, 4> sizes{300, 80, 100, 100};
  for (std::size_t s = 0; s < 4; ++s) {
    CHECK(suite[s].scenario == kAllScenarios[s]);
    CHECK(suite[s].prompts.size() == sizes[s]);
    validate_eval_set(suite[s]);
    for (const auto& p : suite[s].prompts) validate_prompt(p, d);
  }
  std::size_t l1 = 0;
  for (const auto& p : suite[0].prompts) l1 += p.text_language == Language::L1 ? 1 : 0;
  CHECK(l1 == 100);
  for (const auto& p : suite[3].prompts) CHECK(p.text_language != p.speech_language);
  CHECK(make_eval_suite(d, 1, 2.0)[0].prompts.size() == 600);
  CHECK(make_eval_suite(d, 1)[2].prompts == suite[2].prompts);

  EvalSet bad;
  bad.scenario = Scenario::CrossLingual;
  bad.prompts = {suite[0].prompts[0]};
  CHECK_THROWS_AS(validate_eval_set(bad), ContractViolation);
}

TEST_CASE("SIM and WER of exact renderings") {
  const Domain d;
  const ChannelSpec ch{d};
  RngStream rng(5, 0);
  for (int k = 0; k < 200; ++k) {
    const auto x = oracle::random_prompt(d, rng, 1 + rng.index(10));
    for (auto kind : {SampleKind::Discrete, SampleKind::Continuous}) {
      const auto y = render_reference(x.text, x.speaker, ch, kind);
      CHECK(sample_sim(y, x.text, x.speaker, ch) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(wer(words_only(x.text, d), transcribe(y, x.speaker, ch, rng)) == 0.0);
      // The offset of speaker s + 2 is a quarter turn away.
      const int other = (x.speaker + 2) % d.speakers;
      const auto z = render_reference(x.text, other, ch, kind);
      CHECK(std::abs(sample_sim(z, x.text, x.speaker, ch)) < 0.05);
      const int opposite = (x.speaker + 4) % d.speakers;
      CHECK(sample_sim(render_reference(x.text, opposite, ch, kind), x.text, x.speaker, ch) ==
            doctest::Approx(-1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("evaluate matches its serial reference and scores a perfect model") {
  const Domain d;
  const ChannelSpec ch{d};
  const auto set = make_eval_suite(d, 6)[0];
  EvalOptions opts;
  opts.seed = 7;
  const GenerativeModel perfect = checks::codebook_ar(ch, 60.0);
  const auto m = evaluate(perfect, set, ch, opts);
  CHECK(m.wer == 0.0);
  CHECK(m.sim == doctest::Approx(1.0));
  CHECK(m.n == set.prompts.size());
  CHECK(m == evaluate_serial(perfect, set, ch, opts));
  const GenerativeModel rough = checks::codebook_ar(ch, 3.0);
  const auto r = evaluate(rough, set, ch, opts);
  CHECK(r == evaluate_serial(rough, set, ch, opts));
  CHECK(r.wer > m.wer);
  CHECK(r.quality_proxy < m.quality_proxy);

  const auto suite = evaluate_suite(rough, make_eval_suite(d, 6, 0.2), ch, opts);
  double mean = 0.0;
  for (const auto& s : suite.scenarios) mean += s.metrics.wer / 4.0;
  CHECK(suite.average_wer == doctest::Approx(mean));
  CHECK(suite.at(Scenario::Regular).n == 60);
}

TEST_CASE("train_dpo preconditions") {
  const Domain d;
  const ChannelSpec ch{d};
  const GenerativeModel m = checks::codebook_ar(ch, 3.0);
  const auto cfg = default_run_config(Paradigm::AR);
  CHECK_THROWS_AS(train_dpo(m, m, {}, cfg), ContractViolation);
  const auto pairs = codebook_pairs(50, 1);
  REQUIRE_FALSE(pairs.empty());
  CHECK_THROWS_AS(train_dpo(m, m, pairs, default_run_config(Paradigm::MGM)), ContractViolation);
  CHECK_THROWS_AS(train_dpo(m, GenerativeModel{ToyMGMModel::uniform(d)}, pairs, cfg), ContractViolation);
  CHECK_THROWS_AS(train_sft(m, {}, cfg), ContractViolation);
}

TEST_CASE("train_dpo raises the margin and leaves the reference untouched") {
  const Domain d;
  const ChannelSpec ch{d};
  const GenerativeModel ref = checks::codebook_ar(ch, 3.0);
  const GenerativeModel ref_copy = ref;
  const auto pairs = codebook_pairs(300, 2);
  RunConfig cfg = default_run_config(Paradigm::AR);
  cfg.base_lr = 0.03;
  cfg.warmup = 10;
  cfg.epochs = 2;
  const auto r = train_dpo(ref, ref, pairs, cfg);
  CHECK(std::get<ToyARModel>(ref).params == std::get<ToyARModel>(ref_copy).params);
  CHECK(mean_margin(ref, ref, pairs, cfg.beta, 3) == doctest::Approx(0.0));
  CHECK(mean_margin(r.model, ref, pairs, cfg.beta, 3) > 0.05);

  const auto steps_per_epoch = static_cast<std::int64_t>((pairs.size() + 31) / 32);
  CHECK(r.log.steps == 2 * steps_per_epoch);
  CHECK(r.log.records.size() == 2 * pairs.size());
  std::vector<std::size_t> seen(pairs.size(), 0);
  for (const auto& rec : r.log.records) {
    ++seen[rec.pair_id];
    CHECK(rec.lr == lr_schedule(rec.step, cfg.warmup, cfg.base_lr));
    CHECK(std::abs(rec.loss + log_sigmoid(rec.margin)) < 1e-12);
  }
  for (auto n : seen) CHECK(n == 2);
  const auto losses = r.log.step_losses();
  CHECK(losses.back() < losses.front());
  CHECK(train_dpo(ref, ref, pairs, cfg).log.records == r.log.records);
}

TEST_CASE("dpo_pair_loss dispatches every paradigm at the reference") {
  const Domain d;
  RngStream rng(8, 0);
  const auto x = oracle::random_prompt(d, rng, 4);
  PreferencePair disc;
  disc.prompt = x;
  disc.winner = oracle::random_tokens(d, rng, 4);
  disc.loser = oracle::random_tokens(d, rng, 4);
  PreferencePair cont = disc;
  cont.winner = SpeechSample{SampleKind::Continuous, {}, oracle::random_frames(rng, 5), 1.0};
  cont.loser = SpeechSample{SampleKind::Continuous, {}, oracle::random_frames(rng, 3), 1.0};
  const GenerativeModel ar = oracle::random_ar(d, rng), mgm = oracle::random_mgm(d, rng), fm = oracle::random_fm(d, rng);
  CHECK(dpo_pair_loss(ar, ar, disc, 0.1, rng).loss == doctest::Approx(std::log(2.0)));
  CHECK(dpo_pair_loss(mgm, mgm, disc, 10.0, rng).loss == doctest::Approx(std::log(2.0)));
  CHECK(dpo_pair_loss(fm, fm, cont, 1000.0, rng).loss == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(dpo_pair_loss(ar, mgm, disc, 0.1, rng), ContractViolation);
}

TEST_CASE("winners_of keeps prompt and winner only") {
  const auto pairs = codebook_pairs(40, 9);
  const auto pos = winners_of(pairs);
  REQUIRE(pos.size() == pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pos[i].prompt == pairs[i].prompt);
    CHECK(pos[i].sample == pairs[i].winner);
  }
}

TEST_CASE("DPO beats the base model and SFT lands in between") {
  const auto a = experiments::alignment();
  INFO("base " << a.base_wer << " dpo " << a.dpo_wer << " sft " << a.sft_wer);
  CHECK(a.pairs == 2000);
  CHECK(a.margin_after > a.margin_before);
  CHECK(a.relative_reduction() >= 0.30);
  CHECK(a.sft_wer < a.base_wer);
  CHECK(a.sft_wer > a.dpo_wer);
}

TEST_CASE("iterative alignment over two rounds") {
  const auto f = experiments::flywheel();
  REQUIRE(f.result.rounds.size() == 2);
  INFO("rounds " << f.result.rounds[0].metrics.average_wer << " " << f.result.rounds[1].metrics.average_wer);
  CHECK_FALSE(f.result.halted);
  CHECK(f.result.models.size() == 3);
  CHECK(f.subset_ok());
  CHECK(f.result.subset_types.size() == 2 * kDeskPromptsPerType);
  CHECK(f.result.rounds[1].metrics.average_wer <= f.result.rounds[0].metrics.average_wer + 0.5);
  CHECK(f.result.rounds[0].metrics.average_wer < f.result.base_metrics.average_wer);
  CHECK(f.ok());
}

TEST_CASE("iterative alignment halts when no pair clears the gap") {
  const Domain d;
  const ChannelSpec ch{d};
  CorpusConfig cc;
  cc.per_type = 8;
  IterateOptions io;
  io.rounds = 1;
  io.config = default_run_config(Paradigm::AR);
  io.channel = ch;
  const auto r = iterate_alignment(GenerativeModel{checks::codebook_ar(ch, 60.0)}, build_prompt_corpus(d, cc), io);
  CHECK(r.halted);
  CHECK(r.rounds.empty());
  CHECK_FALSE(r.diagnostic.empty());
  io.rounds = 0;
  CHECK_THROWS_AS(iterate_alignment(GenerativeModel{checks::codebook_ar(ch, 6.0)}, build_prompt_corpus(d, cc), io),
                  ContractViolation);
}

TEST_CASE("pair datasets round-trip through JSONL") {
  const Domain d;
  RngStream rng(10, 0);
  CHECK(pairs_from_jsonl(pairs_to_jsonl({})).empty());
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 1000; ++i) pairs.push_back(random_pair(d, rng));
  const auto text = pairs_to_jsonl(pairs);
  const auto back = pairs_from_jsonl(text);
  CHECK(back == pairs);
  CHECK(pairs_to_jsonl(back) == text);

  const auto dir = temp_dir("io");
  write_pairs(pairs, dir / "pairs.jsonl");
  CHECK(read_pairs(dir / "pairs.jsonl") == pairs);
  CHECK(read_text(dir / "pairs.jsonl") == text);
  std::filesystem::remove_all(dir);
}

TEST_CASE("off-grid values are rounded to six decimals on write") {
  const Domain d;
  RngStream rng(11, 0);
  auto p = random_pair(d, rng);
  p.wer_w = 1.0 / 3.0;
  const auto back = pair_from_json(pair_to_json(p));
  CHECK(back.wer_w == grid6(1.0 / 3.0));
  CHECK(pair_to_json(back) == pair_to_json(p));
}

TEST_CASE("malformed dataset lines name the line and field") {
  const Domain d;
  RngStream rng(12, 0);
  const auto good = pair_to_json(random_pair(d, rng));
  auto j = nlohmann::json::parse(good);
  j.erase("provenance");
  const std::string text = good + "\n" + j.dump() + "\n";
  try {
    pairs_from_jsonl(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(e.field == "provenance");
    CHECK(std::string(e.what()).find("provenance") != std::string::npos);
  }
  auto k = nlohmann::json::parse(good);
  k["winner"]["kind"] = "analog";
  try {
    pair_from_json(k.dump(), 7);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 7);
    CHECK(e.field == "winner.kind");
  }
  CHECK_THROWS_AS(pairs_from_jsonl("{not json}\n"), ParseError);
}

TEST_CASE("prompt corpora round-trip through JSONL") {
  const Domain d;
  CorpusConfig cfg;
  cfg.per_type = 40;
  const auto c = build_prompt_corpus(d, cfg);
  CHECK(corpus_from_jsonl(corpus_to_jsonl(c)) == c);
}

TEST_CASE("run config parsing") {
  const auto c = parse_run_config("# fm run\nparadigm = fm\nseed = 9  # trailing\n\nepochs=3\n");
  CHECK(c.paradigm == Paradigm::FM);
  CHECK(c.beta == 1000.0);
  CHECK(c.base_lr == 8e-6);
  CHECK(c.seed == 9);
  CHECK(c.epochs == 3);
  CHECK(parse_run_config("beta = 0.5\nparadigm = mgm\n").beta == 0.5);
  CHECK(parse_run_config("schedule = 1, 2, 3, 4, 5").schedule == std::vector<double>{1, 2, 3, 4, 5});
  CHECK_THROWS_AS(parse_run_config("learning_rate = 0.1"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config("seed = 1\nseed = 2"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config("beta = fast"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config("beta = -1"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config("schedule = 1, 2"), ContractViolation);
  CHECK_THROWS_AS(parse_run_config("just words"), ContractViolation);
  for (auto p : {Paradigm::AR, Paradigm::FM, Paradigm::MGM}) {
    auto cfg = default_run_config(p);
    cfg.seed = 123;
    cfg.weight_decay = 0.01;
    CHECK(parse_run_config(format_run_config(cfg)) == cfg);
  }
}

TEST_CASE("configuration snapshot matches the published defaults") {
  const auto ar = default_run_config(Paradigm::AR);
  const auto fm = default_run_config(Paradigm::FM);
  const auto mgm = default_run_config(Paradigm::MGM);
  CHECK(ar.beta == 0.1);
  CHECK(fm.beta == 1000.0);
  CHECK(mgm.beta == 10.0);
  CHECK(ar.base_lr == 5e-6);
  CHECK(fm.base_lr == 8e-6);
  CHECK(mgm.base_lr == 5e-6);
  for (const auto* c : {&ar, &fm, &mgm}) {
    CHECK(c->warmup == 4000);
    CHECK(c->batch_size == 32);
    CHECK(c->gap_threshold == 6.0);
    CHECK(c->schedule.size() == 5);
  }
  CHECK(ar.schedule == std::vector<double>{0.4, 0.6, 0.8, 1.0, 1.2});
  CHECK(fm.schedule == std::vector<double>{0.8, 0.9, 1.0, 1.1, 1.2});
  CHECK(format_run_config(ar) ==
        "paradigm = ar\nbeta = 0.10000000000000001\nbase_lr = 5.0000000000000004e-06\nwarmup = 4000\nepochs = 1\n"
        "batch_size = 32\nseed = 0\ngap_threshold = 6\nschedule = 0.40000000000000002,0.59999999999999998,"
        "0.80000000000000004,1,1.2\nweight_decay = 0\n");
}

TEST_CASE("identical seeds give byte-identical pipeline artifacts") {
  const auto a = experiments::pipeline(21);
  const auto b = experiments::pipeline(21);
  CHECK(a.corpus == b.corpus);
  CHECK(a.pairs == b.pairs);
  CHECK(a.train_log == b.train_log);
  CHECK(a.checkpoint == b.checkpoint);
  CHECK(a.metrics == b.metrics);
  CHECK_FALSE(a.pairs.empty());
  const auto c = experiments::pipeline(22);
  CHECK(c.pairs != a.pairs);
}

TEST_CASE("external perturber falls back to the rule-based transform") {
  const Domain d;
  const auto table = ConfusionTable::make_default(d);
  ExternalPerturber ext({"http://127.0.0.1:1/perturb", std::chrono::milliseconds(200)}, d, table);
  const std::vector<int> text{1, 2, 3, 4};
  RngStream a(1, 2), b(1, 2);
  CHECK(ext(text, PerturbMode::Pronunciation, a) == perturb_pronunciation(text, table, 0.5, d, b));
  CHECK(ext(text, PerturbMode::Punctuation, a) == perturb_punctuation(text, d, b));
  CHECK(ext.fallbacks() == 2);
  CHECK(split_url("http://h:1/x/y") == std::pair<std::string, std::string>{"http://h:1", "/x/y"});
  CHECK(split_url("http://h:1") == std::pair<std::string, std::string>{"http://h:1", "/"});
  CHECK_THROWS_AS(split_url("h:1/x"), ContractViolation);
}

TEST_CASE("external perturber uses a live endpoint") {
  const Domain d;
  httplib::Server srv;
  std::string reply;
  srv.Post("/perturb", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    if (body.at("mode") == "punctuation") {
      res.status = 500;
      return;
    }
    res.set_content(nlohmann::json{{"text", reply}}.dump(), "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  const auto table = ConfusionTable::make_default(d);
  ExternalPerturber ext({"http://127.0.0.1:" + std::to_string(port) + "/perturb"}, d, table);
  const std::vector<int> text{1, 2, 3};
  reply = render_text({1, 3, 3}, d);
  RngStream rng(3, 0);
  CHECK(ext(text, PerturbMode::Pronunciation, rng) == std::vector<int>{1, 3, 3});
  CHECK(ext.fallbacks() == 0);
  const auto punct = ext(text, PerturbMode::Punctuation, rng);
  CHECK(words_only(punct, d) == text);
  CHECK(ext.fallbacks() == 1);
  reply = "";
  ext(text, PerturbMode::Pronunciation, rng);
  CHECK(ext.fallbacks() == 2);
  srv.stop();
  t.join();
}
