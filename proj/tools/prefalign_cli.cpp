#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "prefalign/anno_server.hpp"
#include "prefalign/checkpoint.hpp"
#include "prefalign/corpus.hpp"
#include "prefalign/dataset_io.hpp"
#include "prefalign/evaluation.hpp"
#include "prefalign/perturber_client.hpp"
#include "prefalign/run_config.hpp"
#include "prefalign/training.hpp"

namespace fs = std::filesystem;
using namespace prefalign;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

RunConfig resolve_config(const Globals& g, Paradigm p) {
  RunConfig c = g.config.empty() ? default_run_config(p) : load_run_config(g.config);
  if (g.seed) c.seed = *g.seed;
  require(c.paradigm == p, "config paradigm does not match the model checkpoint");
  return c;
}

std::uint64_t seed_of(const Globals& g) { return g.seed.value_or(0); }

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw CLI::ValidationError("--out", "an output path is required");
  return g.out;
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) std::cout << text;
  else write_text(g.out, text);
}

AnnoServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-pair construction, DPO training and evaluation on a toy TTS domain"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--config", g.config, "RunConfig file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output path");

  // gen-corpus
  auto* gen_corpus = app.add_subcommand("gen-corpus", "Build the stratified prompt corpus (JSONL)");
  std::size_t per_type = kDeskPromptsPerType;
  gen_corpus->add_option("--per-type", per_type, "Prompts per text type")->capture_default_str();

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "Fit a base model on a noisy channel and write a checkpoint");
  std::string paradigm_name = "ar";
  PretrainOptions pre;
  pretrain->add_option("--paradigm", paradigm_name, "ar | fm | mgm")->capture_default_str();
  pretrain->add_option("--noise", pre.noise, "Target corruption rate")->capture_default_str();
  pretrain->add_option("--utterances", pre.utterances)->capture_default_str();
  pretrain->add_option("--epochs", pre.epochs)->capture_default_str();
  pretrain->add_option("--lr", pre.lr)->capture_default_str();

  // gen-pairs
  auto* gen_pairs = app.add_subcommand("gen-pairs", "Build intra/inter/perturbed preference pairs (JSONL)");
  std::string kind = "intra";
  std::vector<std::string> models;
  std::string corpus_path;
  std::string perturber_url;
  gen_pairs->add_option("--kind", kind, "intra | inter | perturbed | all")
      ->check(CLI::IsMember({"intra", "inter", "perturbed", "all"}))
      ->capture_default_str();
  gen_pairs->add_option("--model", models, "Model checkpoint(s); inter needs two")->required()->check(CLI::ExistingFile);
  gen_pairs->add_option("--corpus", corpus_path, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  gen_pairs->add_option("--perturber-url", perturber_url, "External perturber endpoint");

  // arena
  auto* arena_cmd = app.add_subcommand("arena", "Pairwise inter-model win rates");
  std::vector<std::string> arena_models;
  arena_cmd->add_option("--model", arena_models, "Model checkpoints")->required()->check(CLI::ExistingFile);
  arena_cmd->add_option("--corpus", corpus_path, "Corpus JSONL")->required()->check(CLI::ExistingFile);

  // train
  auto* train = app.add_subcommand("train", "DPO or SFT training");
  std::string objective = "dpo";
  std::string model_path, ref_path, pairs_path;
  train->add_option("--objective", objective, "dpo | sft")->check(CLI::IsMember({"dpo", "sft"}))->capture_default_str();
  train->add_option("--model", model_path, "Initial model checkpoint")->required()->check(CLI::ExistingFile);
  train->add_option("--ref", ref_path, "Reference checkpoint (defaults to --model)")->check(CLI::ExistingFile);
  train->add_option("--pairs", pairs_path, "Preference pairs JSONL")->required()->check(CLI::ExistingFile);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate on the four-scenario suite");
  double eval_scale = 1.0;
  eval->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--scale", eval_scale, "Suite size multiplier")->capture_default_str();

  // iterate
  auto* iterate = app.add_subcommand("iterate", "Iterative alignment on the challenging subset");
  std::size_t rounds = 2;
  iterate->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  iterate->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  iterate->add_option("--rounds", rounds)->capture_default_str();
  iterate->add_option("--scale", eval_scale, "Suite size multiplier")->capture_default_str();

  // serve-anno
  auto* serve = app.add_subcommand("serve-anno", "Serve the annotation API");
  std::string journal, static_dir, host = "127.0.0.1";
  int port = 8080;
  std::size_t replication = kDefaultReplication;
  std::vector<std::string> task_kinds = {"reading_accuracy", "naturalness_cmos", "similarity_ab"};
  serve->add_option("--journal", journal, "Journal path")->required();
  serve->add_option("--pairs", pairs_path, "Pairs to load when the journal is empty")->check(CLI::ExistingFile);
  serve->add_option("--kinds", task_kinds, "Task kinds to create")->capture_default_str();
  serve->add_option("--replication", replication)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--static", static_dir, "UI bundle directory")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  const Domain domain;
  const ChannelSpec channel{domain};

  try {
    if (*gen_corpus) {
      CorpusConfig cfg;
      cfg.per_type = per_type;
      cfg.seed = seed_of(g);
      emit(g, corpus_to_jsonl(build_prompt_corpus(domain, cfg)));
    } else if (*pretrain) {
      pre.seed = seed_of(g);
      save_checkpoint(pretrain_base(paradigm_from_string(paradigm_name), channel, pre), require_out(g));
    } else if (*gen_pairs) {
      const auto corpus = read_corpus(corpus_path);
      std::vector<GenerativeModel> ms;
      for (const auto& m : models) ms.push_back(load_checkpoint(m));
      const auto cfg = resolve_config(g, paradigm_of(ms.front()));
      PairGenOptions opts;
      opts.gap_threshold = cfg.gap_threshold;
      opts.seed = cfg.seed;
      std::vector<PreferencePair> out;
      std::vector<IntraResult> intra;
      const bool want_intra = kind == "intra" || kind == "all";
      const bool want_inter = kind == "inter" || kind == "all";
      if (want_intra || want_inter) {
        for (std::size_t i = 0; i < ms.size(); ++i) {
          PairGenOptions o = opts;
          o.seed = splitmix64(opts.seed + 0x100 * (i + 1));
          intra.push_back(build_intra_pairs(ms[i], fs::path(models[i]).stem().string(), corpus.prompts,
                                            default_schedule(paradigm_of(ms[i])), channel, o));
        }
      }
      if (want_intra)
        for (const auto& r : intra) out.insert(out.end(), r.pairs.begin(), r.pairs.end());
      if (want_inter) {
        require(ms.size() >= 2, "inter pairs need at least two --model checkpoints");
        for (std::size_t a = 0; a < intra.size(); ++a)
          for (std::size_t b = a + 1; b < intra.size(); ++b) {
            auto r = build_inter_pairs(intra[a], intra[b], corpus.prompts, opts.gap_threshold);
            out.insert(out.end(), r.pairs.begin(), r.pairs.end());
          }
      }
      if (kind == "perturbed" || kind == "all") {
        const auto table = ConfusionTable::make_default(domain);
        for (std::size_t i = 0; i < ms.size(); ++i) {
          for (auto type : {TextType::PronunciationPerturbed, TextType::PunctuationPerturbed}) {
            const auto mode =
                type == TextType::PronunciationPerturbed ? PerturbMode::Pronunciation : PerturbMode::Punctuation;
            Perturber perturber;
            if (!perturber_url.empty()) {
              perturber = ExternalPerturber({perturber_url}, domain, table).as_perturber(mode);
            } else if (mode == PerturbMode::Pronunciation) {
              perturber = [&](const std::vector<int>& t, RngStream& rng) {
                return perturb_pronunciation(t, table, 0.5, domain, rng);
              };
            } else {
              perturber = [&](const std::vector<int>& t, RngStream& rng) { return perturb_punctuation(t, domain, rng); };
            }
            PairGenOptions o = opts;
            o.seed = splitmix64(opts.seed ^ (0xBEEF + 0x10 * i + static_cast<std::uint64_t>(type)));
            auto r = build_perturbed_pairs(ms[i], fs::path(models[i]).stem().string(), corpus.prompts, corpus.types,
                                           perturber, 1.0, channel, o);
            if (r.misaligned > 0)
              std::cerr << r.misaligned << " " << to_string(mode) << " pairs dropped: loser length differs from the clean prompt\n";
            out.insert(out.end(), r.pairs.begin(), r.pairs.end());
          }
        }
      }
      emit(g, pairs_to_jsonl(out));
      std::cerr << out.size() << " pairs\n";
    } else if (*arena_cmd) {
      const auto corpus = read_corpus(corpus_path);
      std::vector<GenerativeModel> ms;
      std::vector<std::string> ids;
      for (const auto& m : arena_models) {
        ms.push_back(load_checkpoint(m));
        ids.push_back(fs::path(m).stem().string());
      }
      const auto cfg = resolve_config(g, paradigm_of(ms.front()));
      PairGenOptions opts;
      opts.gap_threshold = cfg.gap_threshold;
      opts.seed = cfg.seed;
      const auto rep = arena(ms, ids, corpus.prompts, channel, opts);
      nlohmann::json j = {{"models", rep.models}, {"cells", rep.cells}, {"win_rate", rep.win_rate}};
      emit(g, j.dump(2) + "\n");
    } else if (*train) {
      auto model = load_checkpoint(model_path);
      const auto ref = ref_path.empty() ? model : load_checkpoint(ref_path);
      const auto cfg = resolve_config(g, paradigm_of(model));
      const auto pairs = read_pairs(pairs_path);
      const auto out = require_out(g);
      auto result = objective == "dpo" ? train_dpo(model, ref, pairs, cfg) : train_sft(model, winners_of(pairs), cfg);
      save_checkpoint(result.model, out);
      write_text(out.string() + ".log.jsonl", result.log.to_jsonl());
      std::cerr << result.log.steps << " steps\n";
    } else if (*eval) {
      const auto model = load_checkpoint(model_path);
      EvalOptions opts;
      opts.seed = seed_of(g);
      const auto suite = make_eval_suite(domain, seed_of(g), eval_scale);
      emit(g, metrics_to_json(evaluate_suite(model, suite, channel, opts)));
    } else if (*iterate) {
      const auto base = load_checkpoint(model_path);
      IterateOptions opts;
      opts.rounds = rounds;
      opts.config = resolve_config(g, paradigm_of(base));
      opts.channel = channel;
      opts.suite = make_eval_suite(domain, opts.config.seed, eval_scale);
      opts.eval.seed = opts.config.seed;
      const auto res = iterate_alignment(base, read_corpus(corpus_path), opts);
      const fs::path dir = require_out(g);
      fs::create_directories(dir);
      write_text(dir / "round0.metrics.json", metrics_to_json(res.base_metrics));
      for (std::size_t k = 0; k < res.rounds.size(); ++k) {
        save_checkpoint(res.models[k + 1], dir / ("round" + std::to_string(k + 1) + ".ckpt"));
        write_text(dir / ("round" + std::to_string(k + 1) + ".metrics.json"), metrics_to_json(res.rounds[k].metrics));
        std::cerr << "round " << k + 1 << ": " << res.rounds[k].pairs << " pairs, average WER "
                  << res.rounds[k].metrics.average_wer << "\n";
      }
      if (res.halted) return 2;
    } else if (*serve) {
      AnnoStoreOptions so;
      so.journal = journal;
      so.seed = seed_of(g);
      so.channel = channel;
      AnnoStore store(so);
      if (store.snapshot().pairs->empty()) {
        if (pairs_path.empty()) throw CLI::ValidationError("--pairs", "the journal is empty; supply pairs to annotate");
        store.add_pairs(read_pairs(pairs_path));
        for (const auto& k : task_kinds) store.add_tasks(task_kind_from_string(k), replication, seed_of(g));
      }
      AnnoServer server(store, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
      if (!server.bind(host, port)) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 1;
      }
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on http://" << host << ":" << port << "/api/v1/\n";
      server.serve();
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
