#include "prefalign/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace prefalign {

using nlohmann::json;

ParseError::ParseError(std::size_t l, std::string f, const std::string& what)
    : std::runtime_error("line " + std::to_string(l) + ": field '" + f + "': " + what), line(l), field(std::move(f)) {}

namespace {

void put_fixed(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  out += buf;
}

void put_ints(std::string& out, const std::vector<int>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  out += ']';
}

void put_str(std::string& out, std::string_view s) { out += json(std::string(s)).dump(); }

void put_prompt(std::string& out, const ToyPrompt& p) {
  out += "{\"text\":";
  put_ints(out, p.text);
  out += ",\"speaker\":" + std::to_string(p.speaker) + ",\"text_lang\":";
  put_str(out, to_string(p.text_language));
  out += ",\"speech_lang\":";
  put_str(out, to_string(p.speech_language));
  out += '}';
}

void put_sample(std::string& out, const SpeechSample& s) {
  out += "{\"kind\":";
  put_str(out, to_string(s.kind));
  if (s.kind == SampleKind::Discrete) {
    out += ",\"tokens\":";
    put_ints(out, s.tokens);
  } else {
    out += ",\"frames\":[";
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
      if (i) out += ',';
      out += '[';
      put_fixed(out, s.frames[i][0]);
      out += ',';
      put_fixed(out, s.frames[i][1]);
      out += ']';
    }
    out += ']';
  }
  out += ",\"hyper\":";
  put_fixed(out, s.hyper);
  out += '}';
}

/// Field accessor that reports the dotted path on failure.
struct Reader {
  std::size_t line;

  const json& at(const json& obj, const std::string& key, const std::string& path) const {
    if (!obj.is_object()) throw ParseError(line, path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(line, path.empty() ? key : path + "." + key, "missing");
    return *it;
  }
  template <typename T>
  T get(const json& obj, const std::string& key, const std::string& path) const {
    const auto& v = at(obj, key, path);
    const std::string name = path.empty() ? key : path + "." + key;
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ParseError(line, name, e.what());
    }
  }
  template <typename F>
  auto convert(const std::string& name, F&& f) const {
    try {
      return f();
    } catch (const ContractViolation& e) {
      throw ParseError(line, name, e.what());
    }
  }

  ToyPrompt prompt(const json& obj, const std::string& path) const {
    const auto& p = at(obj, path, "");
    ToyPrompt x;
    x.text = get<std::vector<int>>(p, "text", path);
    x.speaker = get<int>(p, "speaker", path);
    auto tl = get<std::string>(p, "text_lang", path);
    auto sl = get<std::string>(p, "speech_lang", path);
    x.text_language = convert(path + ".text_lang", [&] { return language_from_string(tl); });
    x.speech_language = convert(path + ".speech_lang", [&] { return language_from_string(sl); });
    return x;
  }

  SpeechSample sample(const json& obj, const std::string& key) const {
    const auto& s = at(obj, key, "");
    SpeechSample y;
    auto kind = get<std::string>(s, "kind", key);
    y.kind = convert(key + ".kind", [&] { return sample_kind_from_string(kind); });
    if (y.kind == SampleKind::Discrete) {
      y.tokens = get<std::vector<int>>(s, "tokens", key);
    } else {
      for (const auto& f : get<std::vector<std::vector<double>>>(s, "frames", key)) {
        if (f.size() != kFrameDim) throw ParseError(line, key + ".frames", "frame must have two components");
        y.frames.push_back({f[0], f[1]});
      }
    }
    y.hyper = get<double>(s, "hyper", key);
    return y;
  }
};

json parse_line(std::string_view line, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(lineno, "<line>", e.what());
  }
}

template <typename T, typename F>
std::vector<T> parse_lines(std::string_view text, F&& per_line) {
  std::vector<T> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++lineno;
    const auto line = text.substr(pos, nl - pos);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) out.push_back(per_line(line, lineno));
    pos = nl + 1;
  }
  return out;
}

}  // namespace

std::string pair_to_json(const PreferencePair& p) {
  std::string out = "{\"prompt\":";
  put_prompt(out, p.prompt);
  out += ",\"winner\":";
  put_sample(out, p.winner);
  out += ",\"loser\":";
  put_sample(out, p.loser);
  out += ",\"wer_w\":";
  put_fixed(out, p.wer_w);
  out += ",\"wer_l\":";
  put_fixed(out, p.wer_l);
  out += ",\"provenance\":";
  put_str(out, to_string(p.provenance));
  out += ",\"source_models\":[";
  for (std::size_t i = 0; i < p.source_models.size(); ++i) {
    if (i) out += ',';
    put_str(out, p.source_models[i]);
  }
  out += "]}";
  return out;
}

PreferencePair pair_from_json(std::string_view line, std::size_t lineno) {
  const json j = parse_line(line, lineno);
  const Reader r{lineno};
  PreferencePair p;
  p.prompt = r.prompt(j, "prompt");
  p.winner = r.sample(j, "winner");
  p.loser = r.sample(j, "loser");
  p.wer_w = r.get<double>(j, "wer_w", "");
  p.wer_l = r.get<double>(j, "wer_l", "");
  auto prov = r.get<std::string>(j, "provenance", "");
  p.provenance = r.convert("provenance", [&] { return provenance_from_string(prov); });
  p.source_models = r.get<std::vector<std::string>>(j, "source_models", "");
  return p;
}

std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += pair_to_json(p);
    out += '\n';
  }
  return out;
}

std::vector<PreferencePair> pairs_from_jsonl(std::string_view text) {
  return parse_lines<PreferencePair>(text, [](std::string_view l, std::size_t n) { return pair_from_json(l, n); });
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_pairs(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path) {
  write_text(path, pairs_to_jsonl(pairs));
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path) { return pairs_from_jsonl(read_text(path)); }

std::string corpus_to_jsonl(const PromptCorpus& c) {
  std::string out;
  for (std::size_t i = 0; i < c.prompts.size(); ++i) {
    out += "{\"prompt\":";
    put_prompt(out, c.prompts[i]);
    out += ",\"text_type\":";
    put_str(out, to_string(c.types[i]));
    out += ",\"combination\":";
    put_str(out, to_string(c.combos[i]));
    out += "}\n";
  }
  return out;
}

PromptCorpus corpus_from_jsonl(std::string_view text) {
  struct Row {
    ToyPrompt p;
    TextType t;
    Combination c;
  };
  auto rows = parse_lines<Row>(text, [](std::string_view l, std::size_t n) {
    const json j = parse_line(l, n);
    const Reader r{n};
    Row row;
    row.p = r.prompt(j, "prompt");
    auto t = r.get<std::string>(j, "text_type", "");
    auto c = r.get<std::string>(j, "combination", "");
    row.t = r.convert("text_type", [&] { return text_type_from_string(t); });
    row.c = r.convert("combination", [&] { return combination_from_string(c); });
    return row;
  });
  PromptCorpus out;
  for (auto& row : rows) {
    out.prompts.push_back(std::move(row.p));
    out.types.push_back(row.t);
    out.combos.push_back(row.c);
  }
  return out;
}

void write_corpus(const PromptCorpus& c, const std::filesystem::path& path) { write_text(path, corpus_to_jsonl(c)); }

PromptCorpus read_corpus(const std::filesystem::path& path) { return corpus_from_jsonl(read_text(path)); }

std::string metrics_to_json(const SuiteMetrics& m) {
  json scen = json::array();
  for (const auto& s : m.scenarios)
    scen.push_back({{"scenario", std::string(to_string(s.scenario))},
                    {"wer", s.metrics.wer},
                    {"sim", s.metrics.sim},
                    {"quality_proxy", s.metrics.quality_proxy},
                    {"n", s.metrics.n}});
  json j = {{"scenarios", scen}, {"average_wer", m.average_wer}};
  return j.dump(2) + "\n";
}

}  // namespace prefalign
