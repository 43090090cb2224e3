#include "prefalign/run_config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "prefalign/dpo.hpp"
#include "prefalign/pairgen.hpp"

namespace prefalign {

void RunConfig::validate() const {
  require(beta > 0.0, "config: beta must be positive");
  require(base_lr > 0.0, "config: base_lr must be positive");
  require(warmup > 0, "config: warmup must be positive");
  require(epochs > 0, "config: epochs must be positive");
  require(batch_size > 0, "config: batch_size must be positive");
  require(gap_threshold > 0.0, "config: gap_threshold must be positive");
  require(weight_decay >= 0.0, "config: weight_decay must be non-negative");
  require(schedule.size() == kSamplingsPerPrompt, "config: schedule must hold five values");
  for (double v : schedule) require(v > 0.0, "config: schedule values must be positive");
}

RunConfig default_run_config(Paradigm p) {
  RunConfig c;
  c.paradigm = p;
  c.beta = default_beta(p);
  c.base_lr = p == Paradigm::FM ? kDefaultLrFM : p == Paradigm::AR ? kDefaultLrAR : kDefaultLrMGM;
  c.schedule = default_schedule(p);
  return c;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ContractViolation("config: bad value for '" + key + "': " + v);
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(key, trim(item)));
  return out;
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractViolation("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    if (kv.count(key)) throw ContractViolation("config line " + std::to_string(lineno) + ": duplicate key " + key);
    kv[key] = trim(line.substr(eq + 1));
  }

  RunConfig c = default_run_config(kv.count("paradigm") ? paradigm_from_string(kv["paradigm"]) : Paradigm::AR);
  for (const auto& [key, v] : kv) {
    if (key == "paradigm") continue;
    if (key == "beta") c.beta = parse_number<double>(key, v);
    else if (key == "base_lr") c.base_lr = parse_number<double>(key, v);
    else if (key == "warmup") c.warmup = parse_number<std::int64_t>(key, v);
    else if (key == "epochs") c.epochs = parse_number<int>(key, v);
    else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, v);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "gap_threshold") c.gap_threshold = parse_number<double>(key, v);
    else if (key == "schedule") c.schedule = parse_list(key, v);
    else if (key == "weight_decay") c.weight_decay = parse_number<double>(key, v);
    else throw ContractViolation("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "paradigm = " << to_string(c.paradigm) << "\n";
  o << "beta = " << c.beta << "\n";
  o << "base_lr = " << c.base_lr << "\n";
  o << "warmup = " << c.warmup << "\n";
  o << "epochs = " << c.epochs << "\n";
  o << "batch_size = " << c.batch_size << "\n";
  o << "seed = " << c.seed << "\n";
  o << "gap_threshold = " << c.gap_threshold << "\n";
  o << "schedule = ";
  for (std::size_t i = 0; i < c.schedule.size(); ++i) o << (i ? "," : "") << c.schedule[i];
  o << "\nweight_decay = " << c.weight_decay << "\n";
  return o.str();
}

}  // namespace prefalign
