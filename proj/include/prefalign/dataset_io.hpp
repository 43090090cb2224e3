#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "prefalign/corpus.hpp"
#include "prefalign/evaluation.hpp"
#include "prefalign/pairgen.hpp"

namespace prefalign {

/// Malformed dataset line; `line` is 1-based, `field` names the offending key.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what);
  std::size_t line;
  std::string field;
};

/// Fixed field order, frames and WER printed with six decimals, so equal inputs give
/// byte-equal files. Values off the six-decimal grid are rounded on write.
std::string pair_to_json(const PreferencePair& p);
PreferencePair pair_from_json(std::string_view line, std::size_t lineno = 1);

std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> pairs_from_jsonl(std::string_view text);
void write_pairs(const std::vector<PreferencePair>& pairs, const std::filesystem::path& path);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path);

std::string corpus_to_jsonl(const PromptCorpus& c);
PromptCorpus corpus_from_jsonl(std::string_view text);
void write_corpus(const PromptCorpus& c, const std::filesystem::path& path);
PromptCorpus read_corpus(const std::filesystem::path& path);

std::string metrics_to_json(const SuiteMetrics& m);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace prefalign
