#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>

#include "prefalign/pairgen.hpp"

namespace prefalign {

enum class PerturbMode { Pronunciation, Punctuation };
std::string_view to_string(PerturbMode m);

struct ExternalPerturberConfig {
  std::string url;  // e.g. http://127.0.0.1:8080/perturb
  std::chrono::milliseconds timeout{10000};
};

/// POSTs {"text", "mode"} and expects {"text"}. Any transport, status or parse failure,
/// or a reply that does not parse as a toy text, falls back to the rule-based perturber
/// and is logged to stderr.
class ExternalPerturber {
 public:
  ExternalPerturber(ExternalPerturberConfig cfg, Domain d, ConfusionTable table, double pronunciation_rate = 0.5);

  std::vector<int> operator()(const std::vector<int>& text, PerturbMode mode, RngStream& rng) const;
  Perturber as_perturber(PerturbMode mode) const;

  std::size_t fallbacks() const noexcept { return fallbacks_->load(); }

 private:
  std::vector<int> fallback(const std::vector<int>& text, PerturbMode mode, RngStream& rng) const;

  ExternalPerturberConfig cfg_;
  Domain domain_;
  ConfusionTable table_;
  double rate_;
  std::shared_ptr<std::atomic<std::size_t>> fallbacks_;
};

/// Splits "http://host:port/path" into scheme+authority and path.
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace prefalign
