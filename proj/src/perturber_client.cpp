#include "prefalign/perturber_client.hpp"

#include <iostream>
#include <memory>

#include "httplib.h"
#include "json.hpp"

namespace prefalign {

std::string_view to_string(PerturbMode m) { return m == PerturbMode::Pronunciation ? "pronunciation" : "punctuation"; }

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  require(scheme != std::string::npos, "perturber url must include a scheme");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

ExternalPerturber::ExternalPerturber(ExternalPerturberConfig cfg, Domain d, ConfusionTable table,
                                     double pronunciation_rate)
    : cfg_(std::move(cfg)),
      domain_(d),
      table_(std::move(table)),
      rate_(pronunciation_rate),
      fallbacks_(std::make_shared<std::atomic<std::size_t>>(0)) {
  table_.validate(domain_);
}

std::vector<int> ExternalPerturber::fallback(const std::vector<int>& text, PerturbMode mode, RngStream& rng) const {
  ++*fallbacks_;
  if (mode == PerturbMode::Pronunciation) return perturb_pronunciation(text, table_, rate_, domain_, rng);
  return perturb_punctuation(text, domain_, rng);
}

std::vector<int> ExternalPerturber::operator()(const std::vector<int>& text, PerturbMode mode, RngStream& rng) const {
  std::string why;
  try {
    auto [base, path] = split_url(cfg_.url);
    httplib::Client client(base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    const nlohmann::json body = {{"text", render_text(text, domain_)}, {"mode", std::string(to_string(mode))}};
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      why = "transport error: " + httplib::to_string(res.error());
    } else if (res->status != 200) {
      why = "status " + std::to_string(res->status);
    } else {
      const auto reply = nlohmann::json::parse(res->body);
      auto out = parse_text(reply.at("text").get<std::string>(), domain_);
      if (!out.empty()) return out;
      why = "empty text in reply";
    }
  } catch (const std::exception& e) {
    why = e.what();
  }
  std::cerr << "external perturber unavailable (" << why << "); substituting rule-based " << to_string(mode)
            << " perturbation\n";
  return fallback(text, mode, rng);
}

Perturber ExternalPerturber::as_perturber(PerturbMode mode) const {
  return [self = *this, mode](const std::vector<int>& text, RngStream& rng) { return self(text, mode, rng); };
}

}  // namespace prefalign
