#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "prefalign/toymodels.hpp"

namespace prefalign {

inline constexpr double kDefaultLrAR = 5e-6;
inline constexpr double kDefaultLrFM = 8e-6;
inline constexpr double kDefaultLrMGM = 5e-6;
inline constexpr std::int64_t kDefaultWarmup = 4000;
inline constexpr std::size_t kDefaultBatchSize = 32;

struct RunConfig {
  Paradigm paradigm = Paradigm::AR;
  double beta = 0.1;
  double base_lr = kDefaultLrAR;
  std::int64_t warmup = kDefaultWarmup;
  int epochs = 1;
  std::size_t batch_size = kDefaultBatchSize;
  std::uint64_t seed = 0;
  double gap_threshold = 6.0;
  std::vector<double> schedule;
  double weight_decay = 0.0;

  /// Throws ContractViolation unless every numeric field is positive (weight decay >= 0)
  /// and the schedule holds five positive values.
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig default_run_config(Paradigm p);

/// Flat `key = value` lines; `#` starts a comment. `paradigm` is applied first so the
/// remaining keys override that paradigm's defaults. Unknown keys are rejected.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& c);

}  // namespace prefalign
