#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefalign/toymodels.hpp"

namespace prefalign {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat binary container, all integers and floats little-endian:
///
///   "PFA1"                      4 bytes
///   paradigm tag                u32 (0 = AR, 1 = FM, 2 = MGM)
///   array count                 u32
///   per array: rank u32, dims u64 x rank
///   payload                     f64 values of every array, in order
///
/// Domain sizes are recovered from the shape table.
std::vector<unsigned char> encode_checkpoint(const GenerativeModel& m);
GenerativeModel decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const GenerativeModel& m, const std::filesystem::path& path);
GenerativeModel load_checkpoint(const std::filesystem::path& path);

}  // namespace prefalign
