#pragma once

#include <map>
#include <string>

#include "posekit/tensor.hpp"

namespace posekit {

// Versioned binary checkpoint, magic "PKT1", little-endian:
//   magic[4] | u32 param_count
//   per parameter: u32 name_len | name bytes | u32 rank | u32 dims[rank] | f32 data
// Round-trips bit-exactly.

void save_checkpoint(const std::string& path,
                     const std::map<std::string, Tensor<float>>& params);

std::map<std::string, Tensor<float>> load_checkpoint(const std::string& path);

}  // namespace posekit
