#pragma once

#include <string>
#include <vector>

namespace refdepth::ad {

struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<float> data;
};

// Checkpoint format: magic "LDCK", u32 version, u32 tensor count, then per
// tensor: u32 name length + UTF-8 name, u32 rank, u32 dims, little-endian
// f32 payload. Round trips are bit-exact.

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

}  // namespace refdepth::ad
