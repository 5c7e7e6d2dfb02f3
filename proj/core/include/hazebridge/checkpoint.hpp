#pragma once

#include <string>
#include <vector>

#include "hazebridge/tensor.hpp"

namespace hazebridge {

// Flat binary container of named tensors. Byte layout (little-endian):
//   magic "HBTC", format-version byte (1), u32 entry count, then per entry:
//   u16 name length, name bytes, u8 dtype (0 = float64), u8 rank,
//   rank x i64 extents, payload as float64.
// Values are stored as float64 regardless of the build's working precision.

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

void save_tensor_container(const std::string& path, const std::vector<NamedTensor>& items);
std::vector<NamedTensor> load_tensor_container(const std::string& path);

// Lookup helper; throws IoError when the name is missing.
const Tensor& find_tensor(const std::vector<NamedTensor>& items, const std::string& name);

// Copies values into an existing leaf tensor; shapes must agree.
void assign_tensor(Tensor& dst, const Tensor& src);

}  // namespace hazebridge
