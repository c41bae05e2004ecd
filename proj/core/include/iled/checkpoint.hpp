#pragma once

#include <map>
#include <string>

#include "iled/tensor.hpp"

namespace iled::diff {

// Parameter checkpoint file, little-endian throughout:
//
//   bytes 0..7   magic "ILEDCKPT"
//   u32          version (currently 1)
//   u32          block count
//   per block:   u32 name length, name bytes,
//                u32 rank, u64 dims[rank],
//                f64 data[prod(dims)]
//
// Block names are dotted paths ("encoder.2.weight", "dyn.W", "center.mu").
// Loading validates magic/version and returns the blocks by name.

void save_blocks(const std::string& path, const std::map<std::string, Tensor>& blocks);
std::map<std::string, Tensor> load_blocks(const std::string& path);

}  // namespace iled::diff
