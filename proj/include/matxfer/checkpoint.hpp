#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "matxfer/tensor.hpp"

namespace matxfer {

// Versioned binary container for named float32 tensors plus a small block of
// u32 config words (the net serializes its configuration there). Layout, all
// little-endian:
//   "MXN1" | u32 catalog version | u32 n_config | u32 config[] |
//   u32 n_tensors | per tensor: u32 name_len, name bytes, u32 ndim,
//   u32 dims[], f32 data[] | u64 FNV-1a checksum of everything above
struct Checkpoint {
    std::uint32_t catalog_version = 0;
    std::vector<std::uint32_t> config_words;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

// Throws DataError if the path is not writable.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Throws DataError on bad magic, catalog version mismatch, truncation, or
// checksum mismatch.
Checkpoint load_checkpoint(const std::string& path);

} // namespace matxfer
