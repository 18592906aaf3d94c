#pragma once

#include <map>
#include <string>

#include "ktele/core/tape.hpp"

namespace ktele {

// Single-file checkpoint archive:
//   magic "KTLCKPT1" | u64 meta_len | meta (JSON, UTF-8)
//   u64 tensor_count | per tensor: u64 name_len, name, u64 rows, u64 cols,
//   rows*cols doubles (column-major, little-endian).
void save_checkpoint(const std::string& path, const ad::ParamStore& store,
                     const std::string& meta_json);

struct Checkpoint {
  std::string meta_json;
  std::map<std::string, Mat> tensors;
};

Checkpoint load_checkpoint(const std::string& path);

// Copy tensors into existing params by name. Returns the names present in the
// checkpoint but absent from the store (and vice versa untouched params keep
// their values). Shape mismatch throws.
std::vector<std::string> restore_params(ad::ParamStore& store, const Checkpoint& ckpt);

}  // namespace ktele
