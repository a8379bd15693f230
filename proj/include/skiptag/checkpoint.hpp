#pragma once

// Versioned binary model container.
//
// Layout (native little-endian):
//   "SKIPTAG\0"  u32 version  u64 manifest_bytes  manifest (JSON text)
//   u32 tensor_count, then per tensor: u32 name_bytes, name, u64 rows,
//   u64 cols, rows*cols f64 in row-major order.
// The manifest records feature dims, mode, task, tag set, POS vocabulary,
// the word vocabulary and its hash; all are checked on load.

#include "skiptag/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

namespace skiptag {

class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Model& model);
Model read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace skiptag
