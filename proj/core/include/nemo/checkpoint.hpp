#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nemo/dense_matrix.hpp"

namespace nemo {

/// Binary checkpoint layout (all integers unsigned little-endian, reals IEEE-754
/// binary64 little-endian):
///
///   magic        8 bytes  "NEMOCKPT"
///   version      u32      kCheckpointVersion
///   num_users    u64
///   num_items    u64
///   dim          u64
///   levels       u64
///   prior_std    f64
///   block_count  u32
///   block_count times:
///     name_len   u32, then name_len bytes of UTF-8 name
///     rows       u64
///     cols       u64
///     values     rows*cols f64, row-major
inline constexpr char kCheckpointMagic[8] = {'N', 'E', 'M', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint64_t num_users = 0;
  std::uint64_t num_items = 0;
  std::uint64_t dim = 0;
  std::uint64_t levels = 0;
  double prior_std = 0.0;
  friend bool operator==(const CheckpointHeader&, const CheckpointHeader&) = default;
};

struct Checkpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, DenseMatrix>> blocks;

  const DenseMatrix* find(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// ConfigError on bad magic, unsupported version or truncation.
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace nemo
