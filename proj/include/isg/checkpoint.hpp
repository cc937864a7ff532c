#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isg/field_net.hpp"

namespace isg {

// Checkpoint container. Little-endian binary: magic "ISNG", format version
// (u32), config block, then named arrays as (name, rank, dims, f64 payload).
// Round trips are bit-exact.
struct ArrayBlob {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

struct Checkpoint {
  FieldNetConfig config;
  std::vector<ArrayBlob> arrays;

  const ArrayBlob* find(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

std::vector<ArrayBlob> params_to_blobs(const FieldNetParams& params);
FieldNetParams params_from_blobs(const Checkpoint& ckpt);

}  // namespace isg
