#pragma once

// Checkpoint container, little-endian, version 1:
//
//   offset  size   field
//   0       8      magic "KWSCKPT1"
//   8       4      u32 format version (1)
//   12      4      u32 input_frames
//   16      4      u32 input_dims
//   20      4      u32 conv layer count C
//   24      20*C   per conv: u32 out_channels, kernel_h, kernel_w, stride_h, stride_w
//   ...     4      u32 pool_h
//           4      u32 pool_w
//           4      u32 fc layer count F
//           4*F    u32 widths
//           8      f64 dropout_rate
//           4      u32 flags (bit 0: dropout after convolutions)
//           4      u32 metadata byte length M
//           M      metadata text, "key=value\n" lines sorted by key
//           8      u64 parameter count N
//           8*N    f64 parameters, tensors in ArchConfig::parameter_shapes() order,
//                  each row-major
//           8      u64 FNV-1a 64 of every preceding byte

#include <filesystem>
#include <map>
#include <string>

#include "kwslab/model.hpp"

namespace kws {

struct Checkpoint {
  ModelParams<double> params;
  std::map<std::string, std::string> metadata;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& origin = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kws
