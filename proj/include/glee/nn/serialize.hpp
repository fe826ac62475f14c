#pragma once

// Weights blob layout (all little-endian):
//   magic "GLEEWTS1" (8 bytes), u32 version, u32 tensor count
//   per tensor: u32 name length, name bytes, u32 rank, u32 dims[rank],
//               f32 values[prod(dims)] row-major
//   u64 FNV-1a checksum of every preceding byte

#include <string>
#include <vector>

#include "glee/nn/tape.hpp"

namespace glee::nn {

inline constexpr std::uint32_t kWeightsVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::vector<unsigned char> encode_weights(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_weights(const std::vector<unsigned char>& blob);

void save_weights(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_weights(const std::string& path);

std::vector<NamedTensor> snapshot(const ParameterList& params);

// Copies values by name; every parameter must be present with matching shape.
void assign(const ParameterList& params, const std::vector<NamedTensor>& tensors);

}  // namespace glee::nn
