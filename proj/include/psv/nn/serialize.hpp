#pragma once

// Binary encoding of named tensors:
//   u32 count, then per tensor: u32 name length, name bytes, u32 rank,
//   u32 dims[rank], little-endian float32 values.
// All integers are little-endian.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "psv/nn/tensor.hpp"

namespace psv::nn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void write_u32(std::ostream& out, std::uint32_t value);
void write_u64(std::ostream& out, std::uint64_t value);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
void write_string(std::ostream& out, const std::string& s);
std::string read_string(std::istream& in);

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(std::istream& in);

}  // namespace psv::nn
