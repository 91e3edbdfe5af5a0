#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "readnet/num/tensor.hpp"

namespace readnet::num {

enum class DType : std::uint8_t { kFloat32 = 1, kFloat64 = 2 };

// Little-endian primitives shared by the checkpoint container.
void write_u8(std::ostream& out, std::uint8_t v);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
/// u32 byte length followed by the UTF-8 bytes.
void write_string(std::ostream& out, std::string_view s);

std::uint8_t read_u8(std::istream& in);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);

struct NamedTensor {
  std::string name;
  Tensor tensor;
  DType dtype = DType::kFloat64;
};

/// name (length-prefixed), u32 rank, u64 dims, u8 dtype tag, LE IEEE-754 values.
void write_tensor(std::ostream& out, std::string_view name, const Tensor& t, DType dtype = DType::kFloat64);
NamedTensor read_tensor(std::istream& in);

}  // namespace readnet::num
