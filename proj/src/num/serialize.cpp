#include "readnet/num/serialize.hpp"

#include <array>
#include <bit>
#include <stdexcept>
#include <vector>

namespace readnet::num {
namespace {

template <typename T>
void write_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
  if (!out) throw std::runtime_error("write failed");
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) throw std::runtime_error("unexpected end of stream");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxNameLength = 1u << 16;
constexpr std::uint64_t kMaxElements = 1ull << 31;

}  // namespace

void write_u8(std::ostream& out, std::uint8_t v) { write_le(out, v); }
void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }

void write_string(std::ostream& out, std::string_view s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint8_t read_u8(std::istream& in) { return read_le<std::uint8_t>(in); }
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }

std::string read_string(std::istream& in) {
  const auto n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n)) throw std::runtime_error("unexpected end of stream");
  return s;
}

void write_tensor(std::ostream& out, std::string_view name, const Tensor& t, DType dtype) {
  write_string(out, name);
  write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) write_u64(out, d);
  write_u8(out, static_cast<std::uint8_t>(dtype));
  for (double v : t.data()) {
    if (dtype == DType::kFloat32) {
      write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    } else {
      write_f64(out, v);
    }
  }
}

NamedTensor read_tensor(std::istream& in) {
  NamedTensor nt;
  const auto name_len = read_u32(in);
  if (name_len > kMaxNameLength) throw std::runtime_error("tensor name too long");
  nt.name.assign(name_len, '\0');
  in.read(nt.name.data(), name_len);
  if (in.gcount() != static_cast<std::streamsize>(name_len)) throw std::runtime_error("unexpected end of stream");
  const auto rank = read_u32(in);
  if (rank == 0 || rank > kMaxRank) throw std::runtime_error("tensor '" + nt.name + "': bad rank");
  Shape shape(rank);
  std::uint64_t elements = 1;
  for (auto& d : shape) {
    d = read_u64(in);
    if (d == 0 || d > kMaxElements / elements) throw std::runtime_error("tensor '" + nt.name + "': bad dimensions");
    elements *= d;
  }
  const auto tag = read_u8(in);
  if (tag != static_cast<std::uint8_t>(DType::kFloat32) && tag != static_cast<std::uint8_t>(DType::kFloat64)) {
    throw std::runtime_error("tensor '" + nt.name + "': unknown dtype tag " + std::to_string(tag));
  }
  nt.dtype = static_cast<DType>(tag);
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) {
    v = nt.dtype == DType::kFloat32 ? static_cast<double>(std::bit_cast<float>(read_u32(in))) : read_f64(in);
  }
  nt.tensor = Tensor(std::move(shape), std::move(values));
  return nt;
}

}  // namespace readnet::num
