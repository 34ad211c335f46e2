#include "psv/nn/serialize.hpp"

#include <array>
#include <bit>
#include <istream>
#include <ostream>

#include "psv/error.hpp"

namespace psv::nn {

namespace {

constexpr std::uint32_t kMaxNameLength = 1u << 16;
constexpr std::uint32_t kMaxRank = 8;

void read_exact(std::istream& in, char* data, std::size_t n) {
  if (!in.read(data, static_cast<std::streamsize>(n))) throw ValidationError("truncated binary data");
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t value) {
  std::array<char, 4> bytes{};
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

void write_u64(std::ostream& out, std::uint64_t value) {
  write_u32(out, static_cast<std::uint32_t>(value & 0xffffffffu));
  write_u32(out, static_cast<std::uint32_t>(value >> 32));
}

std::uint32_t read_u32(std::istream& in) {
  std::array<char, 4> bytes{};
  read_exact(in, bytes.data(), bytes.size());
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  return value;
}

std::uint64_t read_u64(std::istream& in) {
  const std::uint64_t lo = read_u32(in);
  const std::uint64_t hi = read_u32(in);
  return lo | (hi << 32);
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint32_t length = read_u32(in);
  require(length <= (1u << 24), "string length out of range");
  std::string s(length, '\0');
  read_exact(in, s.data(), length);
  return s;
}

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  write_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (const auto d : tensor.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    for (const double v : tensor.values()) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  const std::uint32_t count = read_u32(in);
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const std::uint32_t name_length = read_u32(in);
    require(name_length <= kMaxNameLength, "tensor name too long");
    t.name.resize(name_length);
    read_exact(in, t.name.data(), name_length);
    const std::uint32_t rank = read_u32(in);
    require(rank <= kMaxRank, "tensor rank out of range in '" + t.name + "'");
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = read_u32(in);
      total *= d;
      require(total <= (std::size_t{1} << 32), "tensor '" + t.name + "' is too large");
    }
    std::vector<double> values(total);
    for (auto& v : values) v = static_cast<double>(std::bit_cast<float>(read_u32(in)));
    t.tensor = Tensor(std::move(shape), std::move(values));
    tensors.push_back(std::move(t));
  }
  return tensors;
}

}  // namespace psv::nn
