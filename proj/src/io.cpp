#include "sgs/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace sgs {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'T', '1'};
constexpr std::uint32_t kMaxRank = 32;

std::uint32_t decode_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void encode_u32(std::uint32_t v, unsigned char* p) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw IoError("truncated tensor file '" + path + "'");
  }
  return decode_u32(buf);
}

}  // namespace

Tensor read_sgt(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file '" + path + "'");

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("'" + path + "' is not an SGT1 tensor file");
  }
  const std::uint32_t rank = read_u32(in, path);
  if (rank == 0 || rank > kMaxRank) {
    throw IoError("tensor file '" + path + "' has unreasonable rank");
  }
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t d = read_u32(in, path);
    if (d == 0) throw IoError("tensor file '" + path + "' has a zero dimension");
    shape[i] = d;
    count *= d;
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = read_u32(in, path);
    const float v = std::bit_cast<float>(bits);
    if (!std::isfinite(v)) throw IoError("tensor file '" + path + "' holds a non-finite value");
    data[i] = static_cast<double>(v);
  }
  char extra;
  if (in.read(&extra, 1)) throw IoError("tensor file '" + path + "' has trailing bytes");
  return Tensor(std::move(shape), std::move(data));
}

void write_sgt(const std::string& path, const Tensor& tensor) {
  if (tensor.rank() == 0 || tensor.rank() > kMaxRank) {
    throw ConfigError("tensor rank out of range for the SGT1 format");
  }
  if (!tensor.all_finite()) throw NumericError("refusing to write non-finite tensor values");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create tensor file '" + path + "'");
  out.write(kMagic, 4);

  unsigned char buf[4];
  encode_u32(static_cast<std::uint32_t>(tensor.rank()), buf);
  out.write(reinterpret_cast<const char*>(buf), 4);
  for (std::size_t d : tensor.shape()) {
    encode_u32(static_cast<std::uint32_t>(d), buf);
    out.write(reinterpret_cast<const char*>(buf), 4);
  }
  for (double v : tensor.values()) {
    encode_u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)), buf);
    out.write(reinterpret_cast<const char*>(buf), 4);
  }
  if (!out) throw IoError("failed writing tensor file '" + path + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create file '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing file '" + path + "'");
}

}  // namespace sgs
