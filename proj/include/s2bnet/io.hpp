#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "s2bnet/common.hpp"
#include "s2bnet/tensor.hpp"

namespace s2b::io {

// Tensor container: magic "S2BT", version u8, rank u8, dims u32 LE,
// dtype u8 (0 = f32, 1 = u8), raw values little-endian.
inline constexpr char kMagic[4] = {'S', '2', 'B', 'T'};
inline constexpr uint8_t kVersion = 1;
inline constexpr uint8_t kDtypeF32 = 0;
inline constexpr uint8_t kDtypeU8 = 1;

namespace detail {

inline void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline uint32_t get_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path);
}

struct Header {
  Shape shape;
  uint8_t dtype;
  size_t payload_offset;
};

inline Header parse_header(const std::string& bytes, const std::string& path) {
  if (bytes.size() < 7) throw IoError("truncated tensor container: " + path);
  if (!std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw IoError("not an S2BT tensor container: " + path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (p[4] != kVersion)
    throw IoError("unsupported S2BT version in " + path + ": " +
                  std::to_string(static_cast<int>(p[4])));
  const int rank = p[5];
  size_t off = 6;
  if (bytes.size() < off + 4 * static_cast<size_t>(rank) + 1)
    throw IoError("truncated tensor container: " + path);
  Header h;
  for (int i = 0; i < rank; ++i) {
    h.shape.push_back(static_cast<int64_t>(get_u32le(p + off)));
    off += 4;
  }
  h.dtype = p[off++];
  h.payload_offset = off;
  return h;
}

}  // namespace detail

inline void save_tensor(const std::string& path, const Tensor& t) {
  check_shape(t.rank() <= 255, "tensor rank exceeds container limit");
  std::string out;
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(t.rank()));
  for (int64_t d : t.shape()) {
    check_shape(d >= 0 && d <= 0xffffffffll, "dimension exceeds container limit");
    detail::put_u32le(out, static_cast<uint32_t>(d));
  }
  out.push_back(static_cast<char>(kDtypeF32));
  for (float v : t.vec()) detail::put_u32le(out, std::bit_cast<uint32_t>(v));
  detail::write_file(path, out);
}

inline Tensor load_tensor(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  const auto h = detail::parse_header(bytes, path);
  if (h.dtype != kDtypeF32)
    throw IoError("expected f32 tensor in " + path + ", found dtype " +
                  std::to_string(static_cast<int>(h.dtype)));
  const int64_t n = shape_numel(h.shape);
  if (bytes.size() != h.payload_offset + 4 * static_cast<size_t>(n))
    throw IoError("truncated tensor container: " + path);
  std::vector<float> data(static_cast<size_t>(n));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + h.payload_offset;
  for (int64_t i = 0; i < n; ++i)
    data[static_cast<size_t>(i)] = std::bit_cast<float>(detail::get_u32le(p + 4 * i));
  return Tensor::from(h.shape, std::move(data));
}

inline void save_bytes(const std::string& path, const Shape& shape,
                       const std::vector<uint8_t>& data) {
  check_shape(shape_numel(shape) == static_cast<int64_t>(data.size()),
              "byte payload does not match shape");
  std::string out;
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(shape.size()));
  for (int64_t d : shape) detail::put_u32le(out, static_cast<uint32_t>(d));
  out.push_back(static_cast<char>(kDtypeU8));
  out.append(reinterpret_cast<const char*>(data.data()), data.size());
  detail::write_file(path, out);
}

inline std::vector<uint8_t> load_bytes(const std::string& path, Shape* shape_out) {
  const std::string bytes = detail::read_file(path);
  const auto h = detail::parse_header(bytes, path);
  if (h.dtype != kDtypeU8)
    throw IoError("expected u8 tensor in " + path);
  const int64_t n = shape_numel(h.shape);
  if (bytes.size() != h.payload_offset + static_cast<size_t>(n))
    throw IoError("truncated tensor container: " + path);
  if (shape_out) *shape_out = h.shape;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + h.payload_offset;
  return std::vector<uint8_t>(p, p + n);
}

// Binary PPM (P6) preview; values clamped from [0,1] to 8-bit.
inline void write_ppm(const std::string& path, const Tensor& img, int band_r,
                      int band_g, int band_b) {
  check_shape(img.rank() == 3, "write_ppm: [C,H,W] tensor required");
  const int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  check_shape(band_r < c && band_g < c && band_b < c, "write_ppm: band out of range");
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const int bands[3] = {band_r, band_g, band_b};
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int band : bands) {
        const float v = img.at({band, y, x});
        const float clamped = std::clamp(v, 0.0f, 1.0f);
        out.push_back(static_cast<char>(
            static_cast<int>(std::lround(clamped * 255.0f))));
      }
  detail::write_file(path, out);
}

}  // namespace s2b::io
