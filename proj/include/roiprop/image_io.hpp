// 8-bit PNG and binary PPM frame files, plus a lossless raw dump of the
// normalized float representation.
#pragma once

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "roiprop/core.hpp"

namespace roiprop {

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot read " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot write " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::io, "write failed for " + path);
}

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline Frame frame_from_rgb8(const std::uint8_t* rgb, int w, int h) {
  Frame f(w, h, 3);
  for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = static_cast<float>(rgb[i]) / 255.0f;
  return f;
}

inline std::vector<std::uint8_t> frame_to_rgb8(const Frame& frame) {
  if (frame.channels != 3) throw Error(ErrorCode::invalid_argument, "only RGB frames can be written");
  std::vector<std::uint8_t> out(frame.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(frame.data[i]);
  return out;
}

}  // namespace detail

/// Quantizes every value to the nearest k/255, matching what an 8-bit file stores.
inline void quantize_8bit(Frame& frame) {
  for (auto& v : frame.data) v = static_cast<float>(detail::to_byte(v)) / 255.0f;
}

// ---------------------------------------------------------------------------
// PPM (P6, maxval 255)

inline Frame decode_ppm(const std::string& bytes, const std::string& name = "<ppm>") {
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) t.push_back(bytes[pos++]);
    return t;
  };
  if (token() != "P6") throw Error(ErrorCode::parse, name + ": not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw Error(ErrorCode::parse, name + ": bad PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorCode::parse, name + ": unsupported PPM header");
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < pos + need) throw Error(ErrorCode::truncated, name + ": PPM raster truncated");
  return detail::frame_from_rgb8(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos), w, h);
}

inline std::string encode_ppm(const Frame& frame) {
  const auto rgb = detail::frame_to_rgb8(frame);
  std::string out = "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  return out;
}

// ---------------------------------------------------------------------------
// PNG via the libpng simplified API

inline Frame decode_png(const std::string& bytes, const std::string& name = "<png>") {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(ErrorCode::parse, name + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::parse, name + ": " + msg);
  }
  return detail::frame_from_rgb8(buf.data(), static_cast<int>(image.width), static_cast<int>(image.height));
}

inline std::string encode_png(const Frame& frame) {
  const auto rgb = detail::frame_to_rgb8(frame);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width);
  image.height = static_cast<png_uint_32>(frame.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr))
    throw Error(ErrorCode::io, std::string("png encode: ") + image.message);
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr))
    throw Error(ErrorCode::io, std::string("png encode: ") + image.message);
  out.resize(size);
  return out;
}

inline Frame read_image(const std::string& path) {
  const auto bytes = detail::read_file(path);
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png") return decode_png(bytes, path);
  if (ext == ".ppm") return decode_ppm(bytes, path);
  throw Error(ErrorCode::parse, path + ": unsupported image extension");
}

inline void write_image(const Frame& frame, const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png")
    detail::write_file(path, encode_png(frame));
  else if (ext == ".ppm")
    detail::write_file(path, encode_ppm(frame));
  else
    throw Error(ErrorCode::parse, path + ": unsupported image extension");
}

// ---------------------------------------------------------------------------
// Raw frame dump: "ROIFR01\0", width, height, channels, index (int64 LE),
// telemetry flag + four float64, then float32 LE values.

inline std::string serialize_frame(const Frame& frame) {
  std::string out("ROIFR01\0", 8);
  auto put = [&](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  };
  put(static_cast<std::uint64_t>(frame.width), 8);
  put(static_cast<std::uint64_t>(frame.height), 8);
  put(static_cast<std::uint64_t>(frame.channels), 8);
  put(frame.index, 8);
  put(frame.telemetry ? 1 : 0, 1);
  const Telemetry t = frame.telemetry.value_or(Telemetry{});
  for (double v : {t.altitude_m, t.gimbal_pitch_deg, t.roll_deg, t.focal_px}) put(std::bit_cast<std::uint64_t>(v), 8);
  for (float v : frame.data) put(std::bit_cast<std::uint32_t>(v), 4);
  return out;
}

inline Frame deserialize_frame(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 8, std::string("ROIFR01\0", 8)) != 0)
    throw Error(ErrorCode::bad_magic, "not a raw frame");
  constexpr std::size_t header = 8 + 4 * 8 + 1 + 4 * 8;
  if (bytes.size() < header) throw Error(ErrorCode::truncated, "raw frame header truncated");
  std::size_t pos = 8;
  auto get = [&](int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += static_cast<std::size_t>(n);
    return v;
  };
  Frame f;
  f.width = static_cast<int>(get(8));
  f.height = static_cast<int>(get(8));
  f.channels = static_cast<int>(get(8));
  f.index = static_cast<std::size_t>(get(8));
  const bool has_t = get(1) != 0;
  Telemetry t;
  t.altitude_m = std::bit_cast<double>(get(8));
  t.gimbal_pitch_deg = std::bit_cast<double>(get(8));
  t.roll_deg = std::bit_cast<double>(get(8));
  t.focal_px = std::bit_cast<double>(get(8));
  if (has_t) f.telemetry = t;
  const std::size_t n = static_cast<std::size_t>(f.width) * f.height * f.channels;
  if (bytes.size() != header + 4 * n) throw Error(ErrorCode::truncated, "raw frame payload size mismatch");
  f.data.resize(n);
  for (auto& v : f.data) v = std::bit_cast<float>(static_cast<std::uint32_t>(get(4)));
  return f;
}

}  // namespace roiprop
