// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "exogs/error.hpp"

namespace exogs {

template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{}) : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  T& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  const T& at(int x, int y, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::size_t size() const { return data.size(); }
};

using ImageU8 = Image<std::uint8_t>;
using ImageU16 = Image<std::uint16_t>;
using ImageF = Image<float>;

namespace png_detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void write_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  out.insert(out.end(), body.begin(), body.end());
  put_u32_be(out, static_cast<std::uint32_t>(::crc32(0L, body.data(), static_cast<uInt>(body.size()))));
}

inline std::vector<std::uint8_t> zlib_compress(const std::vector<std::uint8_t>& raw) {
  uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(bound);
  const int rc = ::compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6);
  require(rc == Z_OK, Errc::IoError, "zlib compression failed");
  out.resize(bound);
  return out;
}

inline std::vector<std::uint8_t> zlib_decompress(const std::vector<std::uint8_t>& in, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf out_len = static_cast<uLongf>(expected);
  const int rc = ::uncompress(out.data(), &out_len, in.data(), static_cast<uLong>(in.size()));
  require(rc == Z_OK && out_len == expected, Errc::ImageLoadError, "corrupt or truncated PNG data stream");
  return out;
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

// Encodes raw sample bytes (already big-endian for 16-bit) as a PNG file image.
inline std::vector<std::uint8_t> encode(const std::uint8_t* samples, int width, int height, int channels,
                                        int bit_depth) {
  const int bytes_per_pixel = channels * bit_depth / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(width) * bytes_per_pixel;
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(height) * (row_bytes + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: None
    raw.insert(raw.end(), samples + y * row_bytes, samples + (y + 1) * row_bytes);
  }

  std::vector<std::uint8_t> file = {137, 80, 78, 71, 13, 10, 26, 10};
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
  ihdr.push_back(channels == 1 ? 0 : (channels == 3 ? 2 : 6));
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(file, "IHDR", ihdr);
  write_chunk(file, "IDAT", zlib_compress(raw));
  write_chunk(file, "IEND", {});
  return file;
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> samples;  // de-filtered, 16-bit samples big-endian
};

inline DecodedPng decode(const std::vector<std::uint8_t>& file, const std::string& origin) {
  static const std::uint8_t kSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  require(file.size() > 8 && std::memcmp(file.data(), kSig, 8) == 0, Errc::ImageLoadError,
          origin + ": not a PNG file");

  DecodedPng out;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  bool saw_ihdr = false;
  while (pos + 8 <= file.size()) {
    const std::uint32_t len = get_u32_be(&file[pos]);
    require(pos + 12 + len <= file.size(), Errc::ImageLoadError, origin + ": truncated chunk");
    const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
    const std::uint8_t* payload = &file[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      require(len == 13, Errc::ImageLoadError, origin + ": bad IHDR");
      out.width = static_cast<int>(get_u32_be(payload));
      out.height = static_cast<int>(get_u32_be(payload + 4));
      out.bit_depth = payload[8];
      const int color_type = payload[9];
      require(payload[12] == 0, Errc::ImageLoadError, origin + ": interlaced PNG not supported");
      switch (color_type) {
        case 0: out.channels = 1; break;
        case 2: out.channels = 3; break;
        case 6: out.channels = 4; break;
        default: raise(Errc::ImageLoadError, origin + ": unsupported PNG color type " + std::to_string(color_type));
      }
      require(out.bit_depth == 8 || out.bit_depth == 16, Errc::ImageLoadError,
              origin + ": unsupported PNG bit depth " + std::to_string(out.bit_depth));
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  require(saw_ihdr && !idat.empty(), Errc::ImageLoadError, origin + ": missing IHDR or IDAT");

  const int bpp = out.channels * out.bit_depth / 8;
  const std::size_t row_bytes = static_cast<std::size_t>(out.width) * bpp;
  const std::size_t expected = static_cast<std::size_t>(out.height) * (row_bytes + 1);
  std::vector<std::uint8_t> raw = zlib_decompress(idat, expected);

  out.samples.resize(static_cast<std::size_t>(out.height) * row_bytes);
  std::vector<std::uint8_t> prev(row_bytes, 0);
  for (int y = 0; y < out.height; ++y) {
    const std::uint8_t filter = raw[y * (row_bytes + 1)];
    const std::uint8_t* src = &raw[y * (row_bytes + 1) + 1];
    std::uint8_t* dst = &out.samples[y * row_bytes];
    for (std::size_t i = 0; i < row_bytes; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? dst[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: raise(Errc::ImageLoadError, origin + ": unknown PNG filter " + std::to_string(filter));
      }
      dst[i] = static_cast<std::uint8_t>(v);
    }
    std::memcpy(prev.data(), dst, row_bytes);
  }
  return out;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Errc::MissingFile, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), Errc::IoError, "short write to " + path.string());
}

}  // namespace png_detail

inline void save_png(const std::filesystem::path& path, const ImageU8& img) {
  png_detail::write_file(path, png_detail::encode(img.data.data(), img.width, img.height, img.channels, 8));
}

inline void save_png16(const std::filesystem::path& path, const ImageU16& img) {
  std::vector<std::uint8_t> be(img.data.size() * 2);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    be[2 * i] = static_cast<std::uint8_t>(img.data[i] >> 8);
    be[2 * i + 1] = static_cast<std::uint8_t>(img.data[i]);
  }
  png_detail::write_file(path, png_detail::encode(be.data(), img.width, img.height, img.channels, 16));
}

inline ImageU8 load_png(const std::filesystem::path& path) {
  const auto dec = png_detail::decode(png_detail::read_file(path), path.string());
  require(dec.bit_depth == 8, Errc::ImageLoadError, path.string() + ": expected 8-bit PNG");
  ImageU8 img(dec.width, dec.height, dec.channels);
  std::copy(dec.samples.begin(), dec.samples.end(), img.data.begin());
  return img;
}

inline ImageU16 load_png16(const std::filesystem::path& path) {
  const auto dec = png_detail::decode(png_detail::read_file(path), path.string());
  require(dec.bit_depth == 16 && dec.channels == 1, Errc::ImageLoadError,
          path.string() + ": expected 16-bit single-channel PNG");
  ImageU16 img(dec.width, dec.height, 1);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = static_cast<std::uint16_t>((dec.samples[2 * i] << 8) | dec.samples[2 * i + 1]);
  }
  return img;
}

/// Loads any supported PNG as float RGB in [0, 1]; gray is replicated,
/// alpha is dropped.
inline ImageF load_image_rgb(const std::filesystem::path& path) {
  const auto dec = png_detail::decode(png_detail::read_file(path), path.string());
  require(dec.bit_depth == 8, Errc::ImageLoadError, path.string() + ": background images must be 8-bit PNG");
  ImageF img(dec.width, dec.height, 3);
  for (int y = 0; y < dec.height; ++y) {
    for (int x = 0; x < dec.width; ++x) {
      const std::uint8_t* px = &dec.samples[(static_cast<std::size_t>(y) * dec.width + x) * dec.channels];
      for (int c = 0; c < 3; ++c) {
        img.at(x, y, c) = static_cast<float>(px[dec.channels == 1 ? 0 : c]) / 255.0f;
      }
    }
  }
  return img;
}

inline std::uint8_t to_u8(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline ImageU8 to_u8_image(const ImageF& img) {
  ImageU8 out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = to_u8(img.data[i]);
  return out;
}

/// Depth in meters -> 16-bit millimeters; 0 marks invalid pixels.
inline ImageU16 depth_to_u16_mm(const ImageF& depth_m) {
  ImageU16 out(depth_m.width, depth_m.height, 1);
  for (std::size_t i = 0; i < depth_m.data.size(); ++i) {
    const float mm = depth_m.data[i] * 1000.0f;
    out.data[i] = static_cast<std::uint16_t>(std::lround(std::clamp(mm, 0.0f, 65535.0f)));
  }
  return out;
}

inline ImageF resize_bilinear(const ImageF& src, int width, int height) {
  ImageF dst(width, height, src.channels);
  const float sx = static_cast<float>(src.width) / static_cast<float>(width);
  const float sy = static_cast<float>(src.height) / static_cast<float>(height);
  for (int y = 0; y < height; ++y) {
    const float fy = (y + 0.5f) * sy - 0.5f;
    const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, src.height - 1);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const float wy = std::clamp(fy - y0, 0.0f, 1.0f);
    for (int x = 0; x < width; ++x) {
      const float fx = (x + 0.5f) * sx - 0.5f;
      const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, src.width - 1);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const float wx = std::clamp(fx - x0, 0.0f, 1.0f);
      for (int c = 0; c < src.channels; ++c) {
        const float top = src.at(x0, y0, c) * (1.0f - wx) + src.at(x1, y0, c) * wx;
        const float bot = src.at(x0, y1, c) * (1.0f - wx) + src.at(x1, y1, c) * wx;
        dst.at(x, y, c) = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return dst;
}

/// Center-crops to the target aspect ratio, then resizes.
inline ImageF fit_image(const ImageF& src, int width, int height) {
  const double target_aspect = static_cast<double>(width) / height;
  const double src_aspect = static_cast<double>(src.width) / src.height;
  int crop_w = src.width;
  int crop_h = src.height;
  if (src_aspect > target_aspect) {
    crop_w = std::max(1, static_cast<int>(std::lround(src.height * target_aspect)));
  } else {
    crop_h = std::max(1, static_cast<int>(std::lround(src.width / target_aspect)));
  }
  const int x0 = (src.width - crop_w) / 2;
  const int y0 = (src.height - crop_h) / 2;
  ImageF cropped(crop_w, crop_h, src.channels);
  for (int y = 0; y < crop_h; ++y) {
    for (int x = 0; x < crop_w; ++x) {
      for (int c = 0; c < src.channels; ++c) cropped.at(x, y, c) = src.at(x0 + x, y0 + y, c);
    }
  }
  if (crop_w == width && crop_h == height) return cropped;
  return resize_bilinear(cropped, width, height);
}

}  // namespace exogs
