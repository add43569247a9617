#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "lanecal/errors.hpp"

namespace lanecal {

/// 8-bit raster, 1 channel (grayscale) or 3 (RGB), row-major.
struct Image {
  int width{0};
  int height{0};
  int channels{1};
  std::vector<std::uint8_t> data;

  static Image zeros(int w, int h, int c = 1) {
    Image img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.data.assign(static_cast<size_t>(w) * h * c, 0);
    return img;
  }

  bool empty() const { return data.empty(); }

  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

namespace detail {

inline int pnm_next_int(std::istream& in) {
  // skips whitespace and '#' comments between header tokens
  int c = in.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = in.get();
    c = in.get();
  }
  int value = 0;
  bool any = false;
  while (c >= '0' && c <= '9') {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) fail(ErrorCode::IoError, "malformed PNM header");
  return value;
}

}  // namespace detail

/// Binary PGM (P5) or PPM (P6), 8-bit.
inline Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  int channels;
  if (magic[0] == 'P' && magic[1] == '5')
    channels = 1;
  else if (magic[0] == 'P' && magic[1] == '6')
    channels = 3;
  else
    fail(ErrorCode::IoError, "unsupported PNM magic in " + path);
  const int w = detail::pnm_next_int(in);
  const int h = detail::pnm_next_int(in);
  const int maxval = detail::pnm_next_int(in);
  if (maxval != 255) fail(ErrorCode::IoError, "only 8-bit PNM supported");
  Image img = Image::zeros(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!in) fail(ErrorCode::IoError, "truncated PNM payload in " + path);
  return img;
}

inline void write_pnm(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    fail(ErrorCode::IoError, "PNM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) fail(ErrorCode::IoError, "failed writing " + path);
}

}  // namespace lanecal
