// SPDX-License-Identifier: Apache-2.0
#include "vo/core/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "vo/core/errors.hpp"

namespace vo {

namespace {

// Skips whitespace and '#' comment lines, then reads one ASCII token.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      break;
    }
  }
  while ((c = in.get()) != EOF && !std::isspace(c))
    tok.push_back(static_cast<char>(c));
  if (tok.empty()) throw ParseError("unexpected end of header");
  return tok;
}

int parse_int_token(std::istream& in, const char* what) {
  const std::string tok = next_token(in);
  try {
    size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("bad ") + what + " token: " + tok);
  }
}

bool host_is_little_endian() {
  const uint16_t probe = 1;
  uint8_t b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

}  // namespace

Image load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const std::string magic = next_token(in);
  if (magic != "P5") throw ParseError(path + ": not a binary PGM");
  const int w = parse_int_token(in, "width");
  const int h = parse_int_token(in, "height");
  const int maxval = parse_int_token(in, "maxval");
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw ParseError(path + ": bad dimensions or maxval");
  in.get();  // single whitespace after maxval

  Image img(w, h);
  if (maxval < 256) {
    std::vector<uint8_t> row(static_cast<size_t>(w));
    for (int i = 0; i < h; ++i) {
      in.read(reinterpret_cast<char*>(row.data()), w);
      if (!in) throw ParseError(path + ": truncated pixel data");
      for (int j = 0; j < w; ++j)
        img.at(j, i) = static_cast<double>(row[j]) / maxval;
    }
  } else {
    std::vector<uint8_t> row(static_cast<size_t>(w) * 2);
    for (int i = 0; i < h; ++i) {
      in.read(reinterpret_cast<char*>(row.data()), w * 2);
      if (!in) throw ParseError(path + ": truncated pixel data");
      for (int j = 0; j < w; ++j) {
        const int v = (row[2 * j] << 8) | row[2 * j + 1];
        img.at(j, i) = static_cast<double>(v) / maxval;
      }
    }
  }
  return img;
}

void save_pgm16(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 2);
  for (int i = 0; i < img.height(); ++i) {
    for (int j = 0; j < img.width(); ++j) {
      const double c = std::clamp(img.at(j, i), 0.0, 1.0);
      const auto v = static_cast<uint16_t>(std::lround(c * 65535.0));
      row[2 * j] = static_cast<uint8_t>(v >> 8);
      row[2 * j + 1] = static_cast<uint8_t>(v & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw IoError("short write to " + path);
}

Image load_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const std::string magic = next_token(in);
  if (magic != "Pf") throw ParseError(path + ": not a single-channel PFM");
  const int w = parse_int_token(in, "width");
  const int h = parse_int_token(in, "height");
  const std::string scale_tok = next_token(in);
  double scale = 0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw ParseError(path + ": bad scale token");
  }
  if (w <= 0 || h <= 0 || scale == 0)
    throw ParseError(path + ": bad dimensions or scale");
  in.get();  // single whitespace after scale
  const bool file_little = scale < 0;
  const bool swap = file_little != host_is_little_endian();

  Image img(w, h);
  std::vector<uint8_t> row(static_cast<size_t>(w) * 4);
  for (int k = 0; k < h; ++k) {
    const int i = h - 1 - k;  // rows are stored bottom-up
    in.read(reinterpret_cast<char*>(row.data()), row.size());
    if (!in) throw ParseError(path + ": truncated pixel data");
    for (int j = 0; j < w; ++j) {
      uint8_t b[4] = {row[4 * j], row[4 * j + 1], row[4 * j + 2],
                      row[4 * j + 3]};
      if (swap) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
      float f;
      std::memcpy(&f, b, 4);
      img.at(j, i) = static_cast<double>(f);
    }
  }
  return img;
}

void save_pfm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const double scale = host_is_little_endian() ? -1.0 : 1.0;
  out << "Pf\n" << img.width() << " " << img.height() << "\n" << scale << "\n";
  std::vector<float> row(static_cast<size_t>(img.width()));
  for (int k = 0; k < img.height(); ++k) {
    const int i = img.height() - 1 - k;
    for (int j = 0; j < img.width(); ++j)
      row[j] = static_cast<float>(img.at(j, i));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw IoError("short write to " + path);
}

Image load_png_gray(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("libpng init failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<uint8_t> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw ParseError(path + ": png decode failed");
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw ParseError(path + ": expected grayscale png");
  }
  if (bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    bit_depth = 8;
  }
  png_read_update_info(png, info);
  const size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * h);
  row_ptrs.resize(h);
  for (png_uint_32 i = 0; i < h; ++i) row_ptrs[i] = pixels.data() + i * rowbytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  Image img(static_cast<int>(w), static_cast<int>(h));
  if (bit_depth == 16) {
    for (png_uint_32 i = 0; i < h; ++i) {
      const uint8_t* r = pixels.data() + i * rowbytes;
      for (png_uint_32 j = 0; j < w; ++j) {
        const int v = (r[2 * j] << 8) | r[2 * j + 1];  // png 16-bit is big-endian
        img.at(static_cast<int>(j), static_cast<int>(i)) = v / 65535.0;
      }
    }
  } else {
    for (png_uint_32 i = 0; i < h; ++i) {
      const uint8_t* r = pixels.data() + i * rowbytes;
      for (png_uint_32 j = 0; j < w; ++j)
        img.at(static_cast<int>(j), static_cast<int>(i)) = r[j] / 255.0;
    }
  }
  return img;
}

void save_png_gray16(const std::string& path, const Image& img) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open " + path + " for writing");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("png encode failed for " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 2);
  for (int i = 0; i < img.height(); ++i) {
    for (int j = 0; j < img.width(); ++j) {
      const double c = std::clamp(img.at(j, i), 0.0, 1.0);
      const auto v = static_cast<uint16_t>(std::lround(c * 65535.0));
      row[2 * j] = static_cast<uint8_t>(v >> 8);
      row[2 * j + 1] = static_cast<uint8_t>(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Image load_image(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".pgm") return load_pgm(path);
  if (ext == ".pfm") return load_pfm(path);
  if (ext == ".png") return load_png_gray(path);
  throw IoError("unsupported image extension: " + path);
}

}  // namespace vo
