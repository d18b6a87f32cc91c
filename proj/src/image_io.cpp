#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include <png.h>

#include "panoloc/image.hpp"
#include "panoloc/scene.hpp"

namespace panoloc {

std::vector<std::size_t> class_histogram(const SemanticImage& img) {
  std::vector<std::size_t> hist(kNumClasses, 0);
  for (std::uint8_t c : img.data()) {
    if (c < kNumClasses) ++hist[c];
  }
  return hist;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Rows are packed big-endian for 16-bit samples, as PNG stores them.
void write_png(const std::string& path, int width, int height, int bit_depth, int color_type,
               const std::vector<std::uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct RawPng {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<std::uint8_t> bytes;
};

RawPng read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open for reading: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  RawPng raw;
  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.bit_depth = png_get_bit_depth(png, info);
  raw.color_type = png_get_color_type(png, info);
  if (raw.color_type == PNG_COLOR_TYPE_PALETTE || raw.bit_depth < 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported png layout (palette or sub-byte): " + path);
  }
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.bytes.resize(stride * raw.height);
  for (int y = 0; y < raw.height; ++y) png_read_row(png, raw.bytes.data() + y * stride, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void expect_layout(const RawPng& raw, int bit_depth, int color_type, const std::string& path) {
  if (raw.bit_depth != bit_depth || raw.color_type != color_type) {
    throw std::runtime_error("unexpected png format in " + path);
  }
}

}  // namespace

void write_semantic_png(const std::string& path, const SemanticImage& img) {
  write_png(path, img.width(), img.height(), 8, PNG_COLOR_TYPE_GRAY, img.data());
}

SemanticImage read_semantic_png(const std::string& path) {
  RawPng raw = read_png(path);
  expect_layout(raw, 8, PNG_COLOR_TYPE_GRAY, path);
  SemanticImage img(raw.width, raw.height);
  img.data() = std::move(raw.bytes);
  return img;
}

void write_depth_png(const std::string& path, const DepthImage& img) {
  std::vector<std::uint8_t> bytes(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double mm = std::round(static_cast<double>(img.data()[i]) * 1000.0);
    const auto q = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
    bytes[2 * i] = static_cast<std::uint8_t>(q >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
  }
  write_png(path, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY, bytes);
}

DepthImage read_depth_png(const std::string& path) {
  RawPng raw = read_png(path);
  expect_layout(raw, 16, PNG_COLOR_TYPE_GRAY, path);
  DepthImage img(raw.width, raw.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const int q = (raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1];
    img.data()[i] = static_cast<float>(q / 1000.0);
  }
  return img;
}

void write_normal_png(const std::string& path, const NormalImage& img) {
  std::vector<std::uint8_t> bytes(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double m = std::round((img.data()[i][c] + 1.0) / 2.0 * 255.0);
      bytes[3 * i + c] = static_cast<std::uint8_t>(std::clamp(m, 0.0, 255.0));
    }
  }
  write_png(path, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, bytes);
}

NormalImage read_normal_png(const std::string& path) {
  RawPng raw = read_png(path);
  expect_layout(raw, 8, PNG_COLOR_TYPE_RGB, path);
  NormalImage img(raw.width, raw.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) img.data()[i][c] = static_cast<float>(raw.bytes[3 * i + c] / 255.0 * 2.0 - 1.0);
  }
  return img;
}

void write_rgb_png(const std::string& path, const RgbImage& img) {
  std::vector<std::uint8_t> bytes(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) bytes[3 * i + c] = img.data()[i][c];
  }
  write_png(path, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, bytes);
}

RgbImage read_rgb_png(const std::string& path) {
  RawPng raw = read_png(path);
  expect_layout(raw, 8, PNG_COLOR_TYPE_RGB, path);
  RgbImage img(raw.width, raw.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) img.data()[i][c] = raw.bytes[3 * i + c];
  }
  return img;
}

}  // namespace panoloc
