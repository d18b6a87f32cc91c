#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace panoloc {

template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative image size");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(int w, int h) const { return width_ == w && height_ == h; }
  template <typename U>
  bool same_shape(const Image<U>& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Class indices, 0 = void.
using SemanticImage = Image<std::uint8_t>;
// Ray distance in meters, 0 = no hit.
using DepthImage = Image<float>;
// World-frame unit normals facing the camera; zero where no hit.
using NormalImage = Image<Eigen::Vector3f>;
using BinaryImage = Image<std::uint8_t>;

// Pixel counts per class index, size kNumClasses.
std::vector<std::size_t> class_histogram(const SemanticImage& img);

// PNG codecs. Semantic: 8-bit gray of class indices. Depth: 16-bit gray in
// millimeters (0 = no hit, saturates at 65.535 m). Normals: 8-bit RGB,
// round((n + 1) / 2 * 255).
void write_semantic_png(const std::string& path, const SemanticImage& img);
SemanticImage read_semantic_png(const std::string& path);
void write_depth_png(const std::string& path, const DepthImage& img);
DepthImage read_depth_png(const std::string& path);
void write_normal_png(const std::string& path, const NormalImage& img);
NormalImage read_normal_png(const std::string& path);

using RgbImage = Image<std::array<std::uint8_t, 3>>;
void write_rgb_png(const std::string& path, const RgbImage& img);
RgbImage read_rgb_png(const std::string& path);

}  // namespace panoloc
