// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "vo/core/errors.hpp"

namespace vo {

// Dense w x h grid of doubles, row-major, origin at the top-left,
// x right, y down. Used for intensity images, depth maps and all
// per-pixel scalar fields.
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y) { return data_[idx(x, y)]; }
  double at(int x, int y) const { return data_[idx(x, y)]; }
  double& operator()(int x, int y) { return at(x, y); }
  double operator()(int x, int y) const { return at(x, y); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  bool same_size(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  void fill(double v) { data_.assign(data_.size(), v); }

 private:
  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Byte mask, same layout as Image. Nonzero = valid.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v) {
    data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }

  std::uint8_t* data() { return data_.data(); }
  const std::uint8_t* data() const { return data_.data(); }

  bool same_size(const Mask& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }

  int count() const {
    int n = 0;
    for (auto v : data_) n += v != 0;
    return n;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Intensity images must hold finite values in [0, 1].
inline void validate_intensity(const Image& img) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double v = img.at(x, y);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        throw NonPositiveInput("intensity out of [0,1] at pixel");
    }
}

}  // namespace vo
