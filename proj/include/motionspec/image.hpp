#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "motionspec/error.hpp"

namespace motionspec {

/// Row-major float image with interleaved channels. Values are nominally in [0, 1].
template <int Channels>
class Image {
 public:
  static constexpr int kChannels = Channels;

  Image() = default;
  Image(int width, int height, float fill = 0.0f)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height * Channels, fill) {
    require(width > 0 && height > 0, ErrorCode::InvalidArgument, "image dimensions must be positive");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  /// Clamp-to-edge read.
  float clamped(int x, int y, int c = 0) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return data_[index(x, y, c)];
  }

  /// Bilinear sample with clamp-to-edge addressing.
  float bilinear(double x, double y, int c = 0) const {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const float ax = static_cast<float>(x - fx);
    const float ay = static_cast<float>(y - fy);
    const float top = (1 - ax) * clamped(x0, y0, c) + ax * clamped(x0 + 1, y0, c);
    const float bot = (1 - ax) * clamped(x0, y0 + 1, c) + ax * clamped(x0 + 1, y0 + 1, c);
    return (1 - ay) * top + ay * bot;
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

using GrayImage = Image<1>;
using RgbImage = Image<3>;

/// ITU-R BT.601 luma.
GrayImage to_gray(const RgbImage& rgb);

template <int C>
bool same_size(const Image<C>& a, const Image<C>& b) {
  return a.width() == b.width() && a.height() == b.height();
}

/// Separable Gaussian blur, clamp-to-edge.
template <int C>
Image<C> gaussian_blur(const Image<C>& img, double sigma);

/// Resample to the given size; sample centers are aligned (pixel-area convention).
template <int C>
Image<C> resize_bilinear(const Image<C>& img, int width, int height);

}  // namespace motionspec
