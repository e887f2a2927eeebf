#include "motionspec/image.hpp"

#include <string>

namespace motionspec {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::DataError: return "DATA_ERROR";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::NotFound: return "NOT_FOUND";
  }
  return "UNKNOWN";
}

GrayImage to_gray(const RgbImage& rgb) {
  GrayImage out(rgb.width(), rgb.height());
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      out.at(x, y) = 0.299f * rgb.at(x, y, 0) + 0.587f * rgb.at(x, y, 1) + 0.114f * rgb.at(x, y, 2);
    }
  }
  return out;
}

namespace {

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

}  // namespace

template <int C>
Image<C> gaussian_blur(const Image<C>& img, double sigma) {
  if (sigma <= 0) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Image<C> tmp(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < C; ++c) {
        float acc = 0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img.clamped(x + i, y, c);
        tmp.at(x, y, c) = acc;
      }
    }
  }
  Image<C> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < C; ++c) {
        float acc = 0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.clamped(x, y + i, c);
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

template <int C>
Image<C> resize_bilinear(const Image<C>& img, int width, int height) {
  if (width == img.width() && height == img.height()) return img;
  Image<C> out(width, height);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double srcy = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < width; ++x) {
      const double srcx = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < C; ++c) out.at(x, y, c) = img.bilinear(srcx, srcy, c);
    }
  }
  return out;
}

template GrayImage gaussian_blur(const GrayImage&, double);
template RgbImage gaussian_blur(const RgbImage&, double);
template GrayImage resize_bilinear(const GrayImage&, int, int);
template RgbImage resize_bilinear(const RgbImage&, int, int);

}  // namespace motionspec
