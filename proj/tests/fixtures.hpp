#pragma once

// Synthetic scenes and small helpers shared by the unit and acceptance suites.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "motionspec/image.hpp"
#include "motionspec/spectral.hpp"

namespace motionspec::fixtures {

/// Band-limited random texture: blurred uniform noise, contrast-stretched to [0, 1].
inline GrayImage noise_texture(int width, int height, std::uint64_t seed, double blur = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  GrayImage img(width, height);
  for (auto& v : img.data()) v = u(rng);
  img = gaussian_blur(img, blur);
  float lo = 1, hi = 0;
  for (const float v : img.data()) lo = std::min(lo, v), hi = std::max(hi, v);
  for (auto& v : img.data()) v = (v - lo) / (hi - lo);
  return img;
}

/// Smooth analytic pattern; sample at any real position.
inline double pattern(double x, double y) {
  return 0.5 + 0.18 * std::sin(0.31 * x + 0.7) * std::cos(0.23 * y - 0.4) + 0.12 * std::sin(0.17 * x - 0.29 * y) +
         0.1 * std::cos(0.41 * y + 0.13 * x + 1.1) + 0.08 * std::sin(0.53 * x + 0.37 * y);
}

inline RgbImage pattern_image(int width, int height, double shift_x = 0, double shift_y = 0) {
  RgbImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double v = pattern(x - shift_x, y - shift_y);
      img.at(x, y, 0) = static_cast<float>(v);
      img.at(x, y, 1) = static_cast<float>(0.8 * v + 0.1);
      img.at(x, y, 2) = static_cast<float>(1.0 - v);
    }
  }
  return img;
}

/// b(x, y) = a(x - dx, y - dy) with clamped edges, so flow(a, b) = (dx, dy).
inline GrayImage shifted(const GrayImage& a, int dx, int dy) {
  GrayImage b(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) b.at(x, y) = a.clamped(x - dx, y - dy);
  }
  return b;
}

inline MotionTexture random_texture(int width, int height, int frames, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  MotionTexture tex(width, height, frames);
  for (auto& d : tex.data()) d = {u(rng), u(rng)};
  return tex;
}

inline SpectralVolume random_volume(int width, int height, int bands, int frames, std::uint64_t seed,
                                    double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  SpectralVolume vol(width, height, bands, frames);
  for (auto& c : vol.data()) {
    c.sx = {u(rng), u(rng)};
    c.sy = {u(rng), u(rng)};
  }
  return vol;
}

/// Trajectory per pixel built from FFT bins 1..bands with random amplitude/phase.
inline MotionTexture band_limited_texture(int width, int height, int frames, int bands, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.0, 1.0), phase(0.0, 2 * std::numbers::pi);
  MotionTexture tex(width, height, frames);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int bin = 1; bin <= bands; ++bin) {
        const double ax = amp(rng), px = phase(rng), ay = amp(rng), py = phase(rng);
        for (int n = 0; n < frames; ++n) {
          const double w = 2 * std::numbers::pi * bin * n / frames;
          tex.at(n, x, y).dx += ax * std::cos(w + px);
          tex.at(n, x, y).dy += ay * std::cos(w + py);
        }
      }
    }
  }
  return tex;
}

/// Swaying scene: a smooth displacement field whose amplitude grows toward
/// the top, oscillating as sin(2 pi k t / T) so F_0 = 0 and the temporal mean
/// is zero.
struct SwayScene {
  int width = 48;
  int height = 48;
  int frames = 40;
  int cycles = 2;
  double amplitude = 1.5;

  Displacement displacement(int t, double x, double y) const {
    const double s = std::sin(2 * std::numbers::pi * cycles * t / frames);
    const double profile = amplitude * (1.0 - y / height) * (0.75 + 0.25 * std::cos(2 * std::numbers::pi * x / width));
    return {profile * s, 0.3 * profile * s};
  }

  /// Frame t, rendered by inverse-mapping the analytic pattern through the
  /// displacement (small, smooth motion so a fixed-point solve converges).
  RgbImage frame(int t) const {
    RgbImage img(width, height);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double sx = x, sy = y;
        for (int it = 0; it < 8; ++it) {
          const auto d = displacement(t, sx, sy);
          sx = x - d.dx;
          sy = y - d.dy;
        }
        const double v = pattern(sx, sy);
        img.at(x, y, 0) = static_cast<float>(v);
        img.at(x, y, 1) = static_cast<float>(0.8 * v + 0.1);
        img.at(x, y, 2) = static_cast<float>(1.0 - v);
      }
    }
    return img;
  }

  MotionTexture truth() const {
    MotionTexture tex(width, height, frames);
    for (int t = 1; t <= frames; ++t) {
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) tex.at(t - 1, x, y) = displacement(t, x, y);
      }
    }
    return tex;
  }
};

/// Travelling waves at non-integer cycle counts over T frames, so F_T and F_1
/// disagree and the texture does not loop.
inline MotionTexture drifting_texture(int width, int height, int frames) {
  MotionTexture tex(width, height, frames);
  for (int t = 0; t < frames; ++t) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double ph = 0.3 * x + 0.2 * y;
        const double s = 2 * std::numbers::pi * (t + 1) / frames;
        tex.at(t, x, y) = {1.5 * std::sin(1.3 * s + ph), 0.8 * std::sin(2.4 * s + ph)};
      }
    }
  }
  return tex;
}

}  // namespace motionspec::fixtures
