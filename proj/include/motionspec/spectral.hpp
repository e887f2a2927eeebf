#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "motionspec/error.hpp"

namespace motionspec {

inline constexpr double kDefaultFps = 30.0;
inline constexpr int kDefaultBands = 16;

struct Displacement {
  double dx = 0;
  double dy = 0;

  bool operator==(const Displacement&) const = default;
};

/// One 2D displacement map, H x W, in pixels.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  Displacement& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const Displacement& at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<Displacement> data() noexcept { return data_; }
  std::span<const Displacement> data() const noexcept { return data_; }

  bool operator==(const FlowField&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Displacement> data_;
};

/// Per-pixel displacement trajectories F_1..F_T relative to the reference frame.
/// F_0 is identically zero and not stored; frame index i holds F_{i+1}.
class MotionTexture {
 public:
  MotionTexture() = default;
  MotionTexture(int width, int height, int frames);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int frames() const noexcept { return frames_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  Displacement& at(int frame, int x, int y) { return data_[offset(frame, x, y)]; }
  const Displacement& at(int frame, int x, int y) const { return data_[offset(frame, x, y)]; }

  FlowField frame(int index) const;
  void set_frame(int index, const FlowField& flow);

  std::span<Displacement> data() noexcept { return data_; }
  std::span<const Displacement> data() const noexcept { return data_; }

  bool operator==(const MotionTexture&) const = default;

 private:
  std::size_t offset(int frame, int x, int y) const noexcept {
    return (static_cast<std::size_t>(frame) * height_ + y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int frames_ = 0;
  std::vector<Displacement> data_;
};

/// Complex Fourier coefficients of a pixel's trajectory at one band.
struct BandCoefficients {
  std::complex<double> sx;
  std::complex<double> sy;

  bool operator==(const BandCoefficients&) const = default;
};

/// Per-pixel temporal spectra, band-major: [band][y][x] -> (S_x, S_y).
///
/// Band j holds FFT bin j + 1 of the original length-T trajectory; DC is not a
/// band. The per-pixel temporal mean is carried separately so that a full
/// forward transform can be inverted exactly; it is never serialized and
/// truncation, normalization and modal simulation ignore it.
class SpectralVolume {
 public:
  SpectralVolume() = default;
  SpectralVolume(int width, int height, int bands, int frames, double fps = kDefaultFps);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int bands() const noexcept { return bands_; }
  /// Length T of the trajectories this volume was sampled from.
  int frames() const noexcept { return frames_; }
  double fps() const noexcept { return fps_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  /// Physical frequency of band j in Hz: (j + 1) * fps / T.
  double frequency(int band) const noexcept { return (band + 1) * fps_ / frames_; }
  std::vector<double> frequencies() const;

  BandCoefficients& at(int band, int x, int y) { return data_[offset(band, x, y)]; }
  const BandCoefficients& at(int band, int x, int y) const { return data_[offset(band, x, y)]; }

  std::span<BandCoefficients> band(int j);
  std::span<const BandCoefficients> band(int j) const;

  std::span<BandCoefficients> data() noexcept { return data_; }
  std::span<const BandCoefficients> data() const noexcept { return data_; }

  bool has_mean() const noexcept { return !mean_.empty(); }
  std::span<const Displacement> mean() const noexcept { return mean_; }
  void set_mean(std::vector<Displacement> mean);
  void clear_mean() { mean_.clear(); }

  bool operator==(const SpectralVolume&) const = default;

 private:
  std::size_t offset(int band, int x, int y) const noexcept {
    return (static_cast<std::size_t>(band) * height_ + y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  int bands_ = 0;
  int frames_ = 0;
  double fps_ = kDefaultFps;
  std::vector<BandCoefficients> data_;
  std::vector<Displacement> mean_;
};

/// Mean coefficient amplitude per band over a corpus, x and y separately.
struct SpectrumStats {
  std::vector<double> frequencies;
  std::vector<double> mean_amplitude_x;
  std::vector<double> mean_amplitude_y;
  std::size_t sample_count = 0;
};

/// Unnormalized forward DFT of every pixel trajectory. Keeps all T/2
/// positive-frequency bins; drops DC into the mean plane.
SpectralVolume fft_forward(const MotionTexture& tex, double fps = kDefaultFps);

/// Keeps the K lowest bands.
SpectralVolume truncate(const SpectralVolume& vol, int bands);

/// Inverse DFT scaled by 1/T with Hermitian symmetry; missing bins are zero.
MotionTexture ifft_inverse(const SpectralVolume& vol, int frames);
inline MotionTexture ifft_inverse(const SpectralVolume& vol) { return ifft_inverse(vol, vol.frames()); }

/// Direct evaluation of the inverse transform of one pixel's spectrum at frame
/// index n (0-based, i.e. F_{n+1}). Agrees with ifft_inverse; used where only a
/// few frames of a trajectory are needed.
Displacement synthesize_sample(std::span<const BandCoefficients> bands_at_pixel, int frames, int n);

SpectrumStats average_power_spectrum(std::span<const MotionTexture> corpus, double fps = kDefaultFps);
SpectrumStats average_power_spectrum(std::span<const SpectralVolume> corpus);

bool all_finite(const MotionTexture& tex);
bool all_finite(const SpectralVolume& vol);

}  // namespace motionspec
