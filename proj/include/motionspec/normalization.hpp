#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "motionspec/spectral.hpp"

namespace motionspec {

inline constexpr double kDefaultPercentile = 0.95;
inline constexpr double kMinScale = 1e-8;

/// One positive scale per band, shared by Re/Im and x/y.
struct NormalizationStats {
  std::vector<double> scales;
  std::vector<double> frequencies;
  double percentile = kDefaultPercentile;
  std::size_t sample_count = 0;

  int bands() const noexcept { return static_cast<int>(scales.size()); }
};

/// Per band: the given percentile (linear interpolation between order
/// statistics) of |Re|, |Im| of S_x and S_y pooled over samples and pixels.
NormalizationStats compute_stats(std::span<const SpectralVolume> corpus, double percentile = kDefaultPercentile);

/// c -> sign(c) * sqrt(|c| / s_j), per real scalar.
SpectralVolume normalize(const SpectralVolume& vol, const NormalizationStats& stats);
/// c' -> sign(c') * c'^2 * s_j.
SpectralVolume denormalize(const SpectralVolume& vol, const NormalizationStats& stats);

double normalize_scalar(double c, double scale);
double denormalize_scalar(double c, double scale);

/// Width/height scaling used as the non-adaptive baseline.
SpectralVolume naive_scale(const SpectralVolume& vol, int width, int height);

/// Text format: "# percentile <p> samples <n>" then "band_index frequency_hz scale" per line.
void write_stats(std::ostream& out, const NormalizationStats& stats);
NormalizationStats read_stats(std::istream& in);
void write_stats(const std::filesystem::path& path, const NormalizationStats& stats);
NormalizationStats read_stats(const std::filesystem::path& path);

/// Linear-interpolation percentile of unsorted values (copied).
double percentile_of(std::vector<double> values, double fraction);

}  // namespace motionspec
