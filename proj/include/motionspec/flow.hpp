#pragma once

#include <span>
#include <string>
#include <vector>

#include "motionspec/image.hpp"
#include "motionspec/spectral.hpp"

namespace motionspec {

/// Level 0 is full resolution; level l+1 is ceil(level l / factor) per axis.
template <int C>
struct ImagePyramid {
  std::vector<Image<C>> levels;
  double factor = 2.0;

  int size() const noexcept { return static_cast<int>(levels.size()); }
};

/// Gaussian-smoothed, downsampled pyramid. Stops before a level would drop
/// below min_size on either axis; a small input yields a single level.
template <int C>
ImagePyramid<C> build_pyramid(const Image<C>& img, double factor, int min_size);

struct FlowParams {
  /// Smoothness weight, in units of 8-bit intensity.
  double alpha = 15.0;
  /// Relaxation sweeps per warp at each level.
  int iterations = 100;
  /// Re-linearizations (warp of the second image) per level.
  int warps = 3;
  double pyramid_factor = 2.0;
  int min_level_size = 16;
  double sor_omega = 1.9;
};

/// Coarse-to-fine Horn-Schunck flow with warping. The result maps pixel p in
/// `a` to p + flow(p) in `b`.
FlowField estimate_flow(const GrayImage& a, const GrayImage& b, const FlowParams& params = {});

/// F_t = estimate_flow(I_start, I_{start+t}) for t = 1..T (direct, not chained).
MotionTexture extract_trajectories(std::span<const GrayImage> video, int start, int horizon,
                                  const FlowParams& params = {});
MotionTexture extract_trajectories(std::span<const RgbImage> video, int start, int horizon,
                                  const FlowParams& params = {});

inline constexpr double kMaxMeanMagnitude = 8.0;
inline constexpr double kCameraMotionMagnitude = 1.0;

struct FilterVerdict {
  bool keep = true;
  std::string reason;
  /// Mean of |F_t(p)| over all t and p.
  double mean_magnitude = 0;
  /// Smallest per-pixel time-averaged magnitude.
  double min_pixel_magnitude = 0;
};

FilterVerdict filter_sample(const MotionTexture& tex);

/// Mean endpoint error over pixels at least `border` away from the edges.
double mean_endpoint_error(const FlowField& estimate, const FlowField& truth, int border = 0);

}  // namespace motionspec
