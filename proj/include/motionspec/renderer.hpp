#pragma once

#include <span>
#include <vector>

#include "motionspec/image.hpp"
#include "motionspec/spectral.hpp"

namespace motionspec {

/// Per-pixel splat weight W(p) >= 0, the mean trajectory magnitude.
struct SplatWeights {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

enum class HoleFill { Diffusion, GlobalMean };

struct RenderConfig {
  int levels = 3;
  double beta = 1.0;
  HoleFill hole_fill = HoleFill::Diffusion;
  double magnification = 1.0;
  int slow_motion = 1;

  void validate() const;
};

inline constexpr double kMaxSoftmaxExponent = 20.0;
inline constexpr int kHoleFillIterations = 64;
/// Neighbors within this much of the lowest W count as background when filling.
inline constexpr double kDepthTolerance = 0.25;

SplatWeights compute_weights(const MotionTexture& tex);
SplatWeights uniform_weights(int width, int height, double value = 0.0);

struct SplatResult {
  RgbImage image;
  std::vector<bool> covered;
  std::vector<double> weight_sum;
  /// Softmax-weighted mean W of the contributors; 0 where uncovered.
  std::vector<double> depth;

  double coverage() const;
};

/// Forward warp with bilinear distribution; contributions weigh
/// exp(min(beta * W, 20)) times the bilinear coefficient.
SplatResult softmax_splat(const RgbImage& src, const FlowField& flow, const SplatWeights& weights, double beta);

/// Fills uncovered pixels in place; marks them covered. With a depth map,
/// diffusion only averages the lowest-W covered neighbors so disocclusions
/// take background colors.
void fill_holes(RgbImage& img, std::vector<bool>& covered, HoleFill strategy, std::vector<double> depth = {});

/// Multi-scale splat + coarse-to-fine compositing + hole fill. Always fully covered.
RgbImage synthesize_frame(const RgbImage& source, const FlowField& flow, const SplatWeights& weights,
                          const RenderConfig& config = {});

/// k*T maps; map j (1-based) is the linear interpolation at time j/k with F_0 = 0.
MotionTexture interpolate_texture(const MotionTexture& tex, int factor);
MotionTexture magnify(const MotionTexture& tex, double factor);

/// Renders frames 1..T (or k*T with slow motion).
std::vector<RgbImage> animate(const RgbImage& source, const MotionTexture& tex, const RenderConfig& config = {});

}  // namespace motionspec
