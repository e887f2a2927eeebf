#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "motionspec/image.hpp"
#include "motionspec/normalization.hpp"
#include "motionspec/spectral.hpp"

namespace motionspec {

/// Channels per frequency slice: Re S_x, Im S_x, Re S_y, Im S_y.
inline constexpr int kSliceChannels = 4;
inline constexpr int kTrainingLevels = 1000;

/// Frequency-coordinated latent tensor (B, K, C, H, W), row-major, at noise
/// level `level` of the training grid.
struct LatentBatch {
  std::array<int, 5> shape{1, 1, kSliceChannels, 1, 1};
  std::vector<double> data;
  int level = 0;

  int batch() const noexcept { return shape[0]; }
  int bands() const noexcept { return shape[1]; }
  int channels() const noexcept { return shape[2]; }
  int height() const noexcept { return shape[3]; }
  int width() const noexcept { return shape[4]; }
  std::size_t size() const noexcept;

  std::size_t index(int b, int k, int c, int y, int x) const noexcept {
    return ((((static_cast<std::size_t>(b) * shape[1] + k) * shape[2] + c) * shape[3] + y) * shape[4]) + x;
  }

  static LatentBatch zeros(std::array<int, 5> shape, int level = 0);
  void validate() const;
};

/// The (B*K, C, H, W) view seen by per-slice spatial layers; shares storage.
struct SpatialView {
  std::array<int, 4> shape{};
  std::span<double> data;

  std::size_t index(int n, int c, int y, int x) const noexcept {
    return (((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3]) + x;
  }
};

/// (b, k, c, y, x) <-> (b*K + k, c, y, x).
SpatialView reshape_for_spatial(LatentBatch& batch);
/// Reinterprets a spatial view as (B, K, C, H, W); the copy owns its data.
LatentBatch reshape_for_frequency(const SpatialView& view, int bands, int level = 0);

LatentBatch to_latent(const SpectralVolume& normalized);
/// Batch element `b` back into a volume with the given trajectory metadata.
SpectralVolume from_latent(const LatentBatch& z, int frames, double fps, int b = 0);

/// Cosine alpha-bar schedule over the training grid n = 0..N; n = 0 is clean.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(int levels = kTrainingLevels, double offset = 0.008);

  int levels() const noexcept { return static_cast<int>(alpha_bar_.size()) - 1; }
  double alpha_bar(int n) const;
  /// Noise magnitude sqrt(1 - alpha_bar).
  double sigma(int n) const;

  /// Uniform DDIM subsequence, descending, ending with 0.
  std::vector<int> ddim_levels(int steps) const;

 private:
  std::vector<double> alpha_bar_;
};

/// Conditioning signal; a null image is the unconditional branch.
struct Condition {
  const RgbImage* image = nullptr;

  bool is_null() const noexcept { return image == nullptr; }
  static Condition none() { return {}; }
};

/// eps(z; n, c). Must preserve shape and be deterministic.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::vector<double> predict(const LatentBatch& z, const Condition& cond) const = 0;
};

/// Exact noise predictor for data distributed as N(mean, stddev^2 I) per
/// element; separate means for the conditional and unconditional branches.
class GaussianOracleDenoiser final : public Denoiser {
 public:
  GaussianOracleDenoiser(NoiseSchedule schedule, std::vector<double> cond_mean, std::vector<double> uncond_mean,
                         double stddev);

  std::vector<double> predict(const LatentBatch& z, const Condition& cond) const override;
  const std::vector<double>& mean(const Condition& cond) const;

 private:
  NoiseSchedule schedule_;
  std::vector<double> cond_mean_;
  std::vector<double> uncond_mean_;
  double stddev_;
};

struct GuidanceConfig {
  double cfg_weight = 1.75;      // w
  double loop_weight = 0.0;      // u
  int steps = 250;
  int recurrence = 0;
  /// Central-difference step for the loop gradient, normalized units.
  double fd_step = 1e-3;
  /// Coordinates differentiated per step; 0 means all of them.
  std::size_t fd_block = 0;
  std::uint64_t seed = 0;

  void validate() const;

  static GuidanceConfig generation();
  static GuidanceConfig looping();
};

/// What the decode chain needs: stats to undo normalization and T for the inverse FFT.
struct DecodeContext {
  NormalizationStats stats;
  int frames = 0;
  double fps = kDefaultFps;
};

/// L_g = |F_T - F_1|_1 + |(F_T - F_{T-1}) - (F_2 - F_1)|_1 over all pixels and axes.
double loop_loss(const MotionTexture& tex);

/// denormalize -> inverse FFT -> L_g for batch element `b` of z.
double decoded_loop_loss(const LatentBatch& z, const DecodeContext& ctx, int b = 0);
MotionTexture decode_latent(const LatentBatch& z, const DecodeContext& ctx, int b = 0);

/// Central finite differences of decoded_loop_loss w.r.t. z. Only coordinates
/// in [first, first + count) (cyclic) are differentiated; the rest are zero.
std::vector<double> loop_gradient(const LatentBatch& z, const DecodeContext& ctx, double h,
                                  std::size_t first = 0, std::size_t count = 0);

/// (1 + w) eps(z; c) - w eps(z; null) + u sigma^n loop_grad. `loop_grad` may be
/// empty when u == 0.
std::vector<double> guided_epsilon(const LatentBatch& z, const NoiseSchedule& schedule, const Denoiser& denoiser,
                                   const Condition& cond, const GuidanceConfig& cfg,
                                   std::span<const double> loop_grad);

/// Deterministic DDIM update from z.level to `next_level` given a noise estimate.
LatentBatch ddim_update(const LatentBatch& z, std::span<const double> eps, const NoiseSchedule& schedule,
                        int next_level);

/// One guided DDIM step along the schedule's subsequence for cfg.steps.
/// Returns z unchanged at level 0; rejects levels not on the subsequence.
LatentBatch ddim_step(const LatentBatch& z, const NoiseSchedule& schedule, const Denoiser& denoiser,
                      const Condition& cond, const GuidanceConfig& cfg, const DecodeContext* decode = nullptr,
                      std::size_t step_index = 0);

/// Full sampling run from seeded Gaussian noise with per-step self-recurrence.
/// Returns the final latent at level 0 (normalized spectral domain).
LatentBatch sample(std::array<int, 5> shape, const NoiseSchedule& schedule, const Denoiser& denoiser,
                   const Condition& cond, const GuidanceConfig& cfg, const DecodeContext* decode = nullptr);

/// sample() with loop guidance, returned as a normalized volume.
SpectralVolume sample_looping(const Denoiser& denoiser, const Condition& cond, const GuidanceConfig& cfg,
                              const DecodeContext& decode, int width, int height,
                              const NoiseSchedule& schedule = NoiseSchedule());

}  // namespace motionspec
