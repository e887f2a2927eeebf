#include "motionspec/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace motionspec {

std::size_t LatentBatch::size() const noexcept {
  std::size_t n = 1;
  for (const int s : shape) n *= static_cast<std::size_t>(std::max(s, 0));
  return n;
}

LatentBatch LatentBatch::zeros(std::array<int, 5> shape, int level) {
  LatentBatch z;
  z.shape = shape;
  z.level = level;
  z.data.assign(z.size(), 0.0);
  z.validate();
  return z;
}

void LatentBatch::validate() const {
  for (const int s : shape) require(s > 0, ErrorCode::InvalidArgument, "latent shape entries must be positive");
  require(data.size() == size(), ErrorCode::InvalidArgument, "latent data does not match its shape");
  require(level >= 0, ErrorCode::InvalidArgument, "noise level must be >= 0");
}

SpatialView reshape_for_spatial(LatentBatch& batch) {
  batch.validate();
  return {{batch.batch() * batch.bands(), batch.channels(), batch.height(), batch.width()}, batch.data};
}

LatentBatch reshape_for_frequency(const SpatialView& view, int bands, int level) {
  require(bands > 0 && view.shape[0] % bands == 0, ErrorCode::InvalidArgument,
          "leading dimension " + std::to_string(view.shape[0]) + " is not a multiple of K = " +
              std::to_string(bands));
  LatentBatch z;
  z.shape = {view.shape[0] / bands, bands, view.shape[1], view.shape[2], view.shape[3]};
  z.level = level;
  require(view.data.size() == z.size(), ErrorCode::InvalidArgument, "spatial view data does not match its shape");
  z.data.assign(view.data.begin(), view.data.end());
  return z;
}

LatentBatch to_latent(const SpectralVolume& normalized) {
  auto z = LatentBatch::zeros({1, normalized.bands(), kSliceChannels, normalized.height(), normalized.width()});
  for (int k = 0; k < normalized.bands(); ++k) {
    for (int y = 0; y < normalized.height(); ++y) {
      for (int x = 0; x < normalized.width(); ++x) {
        const auto& c = normalized.at(k, x, y);
        z.data[z.index(0, k, 0, y, x)] = c.sx.real();
        z.data[z.index(0, k, 1, y, x)] = c.sx.imag();
        z.data[z.index(0, k, 2, y, x)] = c.sy.real();
        z.data[z.index(0, k, 3, y, x)] = c.sy.imag();
      }
    }
  }
  return z;
}

SpectralVolume from_latent(const LatentBatch& z, int frames, double fps, int b) {
  z.validate();
  require(z.channels() == kSliceChannels, ErrorCode::InvalidArgument, "latent must carry 4 channels per band");
  require(b >= 0 && b < z.batch(), ErrorCode::InvalidArgument, "batch index out of range");
  SpectralVolume vol(z.width(), z.height(), z.bands(), frames, fps);
  for (int k = 0; k < z.bands(); ++k) {
    for (int y = 0; y < z.height(); ++y) {
      for (int x = 0; x < z.width(); ++x) {
        auto& c = vol.at(k, x, y);
        c.sx = {z.data[z.index(b, k, 0, y, x)], z.data[z.index(b, k, 1, y, x)]};
        c.sy = {z.data[z.index(b, k, 2, y, x)], z.data[z.index(b, k, 3, y, x)]};
      }
    }
  }
  return vol;
}

NoiseSchedule::NoiseSchedule(int levels, double offset) {
  require(levels >= 1, ErrorCode::InvalidArgument, "schedule needs at least one level");
  auto f = [&](int n) {
    const double c = std::cos((static_cast<double>(n) / levels + offset) / (1 + offset) * std::numbers::pi / 2);
    return c * c;
  };
  alpha_bar_.resize(static_cast<std::size_t>(levels) + 1);
  alpha_bar_[0] = 1.0;
  const double f0 = f(0);
  for (int n = 1; n <= levels; ++n) {
    const double beta = std::min(1.0 - (f(n) / f0) / (f(n - 1) / f0), 0.999);
    alpha_bar_[n] = alpha_bar_[n - 1] * (1.0 - beta);
  }
}

double NoiseSchedule::alpha_bar(int n) const {
  require(n >= 0 && n <= levels(), ErrorCode::InvalidArgument, "noise level out of range");
  return alpha_bar_[n];
}

double NoiseSchedule::sigma(int n) const { return std::sqrt(1.0 - alpha_bar(n)); }

std::vector<int> NoiseSchedule::ddim_levels(int steps) const {
  require(steps >= 1 && steps <= levels(), ErrorCode::InvalidArgument, "DDIM steps must be in [1, N]");
  std::vector<int> out;
  for (int i = steps; i >= 0; --i) {
    const int n = static_cast<int>(std::lround(static_cast<double>(i) * levels() / steps));
    if (out.empty() || out.back() != n) out.push_back(n);
  }
  return out;
}

GaussianOracleDenoiser::GaussianOracleDenoiser(NoiseSchedule schedule, std::vector<double> cond_mean,
                                               std::vector<double> uncond_mean, double stddev)
    : schedule_(std::move(schedule)), cond_mean_(std::move(cond_mean)), uncond_mean_(std::move(uncond_mean)),
      stddev_(stddev) {
  require(cond_mean_.size() == uncond_mean_.size(), ErrorCode::InvalidArgument, "oracle means differ in size");
  require(stddev >= 0 && std::isfinite(stddev), ErrorCode::InvalidArgument, "oracle stddev must be >= 0");
}

const std::vector<double>& GaussianOracleDenoiser::mean(const Condition& cond) const {
  return cond.is_null() ? uncond_mean_ : cond_mean_;
}

std::vector<double> GaussianOracleDenoiser::predict(const LatentBatch& z, const Condition& cond) const {
  const auto& mu = mean(cond);
  require(z.data.size() % mu.size() == 0, ErrorCode::DimensionMismatch, "latent does not match oracle mean");
  // z = sqrt(ab) x0 + sigma eps with x0 ~ N(mu, s^2): E[eps | z] is affine in z.
  const double ab = schedule_.alpha_bar(z.level);
  const double sigma = std::sqrt(1.0 - ab);
  const double var = ab * stddev_ * stddev_ + (1.0 - ab);
  const double root_ab = std::sqrt(ab);
  std::vector<double> eps(z.data.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    eps[i] = var > 0 ? sigma * (z.data[i] - root_ab * mu[i % mu.size()]) / var : 0.0;
  }
  return eps;
}

void GuidanceConfig::validate() const {
  require(steps >= 1, ErrorCode::InvalidArgument, "DDIM steps must be >= 1");
  require(recurrence >= 0, ErrorCode::InvalidArgument, "self-recurrence must be >= 0");
  require(std::isfinite(cfg_weight) && std::isfinite(loop_weight), ErrorCode::InvalidArgument,
          "guidance weights must be finite");
  require(fd_step > 0, ErrorCode::InvalidArgument, "finite-difference step must be positive");
}

GuidanceConfig GuidanceConfig::generation() { return {}; }

GuidanceConfig GuidanceConfig::looping() {
  GuidanceConfig cfg;
  cfg.cfg_weight = 1.75;
  cfg.loop_weight = 200.0;
  cfg.steps = 500;
  cfg.recurrence = 2;
  return cfg;
}

double loop_loss(const MotionTexture& tex) {
  require(tex.frames() >= 2, ErrorCode::InvalidArgument, "loop loss needs T >= 2");
  const int last = tex.frames() - 1;
  double loss = 0;
  for (int y = 0; y < tex.height(); ++y) {
    for (int x = 0; x < tex.width(); ++x) {
      const auto& f1 = tex.at(0, x, y);
      const auto& f2 = tex.at(1, x, y);
      const auto& fp = tex.at(last - 1, x, y);
      const auto& ft = tex.at(last, x, y);
      loss += std::abs(ft.dx - f1.dx) + std::abs(ft.dy - f1.dy);
      loss += std::abs((ft.dx - fp.dx) - (f2.dx - f1.dx)) + std::abs((ft.dy - fp.dy) - (f2.dy - f1.dy));
    }
  }
  return loss;
}

MotionTexture decode_latent(const LatentBatch& z, const DecodeContext& ctx, int b) {
  return ifft_inverse(denormalize(from_latent(z, ctx.frames, ctx.fps, b), ctx.stats), ctx.frames);
}

double decoded_loop_loss(const LatentBatch& z, const DecodeContext& ctx, int b) {
  return loop_loss(decode_latent(z, ctx, b));
}

namespace {

// Contribution of one pixel to L_g. The loss only reads F_1, F_2, F_{T-1}
// and F_T, and each pixel's trajectory depends only on its own coefficients.
double pixel_loop_loss(const LatentBatch& z, const DecodeContext& ctx, int b, int y, int x,
                       std::vector<BandCoefficients>& scratch) {
  const int bands = z.bands();
  scratch.resize(static_cast<std::size_t>(bands));
  for (int k = 0; k < bands; ++k) {
    const double s = ctx.stats.scales[k];
    auto d = [&](int c) { return denormalize_scalar(z.data[z.index(b, k, c, y, x)], s); };
    scratch[k].sx = {d(0), d(1)};
    scratch[k].sy = {d(2), d(3)};
  }
  const int t = ctx.frames;
  const auto f1 = synthesize_sample(scratch, t, 0);
  const auto f2 = synthesize_sample(scratch, t, 1);
  const auto fp = synthesize_sample(scratch, t, t - 2);
  const auto ft = synthesize_sample(scratch, t, t - 1);
  return std::abs(ft.dx - f1.dx) + std::abs(ft.dy - f1.dy) + std::abs((ft.dx - fp.dx) - (f2.dx - f1.dx)) +
         std::abs((ft.dy - fp.dy) - (f2.dy - f1.dy));
}

}  // namespace

std::vector<double> loop_gradient(const LatentBatch& z, const DecodeContext& ctx, double h, std::size_t first,
                                  std::size_t count) {
  z.validate();
  require(ctx.stats.bands() == z.bands(), ErrorCode::InvalidArgument, "decode stats do not match latent bands");
  require(ctx.frames >= 2 * z.bands() && ctx.frames >= 2, ErrorCode::InvalidArgument, "decode T aliases bands");
  require(h > 0, ErrorCode::InvalidArgument, "finite-difference step must be positive");
  const std::size_t total = z.size();
  if (count == 0 || count > total) count = total;

  std::vector<double> grad(total, 0.0);
  LatentBatch probe = z;
  std::vector<BandCoefficients> scratch;
  const std::size_t plane = static_cast<std::size_t>(z.height()) * z.width();
  for (std::size_t offset = 0; offset < count; ++offset) {
    const std::size_t i = (first + offset) % total;
    const std::size_t pixel = i % plane;
    const int y = static_cast<int>(pixel / z.width());
    const int x = static_cast<int>(pixel % z.width());
    const int b = static_cast<int>(i / (plane * z.channels() * z.bands()));
    const double saved = probe.data[i];
    probe.data[i] = saved + h;
    const double up = pixel_loop_loss(probe, ctx, b, y, x, scratch);
    probe.data[i] = saved - h;
    const double down = pixel_loop_loss(probe, ctx, b, y, x, scratch);
    probe.data[i] = saved;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

std::vector<double> guided_epsilon(const LatentBatch& z, const NoiseSchedule& schedule, const Denoiser& denoiser,
                                   const Condition& cond, const GuidanceConfig& cfg,
                                   std::span<const double> loop_grad) {
  auto eps = denoiser.predict(z, cond);
  require(eps.size() == z.data.size(), ErrorCode::DimensionMismatch, "denoiser changed the latent shape");
  if (cfg.cfg_weight != 0.0) {
    const auto uncond = denoiser.predict(z, Condition::none());
    require(uncond.size() == eps.size(), ErrorCode::DimensionMismatch, "denoiser changed the latent shape");
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (1 + cfg.cfg_weight) * eps[i] - cfg.cfg_weight * uncond[i];
  }
  if (cfg.loop_weight != 0.0 && !loop_grad.empty()) {
    require(loop_grad.size() == eps.size(), ErrorCode::DimensionMismatch, "loop gradient shape mismatch");
    const double gain = cfg.loop_weight * schedule.sigma(z.level);
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] += gain * loop_grad[i];
  }
  return eps;
}

LatentBatch ddim_update(const LatentBatch& z, std::span<const double> eps, const NoiseSchedule& schedule,
                        int next_level) {
  require(eps.size() == z.data.size(), ErrorCode::DimensionMismatch, "noise estimate shape mismatch");
  require(next_level < z.level, ErrorCode::InvalidArgument, "DDIM must move to a lower noise level");
  const double ab = schedule.alpha_bar(z.level);
  const double ab_next = schedule.alpha_bar(next_level);
  const double root_ab = std::sqrt(ab);
  const double sigma = std::sqrt(1.0 - ab);
  const double root_next = std::sqrt(ab_next);
  const double sigma_next = std::sqrt(1.0 - ab_next);
  LatentBatch out = z;
  out.level = next_level;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double x0 = (z.data[i] - sigma * eps[i]) / root_ab;
    out.data[i] = root_next * x0 + sigma_next * eps[i];
  }
  return out;
}

namespace {

int next_level_on(const std::vector<int>& levels, int level) {
  const auto it = std::find(levels.begin(), levels.end(), level);
  require(it != levels.end() && std::next(it) != levels.end(), ErrorCode::InvalidArgument,
          "noise level " + std::to_string(level) + " is not on the DDIM schedule");
  return *std::next(it);
}

LatentBatch guided_step(const LatentBatch& z, const NoiseSchedule& schedule, const Denoiser& denoiser,
                        const Condition& cond, const GuidanceConfig& cfg, const DecodeContext* decode,
                        std::size_t step_index, int next_level) {
  auto eps = guided_epsilon(z, schedule, denoiser, cond, cfg, {});
  if (cfg.loop_weight != 0.0) {
    require(decode != nullptr, ErrorCode::InvalidArgument, "loop guidance needs a decode context");
    // Differentiate the loss of the clean sample predicted at this level.
    LatentBatch predicted = z;
    const double root_ab = std::sqrt(schedule.alpha_bar(z.level));
    const double sigma = schedule.sigma(z.level);
    for (std::size_t i = 0; i < eps.size(); ++i) predicted.data[i] = (z.data[i] - sigma * eps[i]) / root_ab;
    const std::size_t block = cfg.fd_block == 0 ? z.size() : cfg.fd_block;
    const auto grad = loop_gradient(predicted, *decode, cfg.fd_step, (step_index * block) % z.size(), block);
    const double gain = cfg.loop_weight * sigma;
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] += gain * grad[i];
  }
  return ddim_update(z, eps, schedule, next_level);
}

}  // namespace

LatentBatch ddim_step(const LatentBatch& z, const NoiseSchedule& schedule, const Denoiser& denoiser,
                      const Condition& cond, const GuidanceConfig& cfg, const DecodeContext* decode,
                      std::size_t step_index) {
  cfg.validate();
  z.validate();
  if (z.level == 0) return z;
  const auto levels = schedule.ddim_levels(cfg.steps);
  return guided_step(z, schedule, denoiser, cond, cfg, decode, step_index, next_level_on(levels, z.level));
}

LatentBatch sample(std::array<int, 5> shape, const NoiseSchedule& schedule, const Denoiser& denoiser,
                   const Condition& cond, const GuidanceConfig& cfg, const DecodeContext* decode) {
  cfg.validate();
  const auto levels = schedule.ddim_levels(cfg.steps);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto z = LatentBatch::zeros(shape, levels.front());
  for (auto& v : z.data) v = normal(rng);

  for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
    const int from = levels[i];
    const int to = levels[i + 1];
    // Self-recurrence: re-noise the result back to `from` and redo the step.
    const double ratio = schedule.alpha_bar(from) / schedule.alpha_bar(to);
    const double keep = std::sqrt(ratio);
    const double fresh = std::sqrt(std::max(0.0, 1.0 - ratio));
    LatentBatch current = z;
    LatentBatch next;
    for (int r = 0; r <= cfg.recurrence; ++r) {
      next = guided_step(current, schedule, denoiser, cond, cfg, decode, i, to);
      if (r == cfg.recurrence) break;
      current = next;
      current.level = from;
      for (auto& v : current.data) v = keep * v + fresh * normal(rng);
    }
    z = std::move(next);
  }
  return z;
}

SpectralVolume sample_looping(const Denoiser& denoiser, const Condition& cond, const GuidanceConfig& cfg,
                              const DecodeContext& decode, int width, int height, const NoiseSchedule& schedule) {
  const auto z = sample({1, decode.stats.bands(), kSliceChannels, height, width}, schedule, denoiser, cond, cfg,
                        &decode);
  return from_latent(z, decode.frames, decode.fps);
}

}  // namespace motionspec
