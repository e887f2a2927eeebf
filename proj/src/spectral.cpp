#include "motionspec/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace motionspec {

FlowField::FlowField(int width, int height)
    : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height) {
  require(width > 0 && height > 0, ErrorCode::InvalidArgument, "flow field dimensions must be positive");
}

MotionTexture::MotionTexture(int width, int height, int frames)
    : width_(width), height_(height), frames_(frames),
      data_(static_cast<std::size_t>(width) * height * frames) {
  require(width > 0 && height > 0 && frames > 0, ErrorCode::InvalidArgument,
          "motion texture dimensions must be positive");
}

FlowField MotionTexture::frame(int index) const {
  require(index >= 0 && index < frames_, ErrorCode::InvalidArgument, "frame index out of range");
  FlowField out(width_, height_);
  const auto src = data().subspan(static_cast<std::size_t>(index) * pixel_count(), pixel_count());
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

void MotionTexture::set_frame(int index, const FlowField& flow) {
  require(index >= 0 && index < frames_, ErrorCode::InvalidArgument, "frame index out of range");
  require(flow.width() == width_ && flow.height() == height_, ErrorCode::DimensionMismatch,
          "flow field does not match texture dimensions");
  std::copy(flow.data().begin(), flow.data().end(),
            data_.begin() + static_cast<std::ptrdiff_t>(index * pixel_count()));
}

SpectralVolume::SpectralVolume(int width, int height, int bands, int frames, double fps)
    : width_(width), height_(height), bands_(bands), frames_(frames), fps_(fps),
      data_(static_cast<std::size_t>(width) * height * bands) {
  require(width > 0 && height > 0, ErrorCode::InvalidArgument, "volume dimensions must be positive");
  require(bands > 0, ErrorCode::InvalidArgument, "volume needs at least one band");
  require(frames >= 2 * bands, ErrorCode::InvalidArgument, "band count exceeds T/2");
  require(fps > 0 && std::isfinite(fps), ErrorCode::InvalidArgument, "frame rate must be positive");
}

std::vector<double> SpectralVolume::frequencies() const {
  std::vector<double> f(bands_);
  for (int j = 0; j < bands_; ++j) f[j] = frequency(j);
  return f;
}

std::span<BandCoefficients> SpectralVolume::band(int j) {
  return std::span(data_).subspan(static_cast<std::size_t>(j) * pixel_count(), pixel_count());
}

std::span<const BandCoefficients> SpectralVolume::band(int j) const {
  return std::span(data_).subspan(static_cast<std::size_t>(j) * pixel_count(), pixel_count());
}

void SpectralVolume::set_mean(std::vector<Displacement> mean) {
  require(mean.empty() || mean.size() == pixel_count(), ErrorCode::DimensionMismatch,
          "mean plane does not match volume dimensions");
  mean_ = std::move(mean);
}

bool all_finite(const MotionTexture& tex) {
  for (const auto& d : tex.data()) {
    if (!std::isfinite(d.dx) || !std::isfinite(d.dy)) return false;
  }
  return true;
}

bool all_finite(const SpectralVolume& vol) {
  auto finite = [](std::complex<double> c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); };
  for (const auto& b : vol.data()) {
    if (!finite(b.sx) || !finite(b.sy)) return false;
  }
  return true;
}

namespace {

// The FFTW planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
struct PlanDestroy {
  void operator()(fftw_plan p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanPtr = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDestroy>;

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
  if (p == nullptr) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwFree>(p);
}

}  // namespace

SpectralVolume fft_forward(const MotionTexture& tex, double fps) {
  require(tex.frames() >= 2, ErrorCode::InvalidArgument, "fft_forward needs T >= 2");
  require(all_finite(tex), ErrorCode::DataError, "motion texture contains non-finite values");

  const int frames = tex.frames();
  const int bins = frames / 2 + 1;
  // Every (pixel, axis) series is one transform; consecutive samples of a
  // series are one frame apart in memory.
  const int series = static_cast<int>(tex.pixel_count() * 2);

  auto in = fftw_buffer<double>(static_cast<std::size_t>(frames) * series);
  auto out = fftw_buffer<fftw_complex>(static_cast<std::size_t>(bins) * series);
  const auto src = tex.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    in[2 * i] = src[i].dx;
    in[2 * i + 1] = src[i].dy;
  }

  PlanPtr plan;
  {
    std::lock_guard lock(planner_mutex());
    int n[] = {frames};
    plan.reset(fftw_plan_many_dft_r2c(1, n, series, in.get(), nullptr, series, 1, out.get(), nullptr,
                                      series, 1, FFTW_ESTIMATE | FFTW_PRESERVE_INPUT));
  }
  require(plan != nullptr, ErrorCode::DataError, "failed to plan forward FFT");
  fftw_execute(plan.get());

  SpectralVolume vol(tex.width(), tex.height(), frames / 2, frames, fps);
  const std::size_t pixels = tex.pixel_count();
  for (int j = 0; j < vol.bands(); ++j) {
    auto band = vol.band(j);
    const fftw_complex* row = out.get() + static_cast<std::size_t>(j + 1) * series;
    for (std::size_t p = 0; p < pixels; ++p) {
      band[p].sx = {row[2 * p][0], row[2 * p][1]};
      band[p].sy = {row[2 * p + 1][0], row[2 * p + 1][1]};
    }
  }
  std::vector<Displacement> mean(pixels);
  for (std::size_t p = 0; p < pixels; ++p) {
    mean[p] = {out[2 * p][0] / frames, out[2 * p + 1][0] / frames};
  }
  vol.set_mean(std::move(mean));
  return vol;
}

SpectralVolume truncate(const SpectralVolume& vol, int bands) {
  require(bands > 0, ErrorCode::InvalidArgument, "truncate needs K >= 1");
  require(bands <= vol.bands(), ErrorCode::InvalidArgument,
          "cannot truncate to " + std::to_string(bands) + " bands from " + std::to_string(vol.bands()));
  SpectralVolume out(vol.width(), vol.height(), bands, vol.frames(), vol.fps());
  for (int j = 0; j < bands; ++j) {
    const auto src = vol.band(j);
    std::copy(src.begin(), src.end(), out.band(j).begin());
  }
  if (vol.has_mean()) out.set_mean({vol.mean().begin(), vol.mean().end()});
  return out;
}

MotionTexture ifft_inverse(const SpectralVolume& vol, int frames) {
  require(frames >= 2 * vol.bands(), ErrorCode::InvalidArgument,
          "T = " + std::to_string(frames) + " aliases " + std::to_string(vol.bands()) + " bands");
  require(all_finite(vol), ErrorCode::DataError, "spectral volume contains non-finite values");

  const int bins = frames / 2 + 1;
  const std::size_t pixels = vol.pixel_count();
  const int series = static_cast<int>(pixels * 2);

  auto in = fftw_buffer<fftw_complex>(static_cast<std::size_t>(bins) * series);
  auto out = fftw_buffer<double>(static_cast<std::size_t>(frames) * series);
  std::fill_n(&in[0][0], static_cast<std::size_t>(bins) * series * 2, 0.0);
  if (vol.has_mean()) {
    for (std::size_t p = 0; p < pixels; ++p) {
      in[2 * p][0] = vol.mean()[p].dx * frames;
      in[2 * p + 1][0] = vol.mean()[p].dy * frames;
    }
  }
  for (int j = 0; j < vol.bands(); ++j) {
    const auto band = vol.band(j);
    fftw_complex* row = in.get() + static_cast<std::size_t>(j + 1) * series;
    for (std::size_t p = 0; p < pixels; ++p) {
      row[2 * p][0] = band[p].sx.real();
      row[2 * p][1] = band[p].sx.imag();
      row[2 * p + 1][0] = band[p].sy.real();
      row[2 * p + 1][1] = band[p].sy.imag();
    }
  }

  PlanPtr plan;
  {
    std::lock_guard lock(planner_mutex());
    int n[] = {frames};
    plan.reset(fftw_plan_many_dft_c2r(1, n, series, in.get(), nullptr, series, 1, out.get(), nullptr,
                                      series, 1, FFTW_ESTIMATE));
  }
  require(plan != nullptr, ErrorCode::DataError, "failed to plan inverse FFT");
  fftw_execute(plan.get());

  MotionTexture tex(vol.width(), vol.height(), frames);
  auto dst = tex.data();
  const double scale = 1.0 / frames;
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = {out[2 * i] * scale, out[2 * i + 1] * scale};
  }
  return tex;
}

Displacement synthesize_sample(std::span<const BandCoefficients> bands_at_pixel, int frames, int n) {
  const int bands = static_cast<int>(bands_at_pixel.size());
  require(frames >= 2 * bands, ErrorCode::InvalidArgument, "T aliases the band count");
  double dx = 0;
  double dy = 0;
  for (int j = 0; j < bands; ++j) {
    const int bin = j + 1;
    const double angle = 2.0 * std::numbers::pi * bin * n / frames;
    const std::complex<double> phasor(std::cos(angle), std::sin(angle));
    // The Nyquist bin has no mirrored partner; c2r reads only its real part.
    const double weight = (2 * bin == frames) ? 1.0 : 2.0;
    const auto& c = bands_at_pixel[j];
    if (2 * bin == frames) {
      dx += weight * c.sx.real() * phasor.real();
      dy += weight * c.sy.real() * phasor.real();
    } else {
      dx += weight * (c.sx * phasor).real();
      dy += weight * (c.sy * phasor).real();
    }
  }
  return {dx / frames, dy / frames};
}

SpectrumStats average_power_spectrum(std::span<const SpectralVolume> corpus) {
  require(!corpus.empty(), ErrorCode::InvalidArgument, "power spectrum needs a non-empty corpus");
  const auto& first = corpus.front();
  SpectrumStats stats;
  stats.frequencies = first.frequencies();
  stats.mean_amplitude_x.assign(first.bands(), 0.0);
  stats.mean_amplitude_y.assign(first.bands(), 0.0);
  std::size_t pixel_total = 0;
  for (const auto& vol : corpus) {
    require(vol.frames() == first.frames() && vol.bands() == first.bands(), ErrorCode::InvalidArgument,
            "power spectrum corpus mixes trajectory lengths or band counts");
    for (int j = 0; j < vol.bands(); ++j) {
      double sx = 0;
      double sy = 0;
      for (const auto& c : vol.band(j)) {
        sx += std::abs(c.sx);
        sy += std::abs(c.sy);
      }
      stats.mean_amplitude_x[j] += sx;
      stats.mean_amplitude_y[j] += sy;
    }
    pixel_total += vol.pixel_count();
  }
  for (int j = 0; j < first.bands(); ++j) {
    stats.mean_amplitude_x[j] /= static_cast<double>(pixel_total);
    stats.mean_amplitude_y[j] /= static_cast<double>(pixel_total);
  }
  stats.sample_count = corpus.size();
  return stats;
}

SpectrumStats average_power_spectrum(std::span<const MotionTexture> corpus, double fps) {
  require(!corpus.empty(), ErrorCode::InvalidArgument, "power spectrum needs a non-empty corpus");
  for (const auto& tex : corpus) {
    require(tex.frames() == corpus.front().frames(), ErrorCode::InvalidArgument,
            "power spectrum corpus mixes trajectory lengths");
  }
  std::vector<SpectralVolume> volumes;
  volumes.reserve(corpus.size());
  for (const auto& tex : corpus) volumes.push_back(fft_forward(tex, fps));
  return average_power_spectrum(volumes);
}

}  // namespace motionspec
