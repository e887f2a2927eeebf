#include "motionspec/renderer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "motionspec/flow.hpp"

namespace motionspec {

void RenderConfig::validate() const {
  require(levels >= 1, ErrorCode::InvalidArgument, "render levels must be >= 1");
  require(beta > 0 && std::isfinite(beta), ErrorCode::InvalidArgument, "softmax temperature must be positive");
  require(magnification >= 0 && std::isfinite(magnification), ErrorCode::InvalidArgument,
          "magnification must be >= 0");
  require(slow_motion >= 1, ErrorCode::InvalidArgument, "slow-motion factor must be >= 1");
}

SplatWeights compute_weights(const MotionTexture& tex) {
  SplatWeights w = uniform_weights(tex.width(), tex.height());
  const std::size_t pixels = tex.pixel_count();
  for (int t = 0; t < tex.frames(); ++t) {
    for (std::size_t p = 0; p < pixels; ++p) {
      const auto& d = tex.data()[t * pixels + p];
      w.values[p] += std::hypot(d.dx, d.dy);
    }
  }
  for (auto& v : w.values) v /= tex.frames();
  return w;
}

SplatWeights uniform_weights(int width, int height, double value) {
  return {width, height, std::vector<double>(static_cast<std::size_t>(width) * height, value)};
}

double SplatResult::coverage() const {
  if (covered.empty()) return 0;
  return static_cast<double>(std::count(covered.begin(), covered.end(), true)) / covered.size();
}

SplatResult softmax_splat(const RgbImage& src, const FlowField& flow, const SplatWeights& weights, double beta) {
  const int w = src.width();
  const int h = src.height();
  require(flow.width() == w && flow.height() == h && weights.width == w && weights.height == h,
          ErrorCode::DimensionMismatch, "softmax_splat inputs differ in size");

  const std::size_t n = src.pixel_count();
  std::vector<std::array<double, 3>> accum(n, {0, 0, 0});
  std::vector<double> wsum(n, 0.0);
  std::vector<double> wdepth(n, 0.0);

  // Source pixels are visited in raster order, so each destination
  // accumulates its contributions in a fixed order.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& d = flow.at(x, y);
      const double tx = x + d.dx;
      const double ty = y + d.dy;
      if (!std::isfinite(tx) || !std::isfinite(ty)) continue;
      const double fx = std::floor(tx);
      const double fy = std::floor(ty);
      const double ax = tx - fx;
      const double ay = ty - fy;
      const double soft = std::exp(std::min(beta * weights.at(x, y), kMaxSoftmaxExponent));
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const std::array<std::pair<int, int>, 4> targets{{{x0, y0}, {x0 + 1, y0}, {x0, y0 + 1}, {x0 + 1, y0 + 1}}};
      const std::array<double, 4> coeffs{(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      for (int k = 0; k < 4; ++k) {
        const auto [qx, qy] = targets[k];
        if (coeffs[k] <= 0 || qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
        const double weight = soft * coeffs[k];
        const auto q = static_cast<std::size_t>(qy) * w + qx;
        for (int c = 0; c < 3; ++c) accum[q][c] += weight * src.at(x, y, c);
        wsum[q] += weight;
        wdepth[q] += weight * weights.at(x, y);
      }
    }
  }

  SplatResult out{RgbImage(w, h), std::vector<bool>(n, false), std::move(wsum), std::vector<double>(n, 0.0)};
  constexpr double kCoverageEpsilon = 1e-6;
  auto data = out.image.data();
  for (std::size_t q = 0; q < n; ++q) {
    if (out.weight_sum[q] <= kCoverageEpsilon) continue;
    out.covered[q] = true;
    out.depth[q] = wdepth[q] / out.weight_sum[q];
    for (int c = 0; c < 3; ++c) data[q * 3 + c] = static_cast<float>(accum[q][c] / out.weight_sum[q]);
  }
  return out;
}

namespace {

void fill_global_mean(RgbImage& img, std::vector<bool>& covered) {
  std::array<double, 3> mean{0, 0, 0};
  std::size_t count = 0;
  auto data = img.data();
  for (std::size_t q = 0; q < covered.size(); ++q) {
    if (!covered[q]) continue;
    for (int c = 0; c < 3; ++c) mean[c] += data[q * 3 + c];
    ++count;
  }
  if (count > 0) {
    for (auto& m : mean) m /= static_cast<double>(count);
  }
  for (std::size_t q = 0; q < covered.size(); ++q) {
    if (covered[q]) continue;
    for (int c = 0; c < 3; ++c) data[q * 3 + c] = static_cast<float>(mean[c]);
    covered[q] = true;
  }
}

}  // namespace

void fill_holes(RgbImage& img, std::vector<bool>& covered, HoleFill strategy, std::vector<double> depth) {
  const int w = img.width();
  const int h = img.height();
  require(covered.size() == img.pixel_count(), ErrorCode::DimensionMismatch, "coverage mask size mismatch");
  require(depth.empty() || depth.size() == covered.size(), ErrorCode::DimensionMismatch, "depth map size mismatch");
  if (depth.empty()) depth.assign(covered.size(), 0.0);
  if (strategy == HoleFill::Diffusion) {
    struct Fill {
      std::size_t q;
      std::array<float, 3> color;
      double depth;
    };
    std::vector<Fill> frontier;
    for (int iter = 0; iter < kHoleFillIterations; ++iter) {
      frontier.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const auto q = static_cast<std::size_t>(y) * w + x;
          if (covered[q]) continue;
          std::array<std::size_t, 4> nbrs{};
          int count = 0;
          if (x > 0) nbrs[count++] = q - 1;
          if (x < w - 1) nbrs[count++] = q + 1;
          if (y > 0) nbrs[count++] = q - w;
          if (y < h - 1) nbrs[count++] = q + w;
          double nearest = std::numeric_limits<double>::infinity();
          for (int k = 0; k < count; ++k) {
            if (covered[nbrs[k]]) nearest = std::min(nearest, depth[nbrs[k]]);
          }
          if (!std::isfinite(nearest)) continue;
          Fill fill{q, {0, 0, 0}, nearest};
          int used = 0;
          for (int k = 0; k < count; ++k) {
            const auto r = nbrs[k];
            if (!covered[r] || depth[r] > nearest + kDepthTolerance) continue;
            for (int c = 0; c < 3; ++c) fill.color[c] += img.data()[r * 3 + c];
            ++used;
          }
          for (auto& v : fill.color) v /= static_cast<float>(used);
          frontier.push_back(fill);
        }
      }
      if (frontier.empty()) break;
      // Background fronts advance first; higher-W fronts wait until they
      // are the shallowest left.
      double shallowest = std::numeric_limits<double>::infinity();
      for (const auto& f : frontier) shallowest = std::min(shallowest, f.depth);
      auto data = img.data();
      for (const auto& f : frontier) {
        if (f.depth > shallowest + kDepthTolerance) continue;
        for (int c = 0; c < 3; ++c) data[f.q * 3 + c] = f.color[c];
        covered[f.q] = true;
        depth[f.q] = f.depth;
      }
    }
  }
  fill_global_mean(img, covered);
}

namespace {

FlowField resize_flow(const FlowField& flow, int width, int height) {
  if (width == flow.width() && height == flow.height()) return flow;
  GrayImage u(flow.width(), flow.height());
  GrayImage v(flow.width(), flow.height());
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      u.at(x, y) = static_cast<float>(flow.at(x, y).dx);
      v.at(x, y) = static_cast<float>(flow.at(x, y).dy);
    }
  }
  // Area-average before sampling so thin fast structures survive downscaling.
  const double ratio = static_cast<double>(flow.width()) / width;
  const double sigma = ratio > 1 ? 0.5 * std::sqrt(ratio * ratio - 1.0) : 0.0;
  const auto us = resize_bilinear(gaussian_blur(u, sigma), width, height);
  const auto vs = resize_bilinear(gaussian_blur(v, sigma), width, height);
  const double sx = static_cast<double>(width) / flow.width();
  const double sy = static_cast<double>(height) / flow.height();
  FlowField out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out.at(x, y) = {us.at(x, y) * sx, vs.at(x, y) * sy};
  }
  return out;
}

SplatWeights resize_weights(const SplatWeights& w, int width, int height) {
  if (width == w.width && height == w.height) return w;
  GrayImage img(w.width, w.height);
  for (std::size_t i = 0; i < w.values.size(); ++i) img.data()[i] = static_cast<float>(w.values[i]);
  const auto small = resize_bilinear(img, width, height);
  SplatWeights out = uniform_weights(width, height);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = small.data()[i];
  return out;
}

struct CoarseSample {
  std::array<double, 3> color{0, 0, 0};
  double depth = 0;
};

// Bilinear sample of the coarse level at fine pixel (x, y), using covered
// coarse pixels only.
std::optional<CoarseSample> sample_coarse(const RgbImage& coarse, const std::vector<bool>& covered,
                                          const std::vector<double>& depth, double cx, double cy) {
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const double ax = cx - x0;
  const double ay = cy - y0;
  CoarseSample out;
  double total = 0;
  for (int k = 0; k < 4; ++k) {
    const int px = std::clamp(x0 + (k & 1), 0, coarse.width() - 1);
    const int py = std::clamp(y0 + (k >> 1), 0, coarse.height() - 1);
    const double w = ((k & 1) ? ax : 1 - ax) * ((k >> 1) ? ay : 1 - ay);
    const auto r = static_cast<std::size_t>(py) * coarse.width() + px;
    if (w <= 0 || !covered[r]) continue;
    for (int c = 0; c < 3; ++c) out.color[c] += w * coarse.at(px, py, c);
    out.depth += w * depth[r];
    total += w;
  }
  if (total <= 0) return std::nullopt;
  for (auto& c : out.color) c /= total;
  out.depth /= total;
  return out;
}

// Copies coarse-level colors into holes of the finer splat. A coarse value
// deeper than the nearby fine background is a blurred foreground edge; that
// hole is left to the background-first fill.
void composite_coarse(SplatResult& fine, const RgbImage& coarse, const std::vector<bool>& coarse_covered,
                      const std::vector<double>& coarse_depth) {
  const int w = fine.image.width();
  const int h = fine.image.height();
  const double sx = static_cast<double>(coarse.width()) / w;
  const double sy = static_cast<double>(coarse.height()) / h;
  const std::vector<bool> fine_covered = fine.covered;
  auto data = fine.image.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto q = static_cast<std::size_t>(y) * w + x;
      if (fine_covered[q]) continue;
      const auto sample = sample_coarse(coarse, coarse_covered, coarse_depth, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
      if (!sample) continue;
      // Shallowest of the first covered pixels along the four axis rays.
      double nearby = std::numeric_limits<double>::infinity();
      for (const auto [dx, dy] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
        for (int nx = x + dx, ny = y + dy; nx >= 0 && nx < w && ny >= 0 && ny < h; nx += dx, ny += dy) {
          const auto r = static_cast<std::size_t>(ny) * w + nx;
          if (!fine_covered[r]) continue;
          nearby = std::min(nearby, fine.depth[r]);
          break;
        }
      }
      if (sample->depth > nearby + kDepthTolerance) continue;
      for (int c = 0; c < 3; ++c) data[q * 3 + c] = static_cast<float>(sample->color[c]);
      fine.covered[q] = true;
      fine.depth[q] = sample->depth;
    }
  }
}

}  // namespace

RgbImage synthesize_frame(const RgbImage& source, const FlowField& flow, const SplatWeights& weights,
                          const RenderConfig& config) {
  config.validate();
  require(flow.width() == source.width() && flow.height() == source.height() &&
              weights.width == source.width() && weights.height == source.height(),
          ErrorCode::DimensionMismatch, "synthesize_frame inputs differ in size");

  auto pyramid = build_pyramid(source, 2.0, 8);
  pyramid.levels.resize(std::min<std::size_t>(pyramid.levels.size(), config.levels));

  RgbImage result;
  std::vector<bool> covered;
  std::vector<double> depth;
  for (int level = pyramid.size() - 1; level >= 0; --level) {
    const auto& img = pyramid.levels[level];
    auto splat = softmax_splat(img, resize_flow(flow, img.width(), img.height()),
                               resize_weights(weights, img.width(), img.height()), config.beta);
    if (!result.empty()) composite_coarse(splat, result, covered, depth);
    result = std::move(splat.image);
    covered = std::move(splat.covered);
    depth = std::move(splat.depth);
  }
  fill_holes(result, covered, config.hole_fill, std::move(depth));
  return result;
}

MotionTexture interpolate_texture(const MotionTexture& tex, int factor) {
  require(factor >= 1, ErrorCode::InvalidArgument, "slow-motion factor must be >= 1");
  if (factor == 1) return tex;
  MotionTexture out(tex.width(), tex.height(), tex.frames() * factor);
  const std::size_t pixels = tex.pixel_count();
  for (int j = 1; j <= out.frames(); ++j) {
    const int lower = j / factor;  // F_lower, with F_0 = 0
    const double frac = static_cast<double>(j % factor) / factor;
    for (std::size_t p = 0; p < pixels; ++p) {
      const Displacement a = lower == 0 ? Displacement{} : tex.data()[(lower - 1) * pixels + p];
      const Displacement b = frac == 0 ? a : tex.data()[lower * pixels + p];
      out.data()[(j - 1) * pixels + p] = {a.dx + frac * (b.dx - a.dx), a.dy + frac * (b.dy - a.dy)};
    }
  }
  return out;
}

MotionTexture magnify(const MotionTexture& tex, double factor) {
  MotionTexture out = tex;
  for (auto& d : out.data()) d = {d.dx * factor, d.dy * factor};
  return out;
}

std::vector<RgbImage> animate(const RgbImage& source, const MotionTexture& tex, const RenderConfig& config) {
  config.validate();
  require(source.width() == tex.width() && source.height() == tex.height(), ErrorCode::DimensionMismatch,
          "image and motion texture differ in size");
  const auto motion = interpolate_texture(magnify(tex, config.magnification), config.slow_motion);
  const auto weights = compute_weights(motion);
  std::vector<RgbImage> frames;
  frames.reserve(static_cast<std::size_t>(motion.frames()));
  for (int t = 0; t < motion.frames(); ++t) {
    frames.push_back(synthesize_frame(source, motion.frame(t), weights, config));
  }
  return frames;
}

}  // namespace motionspec
