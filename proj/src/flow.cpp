#include "motionspec/flow.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

namespace motionspec {

template <int C>
ImagePyramid<C> build_pyramid(const Image<C>& img, double factor, int min_size) {
  require(factor > 1.0 && factor <= 4.0, ErrorCode::InvalidArgument, "pyramid factor must be in (1, 4]");
  require(min_size >= 8, ErrorCode::InvalidArgument, "pyramid min_size must be >= 8");
  require(!img.empty(), ErrorCode::InvalidArgument, "cannot build a pyramid of an empty image");

  ImagePyramid<C> pyr;
  pyr.factor = factor;
  pyr.levels.push_back(img);
  const double sigma = 0.5 * std::sqrt(factor * factor - 1.0);
  for (;;) {
    const auto& prev = pyr.levels.back();
    const int w = static_cast<int>(std::ceil(prev.width() / factor));
    const int h = static_cast<int>(std::ceil(prev.height() / factor));
    if (w < min_size || h < min_size) break;
    pyr.levels.push_back(resize_bilinear(gaussian_blur(prev, sigma), w, h));
  }
  return pyr;
}

template ImagePyramid<1> build_pyramid(const GrayImage&, double, int);
template ImagePyramid<3> build_pyramid(const RgbImage&, double, int);

namespace {

// Flow on one pyramid level, stored as two planes.
struct FlowPlanes {
  int width = 0;
  int height = 0;
  std::vector<double> u;
  std::vector<double> v;

  FlowPlanes(int w, int h) : width(w), height(h), u(static_cast<std::size_t>(w) * h), v(u.size()) {}
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

double sample_clamped(const std::vector<double>& plane, int w, int h, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  auto at = [&](int xi, int yi) {
    xi = std::clamp(xi, 0, w - 1);
    yi = std::clamp(yi, 0, h - 1);
    return plane[static_cast<std::size_t>(yi) * w + xi];
  };
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double top = (1 - ax) * at(x0, y0) + ax * at(x0 + 1, y0);
  const double bot = (1 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1);
  return (1 - ay) * top + ay * bot;
}

FlowPlanes upsample(const FlowPlanes& coarse, int width, int height) {
  FlowPlanes fine(width, height);
  const double sx = static_cast<double>(width) / coarse.width;
  const double sy = static_cast<double>(height) / coarse.height;
  for (int y = 0; y < height; ++y) {
    const double cy = (y + 0.5) / sy - 0.5;
    for (int x = 0; x < width; ++x) {
      const double cx = (x + 0.5) / sx - 0.5;
      fine.u[fine.idx(x, y)] = sx * sample_clamped(coarse.u, coarse.width, coarse.height, cx, cy);
      fine.v[fine.idx(x, y)] = sy * sample_clamped(coarse.v, coarse.width, coarse.height, cx, cy);
    }
  }
  return fine;
}

std::vector<double> to_plane(const GrayImage& img) {
  std::vector<double> p(img.pixel_count());
  const auto d = img.data();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 255.0 * d[i];
  return p;
}

void refine_level(const std::vector<double>& a, const std::vector<double>& b, FlowPlanes& flow,
                  const FlowParams& params) {
  const int w = flow.width;
  const int h = flow.height;
  const std::size_t n = a.size();
  const double alpha2 = params.alpha * params.alpha;
  std::vector<double> warped(n), ix(n), iy(n), it(n), du(n), dv(n);

  auto central = [&](const std::vector<double>& img, int x, int y, int ddx, int ddy) {
    const int x0 = std::clamp(x - ddx, 0, w - 1), x1 = std::clamp(x + ddx, 0, w - 1);
    const int y0 = std::clamp(y - ddy, 0, h - 1), y1 = std::clamp(y + ddy, 0, h - 1);
    const double span = (ddx ? x1 - x0 : y1 - y0);
    if (span == 0) return 0.0;
    return (img[static_cast<std::size_t>(y1) * w + x1] - img[static_cast<std::size_t>(y0) * w + x0]) / span;
  };

  for (int warp = 0; warp < params.warps; ++warp) {
    std::vector<bool> inside(n);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto i = flow.idx(x, y);
        const double tx = x + flow.u[i];
        const double ty = y + flow.v[i];
        inside[i] = tx >= 0 && tx <= w - 1 && ty >= 0 && ty <= h - 1;
        warped[i] = sample_clamped(b, w, h, tx, ty);
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto i = flow.idx(x, y);
        if (!inside[i]) {
          ix[i] = iy[i] = it[i] = 0;
          continue;
        }
        ix[i] = 0.5 * (central(a, x, y, 1, 0) + central(warped, x, y, 1, 0));
        iy[i] = 0.5 * (central(a, x, y, 0, 1) + central(warped, x, y, 0, 1));
        it[i] = warped[i] - a[i];
      }
    }

    std::fill(du.begin(), du.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    const double omega = params.sor_omega;
    for (int iter = 0; iter < params.iterations; ++iter) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const auto i = flow.idx(x, y);
          double su = 0, sv = 0;
          int count = 0;
          auto visit = [&](int nx, int ny) {
            const auto j = flow.idx(nx, ny);
            su += flow.u[j] + du[j] - flow.u[i];
            sv += flow.v[j] + dv[j] - flow.v[i];
            ++count;
          };
          if (x > 0) visit(x - 1, y);
          if (x < w - 1) visit(x + 1, y);
          if (y > 0) visit(x, y - 1);
          if (y < h - 1) visit(x, y + 1);
          const double diag_u = ix[i] * ix[i] + alpha2 * count;
          const double diag_v = iy[i] * iy[i] + alpha2 * count;
          if (diag_u > 0) {
            const double target = (alpha2 * su - ix[i] * (iy[i] * dv[i] + it[i])) / diag_u;
            du[i] = (1 - omega) * du[i] + omega * target;
          }
          if (diag_v > 0) {
            const double target = (alpha2 * sv - iy[i] * (ix[i] * du[i] + it[i])) / diag_v;
            dv[i] = (1 - omega) * dv[i] + omega * target;
          }
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      flow.u[i] += du[i];
      flow.v[i] += dv[i];
    }
  }
}

}  // namespace

FlowField estimate_flow(const GrayImage& a, const GrayImage& b, const FlowParams& params) {
  require(same_size(a, b), ErrorCode::DimensionMismatch, "estimate_flow needs equal image dimensions");
  require(params.alpha > 0 && params.iterations >= 0 && params.warps >= 1, ErrorCode::InvalidArgument,
          "invalid flow parameters");

  const auto pa = build_pyramid(a, params.pyramid_factor, params.min_level_size);
  const auto pb = build_pyramid(b, params.pyramid_factor, params.min_level_size);

  std::optional<FlowPlanes> flow;
  for (int level = pa.size() - 1; level >= 0; --level) {
    const auto& la = pa.levels[level];
    if (!flow) {
      flow.emplace(la.width(), la.height());
    } else {
      flow = upsample(*flow, la.width(), la.height());
    }
    refine_level(to_plane(la), to_plane(pb.levels[level]), *flow, params);
  }

  FlowField out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const auto i = flow->idx(x, y);
      out.at(x, y) = {flow->u[i], flow->v[i]};
    }
  }
  return out;
}

MotionTexture extract_trajectories(std::span<const GrayImage> video, int start, int horizon,
                                  const FlowParams& params) {
  require(horizon >= 1, ErrorCode::InvalidArgument, "trajectory horizon must be >= 1");
  require(start >= 0 && static_cast<std::size_t>(start) + horizon < video.size(), ErrorCode::InvalidArgument,
          "video has " + std::to_string(video.size()) + " frames; start " + std::to_string(start) +
              " + horizon " + std::to_string(horizon) + " needs more");
  const auto& ref = video[start];
  MotionTexture tex(ref.width(), ref.height(), horizon);
  for (int t = 1; t <= horizon; ++t) {
    tex.set_frame(t - 1, estimate_flow(ref, video[start + t], params));
  }
  return tex;
}

MotionTexture extract_trajectories(std::span<const RgbImage> video, int start, int horizon,
                                  const FlowParams& params) {
  require(start >= 0 && static_cast<std::size_t>(start) + horizon < video.size(), ErrorCode::InvalidArgument,
          "video has too few frames for the requested horizon");
  std::vector<GrayImage> gray;
  gray.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int t = 0; t <= horizon; ++t) gray.push_back(to_gray(video[start + t]));
  return extract_trajectories(std::span<const GrayImage>(gray), 0, horizon, params);
}

FilterVerdict filter_sample(const MotionTexture& tex) {
  FilterVerdict verdict;
  if (tex.data().empty()) return verdict;
  const std::size_t pixels = tex.pixel_count();
  std::vector<double> per_pixel(pixels, 0.0);
  double total = 0;
  for (int t = 0; t < tex.frames(); ++t) {
    for (std::size_t p = 0; p < pixels; ++p) {
      const auto& d = tex.data()[t * pixels + p];
      const double m = std::hypot(d.dx, d.dy);
      per_pixel[p] += m;
      total += m;
    }
  }
  verdict.mean_magnitude = total / (static_cast<double>(pixels) * tex.frames());
  double min_pixel = per_pixel[0];
  for (const double s : per_pixel) min_pixel = std::min(min_pixel, s);
  verdict.min_pixel_magnitude = min_pixel / tex.frames();

  char buf[128];
  std::string reasons;
  auto reject = [&](const char* text) {
    verdict.keep = false;
    if (!reasons.empty()) reasons += "; ";
    reasons += text;
  };
  if (verdict.mean_magnitude > kMaxMeanMagnitude) {
    std::snprintf(buf, sizeof buf, "mean magnitude %.3f px exceeds %.0f px", verdict.mean_magnitude,
                  kMaxMeanMagnitude);
    reject(buf);
  }
  if (verdict.min_pixel_magnitude > kCameraMotionMagnitude) {
    std::snprintf(buf, sizeof buf, "camera motion: every pixel averages > %.0f px (min %.3f)",
                  kCameraMotionMagnitude, verdict.min_pixel_magnitude);
    reject(buf);
  }
  verdict.reason = verdict.keep ? "ok" : reasons;
  return verdict;
}

double mean_endpoint_error(const FlowField& estimate, const FlowField& truth, int border) {
  require(estimate.width() == truth.width() && estimate.height() == truth.height(),
          ErrorCode::DimensionMismatch, "endpoint error needs equal dimensions");
  double sum = 0;
  std::size_t count = 0;
  for (int y = border; y < estimate.height() - border; ++y) {
    for (int x = border; x < estimate.width() - border; ++x) {
      const auto& e = estimate.at(x, y);
      const auto& t = truth.at(x, y);
      sum += std::hypot(e.dx - t.dx, e.dy - t.dy);
      ++count;
    }
  }
  require(count > 0, ErrorCode::InvalidArgument, "border leaves no pixels");
  return sum / static_cast<double>(count);
}

}  // namespace motionspec
