#include "motionspec/normalization.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace motionspec {

double percentile_of(std::vector<double> values, double fraction) {
  require(!values.empty(), ErrorCode::InvalidArgument, "percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = fraction * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

NormalizationStats compute_stats(std::span<const SpectralVolume> corpus, double percentile) {
  require(!corpus.empty(), ErrorCode::InvalidArgument, "normalization stats need a non-empty corpus");
  require(percentile > 0.0 && percentile < 1.0, ErrorCode::InvalidArgument, "percentile must be in (0, 1)");
  const int bands = corpus.front().bands();
  for (const auto& vol : corpus) {
    require(vol.bands() == bands, ErrorCode::DimensionMismatch, "corpus mixes band counts");
  }

  NormalizationStats stats;
  stats.percentile = percentile;
  stats.sample_count = corpus.size();
  stats.frequencies = corpus.front().frequencies();
  stats.scales.resize(bands);
  std::vector<double> pooled;
  for (int j = 0; j < bands; ++j) {
    pooled.clear();
    for (const auto& vol : corpus) {
      for (const auto& c : vol.band(j)) {
        pooled.push_back(std::abs(c.sx.real()));
        pooled.push_back(std::abs(c.sx.imag()));
        pooled.push_back(std::abs(c.sy.real()));
        pooled.push_back(std::abs(c.sy.imag()));
      }
    }
    stats.scales[j] = std::max(percentile_of(pooled, percentile), kMinScale);
  }
  return stats;
}

double normalize_scalar(double c, double scale) {
  if (c == 0) return 0;
  return std::copysign(std::sqrt(std::abs(c) / scale), c);
}

double denormalize_scalar(double c, double scale) { return std::copysign(c * c * scale, c); }

namespace {

template <typename Fn>
SpectralVolume map_bands(const SpectralVolume& vol, const NormalizationStats& stats, Fn fn) {
  require(stats.bands() == vol.bands(), ErrorCode::DimensionMismatch,
          "stats cover " + std::to_string(stats.bands()) + " bands, volume has " + std::to_string(vol.bands()));
  SpectralVolume out(vol.width(), vol.height(), vol.bands(), vol.frames(), vol.fps());
  for (int j = 0; j < vol.bands(); ++j) {
    const double s = stats.scales[j];
    auto apply = [&](std::complex<double> c) { return std::complex<double>(fn(c.real(), s), fn(c.imag(), s)); };
    const auto src = vol.band(j);
    auto dst = out.band(j);
    for (std::size_t p = 0; p < src.size(); ++p) {
      dst[p].sx = apply(src[p].sx);
      dst[p].sy = apply(src[p].sy);
    }
  }
  return out;
}

}  // namespace

SpectralVolume normalize(const SpectralVolume& vol, const NormalizationStats& stats) {
  return map_bands(vol, stats, normalize_scalar);
}

SpectralVolume denormalize(const SpectralVolume& vol, const NormalizationStats& stats) {
  return map_bands(vol, stats, denormalize_scalar);
}

SpectralVolume naive_scale(const SpectralVolume& vol, int width, int height) {
  require(width > 0 && height > 0, ErrorCode::InvalidArgument, "naive_scale needs positive dimensions");
  SpectralVolume out = vol;
  out.clear_mean();
  for (auto& c : out.data()) {
    c.sx /= static_cast<double>(width);
    c.sy /= static_cast<double>(height);
  }
  return out;
}

namespace {

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_stats(std::ostream& out, const NormalizationStats& stats) {
  out << "# percentile " << shortest(stats.percentile) << " samples " << stats.sample_count << '\n';
  for (int j = 0; j < stats.bands(); ++j) {
    const double f = j < static_cast<int>(stats.frequencies.size()) ? stats.frequencies[j] : 0.0;
    out << j << ' ' << shortest(f) << ' ' << shortest(stats.scales[j]) << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::IoError, "failed writing stats");
}

NormalizationStats read_stats(std::istream& in) {
  NormalizationStats stats;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::DataError, "stats file is empty");
  {
    std::istringstream header(line);
    std::string hash, pkey, skey;
    header >> hash >> pkey >> stats.percentile >> skey >> stats.sample_count;
    require(header && hash == "#" && pkey == "percentile" && skey == "samples", ErrorCode::DataError,
            "malformed stats header: " + line);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int index = 0;
    double f = 0, s = 0;
    row >> index >> f >> s;
    require(static_cast<bool>(row), ErrorCode::DataError, "malformed stats line: " + line);
    require(index == stats.bands(), ErrorCode::DataError, "stats bands out of order");
    require(s > 0 && std::isfinite(s), ErrorCode::DataError, "stats scale must be positive");
    stats.frequencies.push_back(f);
    stats.scales.push_back(s);
  }
  require(stats.bands() > 0, ErrorCode::DataError, "stats file has no bands");
  return stats;
}

void write_stats(const std::filesystem::path& path, const NormalizationStats& stats) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  write_stats(out, stats);
}

NormalizationStats read_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  return read_stats(in);
}

}  // namespace motionspec
