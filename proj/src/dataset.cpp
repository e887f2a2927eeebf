#include "motionspec/dataset.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>

#include "motionspec/png_io.hpp"
#include "motionspec/texture_io.hpp"

namespace motionspec {

namespace fs = std::filesystem;

std::vector<int> start_indices(int frame_count, int horizon, int stride) {
  require(horizon >= 1 && stride >= 1, ErrorCode::InvalidArgument, "horizon and stride must be >= 1");
  std::vector<int> starts;
  for (int s = 0; s + horizon < frame_count; s += stride) starts.push_back(s);
  return starts;
}

Split video_split(std::string_view video_id) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char c : video_id) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h % 10 == 0 ? Split::Test : Split::Train;
}

std::vector<fs::path> list_frames(const fs::path& video_dir) {
  require(fs::is_directory(video_dir), ErrorCode::IoError, "not a directory: " + video_dir.string());
  static const std::regex pattern(R"(frame_(\d{5})\.png)");
  std::map<int, fs::path> frames;
  for (const auto& entry : fs::directory_iterator(video_dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) frames.emplace(std::stoi(m[1].str()), entry.path());
  }
  std::vector<fs::path> out;
  int expected = frames.empty() ? 0 : frames.begin()->first;
  for (auto& [index, path] : frames) {
    // Gaps end the usable sequence.
    if (index != expected) break;
    out.push_back(path);
    ++expected;
  }
  return out;
}

namespace {

std::string sample_id(const std::string& video_id, int start) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_s%05d", start);
  return video_id + buf;
}

std::string split_name(Split s) { return s == Split::Test ? "test" : "train"; }

void log_line(std::ostream* log, const ManifestRecord& rec, const fs::path& dir) {
  if (log == nullptr) return;
  *log << (dir / rec.sample_id).string() << ' ' << rec.verdict << ' ' << std::fixed << std::setprecision(4)
       << rec.mean_magnitude << std::defaultfloat << '\n';
}

}  // namespace

CorpusManifest build_corpus(std::span<const fs::path> video_dirs, const fs::path& out_dir, const CorpusParams& params,
                            std::ostream* log) {
  fs::create_directories(out_dir / "motex");
  fs::create_directories(out_dir / "specvol");
  fs::create_directories(out_dir / "stats");

  CorpusManifest manifest;
  manifest.root = out_dir;
  for (const auto& dir : video_dirs) {
    const std::string video_id = dir.filename().empty() ? dir.parent_path().filename().string()
                                                        : dir.filename().string();
    const auto frame_paths = list_frames(dir);
    const auto starts = start_indices(static_cast<int>(frame_paths.size()), params.horizon, params.stride);

    std::vector<std::optional<GrayImage>> frames(frame_paths.size());
    std::vector<std::string> errors(frame_paths.size());
    for (std::size_t i = 0; i < frame_paths.size(); ++i) {
      try {
        frames[i] = to_gray(read_png(frame_paths[i]));
      } catch (const Error& e) {
        errors[i] = frame_paths[i].filename().string() + ": " + e.what();
      }
    }

    for (const int start : starts) {
      ManifestRecord rec;
      rec.video_id = video_id;
      rec.start = start;
      rec.sample_id = sample_id(video_id, start);
      rec.split = video_split(video_id);

      std::string problem;
      for (int t = start; t <= start + params.horizon && problem.empty(); ++t) {
        if (!frames[t]) {
          problem = "unreadable frame " + errors[t];
        } else if (!same_size(*frames[t], *frames[start])) {
          problem = "frame size changes at " + frame_paths[t].filename().string();
        }
      }
      if (!problem.empty()) {
        rec.verdict = "skipped";
        rec.reason = problem;
        manifest.records.push_back(rec);
        log_line(log, rec, dir);
        continue;
      }

      // Only borrow the window; frames stay owned by the cache.
      std::vector<GrayImage> window;
      window.reserve(static_cast<std::size_t>(params.horizon) + 1);
      for (int t = start; t <= start + params.horizon; ++t) window.push_back(*frames[t]);
      const auto tex = extract_trajectories(std::span<const GrayImage>(window), 0, params.horizon, params.flow);
      const auto verdict = filter_sample(tex);
      rec.mean_magnitude = verdict.mean_magnitude;
      rec.reason = verdict.reason;
      if (verdict.keep) {
        rec.verdict = "kept";
        rec.motex_path = (fs::path("motex") / (rec.sample_id + ".motex")).string();
        rec.specvol_path = (fs::path("specvol") / (rec.sample_id + ".specvol")).string();
        write_motion_texture(out_dir / rec.motex_path, tex);
        const int bands = std::min(params.bands, params.horizon / 2);
        write_spectral_volume(out_dir / rec.specvol_path, truncate(fft_forward(tex, params.fps), bands));
      } else {
        rec.verdict = "rejected";
      }
      manifest.records.push_back(rec);
      log_line(log, rec, dir);
    }
  }

  std::ofstream out(out_dir / "manifest.txt");
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write manifest");
  write_manifest(out, manifest);
  return manifest;
}

void write_manifest(std::ostream& out, const CorpusManifest& manifest) {
  out << "#sample_id\tvideo_id\tstart\tsplit\tverdict\tmean_magnitude\treason\tmotex\tspecvol\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto or_dash = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
  for (const auto& r : manifest.records) {
    out << r.sample_id << '\t' << r.video_id << '\t' << r.start << '\t' << split_name(r.split) << '\t' << r.verdict
        << '\t' << r.mean_magnitude << '\t' << or_dash(r.reason) << '\t' << or_dash(r.motex_path) << '\t'
        << or_dash(r.specvol_path) << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::IoError, "failed writing manifest");
}

CorpusManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  CorpusManifest manifest;
  manifest.root = path.parent_path();
  std::string line;
  auto from_dash = [](const std::string& s) { return s == "-" ? std::string() : s; };
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    require(fields.size() == 9, ErrorCode::DataError, "malformed manifest line: " + line);
    ManifestRecord r;
    r.sample_id = fields[0];
    r.video_id = fields[1];
    r.start = std::stoi(fields[2]);
    r.split = fields[3] == "test" ? Split::Test : Split::Train;
    r.verdict = fields[4];
    r.mean_magnitude = std::stod(fields[5]);
    r.reason = from_dash(fields[6]);
    r.motex_path = from_dash(fields[7]);
    r.specvol_path = from_dash(fields[8]);
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

void write_spectrum_stats(std::ostream& out, const SpectrumStats& stats) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "# samples " << stats.sample_count << '\n';
  for (std::size_t j = 0; j < stats.frequencies.size(); ++j) {
    out << j << ' ' << stats.frequencies[j] << ' ' << stats.mean_amplitude_x[j] << ' ' << stats.mean_amplitude_y[j]
        << '\n';
  }
}

CorpusStats corpus_stats(const CorpusManifest& manifest, double percentile) {
  std::vector<SpectralVolume> volumes;
  for (const auto& r : manifest.records) {
    if (r.kept() && r.split == Split::Train) volumes.push_back(read_spectral_volume(manifest.root / r.specvol_path));
  }
  require(!volumes.empty(), ErrorCode::InvalidArgument, "corpus has no kept training samples");
  CorpusStats stats{compute_stats(volumes, percentile), average_power_spectrum(volumes)};

  fs::create_directories(manifest.root / "stats");
  write_stats(manifest.root / "stats" / "normalization.txt", stats.normalization);
  std::ofstream spec(manifest.root / "stats" / "spectrum.txt");
  require(static_cast<bool>(spec), ErrorCode::IoError, "cannot write spectrum stats");
  write_spectrum_stats(spec, stats.spectrum);
  return stats;
}

}  // namespace motionspec
