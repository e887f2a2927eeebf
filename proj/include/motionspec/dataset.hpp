#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motionspec/flow.hpp"
#include "motionspec/normalization.hpp"
#include "motionspec/spectral.hpp"

namespace motionspec {

struct CorpusParams {
  int horizon = 149;
  int stride = 10;
  int bands = kDefaultBands;
  double fps = kDefaultFps;
  FlowParams flow;
};

enum class Split { Train, Test };

struct ManifestRecord {
  std::string sample_id;
  std::string video_id;
  int start = 0;
  Split split = Split::Train;
  /// "kept", "rejected" or "skipped".
  std::string verdict;
  double mean_magnitude = 0;
  std::string reason;
  /// Relative to the corpus root; empty unless kept.
  std::string motex_path;
  std::string specvol_path;

  bool kept() const { return verdict == "kept"; }
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<ManifestRecord> records;
};

/// Start frames 0, stride, ... with start + horizon < frame_count.
std::vector<int> start_indices(int frame_count, int horizon, int stride);

/// Deterministic 90/10 split on the FNV-1a hash of the video id.
Split video_split(std::string_view video_id);

/// frame_%05d.png files in index order.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& video_dir);

/// Writes out_dir/{motex,specvol,stats,manifest.txt}. One log line per sample
/// goes to `log` when given.
CorpusManifest build_corpus(std::span<const std::filesystem::path> video_dirs, const std::filesystem::path& out_dir,
                            const CorpusParams& params = {}, std::ostream* log = nullptr);

void write_manifest(std::ostream& out, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::filesystem::path& path);

struct CorpusStats {
  NormalizationStats normalization;
  SpectrumStats spectrum;
};

/// Stats over kept training samples; writes stats/normalization.txt and stats/spectrum.txt.
CorpusStats corpus_stats(const CorpusManifest& manifest, double percentile = kDefaultPercentile);

void write_spectrum_stats(std::ostream& out, const SpectrumStats& stats);

}  // namespace motionspec
