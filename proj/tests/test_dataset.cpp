#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "motionspec/dataset.hpp"
#include "motionspec/png_io.hpp"
#include "motionspec/texture_io.hpp"

using namespace motionspec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("motionspec_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RgbImage gray_to_rgb(const GrayImage& g) {
  RgbImage out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = g.at(x, y);
    }
  }
  return out;
}

fs::path frame_path(const fs::path& dir, int i) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%05d.png", i);
  return dir / name;
}

fs::path write_static_video(const fs::path& root, const std::string& id, int frames, int size) {
  const auto dir = root / id;
  fs::create_directories(dir);
  const auto img = gray_to_rgb(fixtures::noise_texture(size, size, 3));
  for (int i = 0; i < frames; ++i) write_png(frame_path(dir, i), img);
  return dir;
}

// Window into a larger texture that slides left by `speed` px per frame.
fs::path write_pan_video(const fs::path& root, const std::string& id, int frames, int size, int speed) {
  const auto dir = root / id;
  fs::create_directories(dir);
  const int margin = speed * frames + 4;
  const auto big = fixtures::noise_texture(size + margin, size, 11, 1.2);
  for (int i = 0; i < frames; ++i) {
    GrayImage crop(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) crop.at(x, y) = big.at(margin - speed * i + x - 2, y);
    }
    write_png(frame_path(dir, i), gray_to_rgb(crop));
  }
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("start indices respect the horizon") {
  const auto starts = start_indices(300, 149, 10);
  REQUIRE(starts.size() == 16);
  CHECK(starts.front() == 0);
  CHECK(starts.back() == 150);
  CHECK(start_indices(150, 149, 10) == std::vector<int>{0});
  CHECK(start_indices(149, 149, 10).empty());
  CHECK(start_indices(0, 149, 10).empty());
  CHECK_THROWS_AS(start_indices(10, 0, 10), Error);
  CHECK_THROWS_AS(start_indices(10, 3, 0), Error);
}

TEST_CASE("video split is deterministic and roughly 90/10") {
  int test = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto id = "video_" + std::to_string(i);
    CHECK(video_split(id) == video_split(id));
    test += video_split(id) == Split::Test;
  }
  CHECK(test > 120);
  CHECK(test < 280);
}

TEST_CASE("list_frames orders and stops at gaps") {
  TempDir tmp("list");
  const auto img = gray_to_rgb(fixtures::noise_texture(4, 4, 1));
  for (const int i : {0, 1, 2, 4, 5}) write_png(frame_path(tmp.path, i), img);
  std::ofstream(tmp.path / "notes.txt") << "x";
  const auto frames = list_frames(tmp.path);
  REQUIRE(frames.size() == 3);
  CHECK(frames[2].filename() == "frame_00002.png");
  CHECK_THROWS_AS(list_frames(tmp.path / "missing"), Error);
}

TEST_CASE("static 150-frame video yields one kept sample with zero spectra") {
  TempDir tmp("static");
  const auto video = write_static_video(tmp.path, "still", 150, 8);
  const std::vector<fs::path> videos{video};
  std::ostringstream log;
  const auto manifest = build_corpus(videos, tmp.path / "corpus", {}, &log);
  REQUIRE(manifest.records.size() == 1);
  const auto& rec = manifest.records[0];
  CHECK(rec.kept());
  CHECK(rec.start == 0);
  CHECK(rec.sample_id == "still_s00000");
  CHECK(rec.mean_magnitude == doctest::Approx(0).epsilon(1e-6));

  const auto tex = read_motion_texture(tmp.path / "corpus" / rec.motex_path);
  CHECK(tex.frames() == 149);
  const auto vol = read_spectral_volume(tmp.path / "corpus" / rec.specvol_path);
  CHECK(vol.bands() == kDefaultBands);
  double peak = 0;
  for (const auto& c : vol.data()) peak = std::max({peak, std::abs(c.sx), std::abs(c.sy)});
  CHECK(peak < 1e-3);
  CHECK(log.str().find("still_s00000 kept") != std::string::npos);
}

TEST_CASE("camera pan is rejected") {
  TempDir tmp("pan");
  const auto video = write_pan_video(tmp.path, "pan", 5, 32, 1);
  const std::vector<fs::path> videos{video};
  CorpusParams params;
  params.horizon = 4;
  params.bands = 2;
  const auto manifest = build_corpus(videos, tmp.path / "corpus", params);
  REQUIRE(manifest.records.size() == 1);
  const auto& rec = manifest.records[0];
  CHECK(rec.verdict == "rejected");
  CHECK(rec.reason.find("camera") != std::string::npos);
  CHECK(rec.mean_magnitude == doctest::Approx(2.5).epsilon(0.1));
  CHECK(rec.motex_path.empty());
  CHECK(fs::is_empty(tmp.path / "corpus" / "motex"));
}

TEST_CASE("unreadable frames skip only the samples that use them") {
  TempDir tmp("corrupt");
  const auto video = write_static_video(tmp.path, "broken", 12, 8);
  std::ofstream(frame_path(video, 7), std::ios::binary | std::ios::trunc) << "not a png";
  const std::vector<fs::path> videos{video};
  CorpusParams params;
  params.horizon = 4;
  params.stride = 2;
  params.bands = 2;
  const auto manifest = build_corpus(videos, tmp.path / "corpus", params);
  // starts 0, 2, 4, 6; windows reaching frame 7 are 4 and 6.
  REQUIRE(manifest.records.size() == 4);
  CHECK(manifest.records[0].kept());
  CHECK(manifest.records[1].kept());
  CHECK(manifest.records[2].verdict == "skipped");
  CHECK(manifest.records[3].verdict == "skipped");
  CHECK(manifest.records[2].reason.find("frame_00007.png") != std::string::npos);
}

TEST_CASE("manifest roundtrip covers every attempted sample") {
  TempDir tmp("manifest");
  const std::vector<fs::path> videos{write_static_video(tmp.path, "a", 9, 8), write_pan_video(tmp.path, "b", 5, 32, 1)};
  CorpusParams params;
  params.horizon = 4;
  params.stride = 2;
  params.bands = 2;
  const auto built = build_corpus(videos, tmp.path / "corpus", params);
  // a: starts 0, 2, 4; b: start 0.
  REQUIRE(built.records.size() == 4);
  const auto read = read_manifest(tmp.path / "corpus" / "manifest.txt");
  REQUIRE(read.records.size() == built.records.size());
  for (std::size_t i = 0; i < read.records.size(); ++i) {
    const auto& x = read.records[i];
    const auto& y = built.records[i];
    CHECK(x.sample_id == y.sample_id);
    CHECK(x.video_id == y.video_id);
    CHECK(x.start == y.start);
    CHECK(x.split == y.split);
    CHECK(x.verdict == y.verdict);
    CHECK(x.mean_magnitude == y.mean_magnitude);
    CHECK(x.reason == y.reason);
    CHECK(x.motex_path == y.motex_path);
    CHECK(x.specvol_path == y.specvol_path);
    if (x.kept()) {
      CHECK(fs::exists(read.root / x.motex_path));
      CHECK(fs::exists(read.root / x.specvol_path));
    }
  }
  std::ofstream(tmp.path / "bad.txt") << "only\tthree\tfields\n";
  CHECK_THROWS_AS(read_manifest(tmp.path / "bad.txt"), Error);
}

TEST_CASE("corpus reruns are byte-identical") {
  TempDir tmp("rerun");
  const std::vector<fs::path> videos{write_static_video(tmp.path, "s", 7, 8), write_pan_video(tmp.path, "p", 5, 24, 1)};
  CorpusParams params;
  params.horizon = 4;
  params.bands = 2;
  const auto m1 = build_corpus(videos, tmp.path / "c1", params);
  const auto m2 = build_corpus(videos, tmp.path / "c2", params);
  CHECK(slurp(tmp.path / "c1" / "manifest.txt") == slurp(tmp.path / "c2" / "manifest.txt"));
  for (const auto& r : m1.records) {
    if (!r.kept()) continue;
    CHECK(slurp(tmp.path / "c1" / r.motex_path) == slurp(tmp.path / "c2" / r.motex_path));
    CHECK(slurp(tmp.path / "c1" / r.specvol_path) == slurp(tmp.path / "c2" / r.specvol_path));
  }
}

TEST_CASE("corpus stats use kept training samples only") {
  TempDir tmp("stats");
  CorpusManifest manifest;
  manifest.root = tmp.path;
  fs::create_directories(tmp.path / "specvol");
  auto add = [&](const std::string& id, Split split, const std::string& verdict, double scale) {
    ManifestRecord r;
    r.sample_id = id;
    r.video_id = id;
    r.split = split;
    r.verdict = verdict;
    if (verdict == "kept") {
      r.specvol_path = "specvol/" + id + ".specvol";
      write_spectral_volume(tmp.path / r.specvol_path, fixtures::random_volume(4, 4, 3, 16, id.size(), scale));
    }
    manifest.records.push_back(r);
  };
  add("train_a", Split::Train, "kept", 1.0);
  add("train_bb", Split::Train, "kept", 1.0);
  add("test_ccc", Split::Test, "kept", 1000.0);
  add("rej", Split::Train, "rejected", 0);

  const auto stats = corpus_stats(manifest);
  CHECK(stats.spectrum.sample_count == 2);
  for (const double s : stats.normalization.scales) CHECK(s < 10.0);
  CHECK(fs::exists(tmp.path / "stats" / "normalization.txt"));
  CHECK(fs::exists(tmp.path / "stats" / "spectrum.txt"));
  const auto reread = read_stats(tmp.path / "stats" / "normalization.txt");
  CHECK(reread.scales == stats.normalization.scales);

  CorpusManifest empty;
  empty.root = tmp.path;
  CHECK_THROWS_AS(corpus_stats(empty), Error);
}
