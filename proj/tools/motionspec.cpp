// motionspec command-line tool. Results go to stdout, progress to stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fixtures.hpp"
#include "motionspec/dataset.hpp"
#include "motionspec/flow.hpp"
#include "motionspec/modal.hpp"
#include "motionspec/normalization.hpp"
#include "motionspec/png_io.hpp"
#include "motionspec/renderer.hpp"
#include "motionspec/sampler.hpp"
#include "motionspec/service.hpp"
#include "motionspec/spectral.hpp"
#include "motionspec/texture_io.hpp"

using namespace motionspec;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitIo = 4;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return kExitUsage;
    case ErrorCode::DataError:
    case ErrorCode::DimensionMismatch: return kExitData;
    case ErrorCode::IoError:
    case ErrorCode::NotFound: return kExitIo;
  }
  return kExitOther;
}

fs::path frame_name(const fs::path& dir, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05d.png", index);
  return dir / buf;
}

void write_frames(const fs::path& dir, const RgbImage& first, const std::vector<RgbImage>& rest) {
  fs::create_directories(dir);
  write_png(frame_name(dir, 0), first);
  for (std::size_t i = 0; i < rest.size(); ++i) write_png(frame_name(dir, static_cast<int>(i) + 1), rest[i]);
}

RgbImage to_rgb(const GrayImage& g) {
  RgbImage out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = g.at(x, y);
    }
  }
  return out;
}

std::vector<RgbImage> read_video(const fs::path& dir) {
  const auto paths = list_frames(dir);
  require(!paths.empty(), ErrorCode::IoError, "no frame_%05d.png files in " + dir.string());
  std::vector<RgbImage> frames;
  frames.reserve(paths.size());
  for (const auto& p : paths) frames.push_back(read_png(p));
  return frames;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

HoleFill parse_hole_fill(const std::string& s) {
  if (s == "diffusion") return HoleFill::Diffusion;
  if (s == "mean") return HoleFill::GlobalMean;
  throw Error(ErrorCode::InvalidArgument, "hole fill must be diffusion or mean");
}

struct RenderFlags {
  double magnify = 1.0;
  int slowmo = 1;
  int levels = 3;
  double beta = 1.0;
  std::string hole_fill = "diffusion";

  void add(CLI::App* cmd) {
    cmd->add_option("--magnify", magnify, "Motion magnification factor");
    cmd->add_option("--slowmo", slowmo, "Slow-motion factor (integer)")->check(CLI::PositiveNumber);
    cmd->add_option("--levels", levels, "Splatting pyramid levels")->check(CLI::PositiveNumber);
    cmd->add_option("--beta", beta, "Softmax splat temperature");
    cmd->add_option("--hole-fill", hole_fill, "diffusion or mean");
  }

  RenderConfig config() const {
    RenderConfig rc;
    rc.magnification = magnify;
    rc.slow_motion = slowmo;
    rc.levels = levels;
    rc.beta = beta;
    rc.hole_fill = parse_hole_fill(hole_fill);
    rc.validate();
    return rc;
  }
};

struct ExtractCmd {
  fs::path video, out, reference;
  int start = 0;
  int horizon = 149;
  int border = 8;
  FlowParams flow;

  void run() const {
    const auto frames = read_video(video);
    const int h = std::min(horizon, static_cast<int>(frames.size()) - 1 - start);
    require(h >= 1, ErrorCode::InvalidArgument, "video too short for start " + std::to_string(start));
    if (h < horizon) std::cerr << "note: horizon clipped to " << h << " frames\n";
    std::vector<GrayImage> gray;
    for (const auto& f : frames) gray.push_back(to_gray(f));
    std::cerr << "extracting " << h << " flows at " << frames[0].width() << "x" << frames[0].height() << "\n";
    const auto tex = extract_trajectories(std::span<const GrayImage>(gray), start, h, flow);
    write_motion_texture(out, tex);
    const auto verdict = filter_sample(tex);
    std::cout << "frames " << tex.frames() << "\n";
    std::cout << "mean_magnitude " << verdict.mean_magnitude << "\n";
    std::cout << "verdict " << (verdict.keep ? "kept" : "rejected") << " " << verdict.reason << "\n";
    if (!reference.empty()) {
      const auto ref = read_motion_texture(reference);
      require(ref.width() == tex.width() && ref.height() == tex.height() && ref.frames() >= tex.frames(),
              ErrorCode::DimensionMismatch, "reference texture does not cover the extracted one");
      double epe = 0;
      for (int t = 0; t < tex.frames(); ++t) epe += mean_endpoint_error(tex.frame(t), ref.frame(t), border);
      std::cout << "mean_epe " << epe / tex.frames() << "\n";
    }
  }
};

struct SpectralCmd {
  fs::path in, out;
  int bands = kDefaultBands;
  double fps = kDefaultFps;

  void run() const {
    const auto tex = read_motion_texture(in);
    const int k = std::min(bands, tex.frames() / 2);
    require(k >= 1, ErrorCode::DataError, "texture too short for any band");
    if (k < bands) std::cerr << "note: only " << k << " bands fit in " << tex.frames() << " frames\n";
    const auto vol = truncate(fft_forward(tex, fps), k);
    write_spectral_volume(out, vol);
    std::cout << "bands " << vol.bands() << "\n";
    for (int j = 0; j < vol.bands(); ++j) std::cout << "band " << j << " " << vol.frequency(j) << "\n";
  }
};

struct CorpusCmd {
  fs::path out;
  std::vector<fs::path> videos;
  CorpusParams params;

  void run() const {
    const auto manifest = build_corpus(videos, out, params, &std::cerr);
    int kept = 0, rejected = 0, skipped = 0;
    for (const auto& r : manifest.records) {
      kept += r.verdict == "kept";
      rejected += r.verdict == "rejected";
      skipped += r.verdict == "skipped";
    }
    std::cout << "manifest " << (out / "manifest.txt").string() << "\n";
    std::cout << "kept " << kept << "\nrejected " << rejected << "\nskipped " << skipped << "\n";
  }
};

struct StatsCmd {
  fs::path corpus;
  double percentile = kDefaultPercentile;

  void run() const {
    const auto manifest_path = fs::is_directory(corpus) ? corpus / "manifest.txt" : corpus;
    const auto stats = corpus_stats(read_manifest(manifest_path), percentile);
    write_stats(std::cout, stats.normalization);
    std::cerr << "wrote " << (manifest_path.parent_path() / "stats").string() << "\n";
  }
};

struct AnimateCmd {
  fs::path image, volume, out, stats;
  int frames = 0;
  RenderFlags render;

  void run() const {
    const auto source = read_png(image);
    auto vol = read_spectral_volume(volume);
    if (!stats.empty()) vol = denormalize(vol, read_stats(stats));
    const auto tex = ifft_inverse(vol, frames > 0 ? frames : vol.frames());
    const auto rc = render.config();
    std::cerr << "rendering " << tex.frames() * rc.slow_motion << " frames\n";
    const auto out_frames = animate(source, tex, rc);
    write_frames(out, source, out_frames);
    std::cout << "frames " << out_frames.size() + 1 << "\n";
  }
};

// Oracle config: {"mean": "<specvol>", "stddev": 0.3, "stats": "<normalization.txt>",
// "uncond_mean": "<specvol>"}; paths are relative to the config file.
struct LoopCmd {
  fs::path image, oracle, out;
  GuidanceConfig guidance = GuidanceConfig::looping();
  bool no_frames = false;
  RenderFlags render;

  void run(std::uint64_t seed) const {
    const auto source = read_png(image);
    nlohmann::json cfg;
    try {
      cfg = nlohmann::json::parse(slurp(oracle));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::DataError, std::string("bad oracle config: ") + e.what());
    }
    const auto base = oracle.parent_path();
    require(cfg.contains("mean"), ErrorCode::DataError, "oracle config needs \"mean\"");
    const auto mean = read_spectral_volume(base / cfg["mean"].get<std::string>());
    require(mean.width() == source.width() && mean.height() == source.height(), ErrorCode::DimensionMismatch,
            "image and oracle mean differ in size");
    NormalizationStats stats;
    if (cfg.contains("stats")) {
      stats = read_stats(base / cfg["stats"].get<std::string>());
    } else {
      const std::vector<SpectralVolume> corpus{mean};
      stats = compute_stats(corpus);
    }
    const double stddev = cfg.value("stddev", 0.3);
    const auto cond_mean = to_latent(normalize(mean, stats)).data;
    std::vector<double> uncond_mean(cond_mean.size(), 0.0);
    if (cfg.contains("uncond_mean")) {
      uncond_mean = to_latent(normalize(read_spectral_volume(base / cfg["uncond_mean"].get<std::string>()), stats)).data;
      require(uncond_mean.size() == cond_mean.size(), ErrorCode::DimensionMismatch, "oracle means differ in shape");
    }

    const NoiseSchedule schedule;
    const GaussianOracleDenoiser denoiser(schedule, cond_mean, uncond_mean, stddev);
    GuidanceConfig g = guidance;
    g.seed = seed;
    g.validate();
    const DecodeContext ctx{stats, mean.frames(), mean.fps()};
    std::cerr << "sampling " << g.steps << " steps, w=" << g.cfg_weight << " u=" << g.loop_weight << "\n";
    const auto normalized = sample_looping(denoiser, Condition{&source}, g, ctx, source.width(), source.height(),
                                           schedule);
    const auto vol = denormalize(normalized, stats);
    fs::create_directories(out);
    write_spectral_volume(out / "loop.specvol", vol);
    const auto tex = ifft_inverse(vol, ctx.frames);
    std::cout << "loop_loss " << loop_loss(tex) << "\n";
    if (!no_frames) {
      const auto frames = animate(source, tex, render.config());
      write_frames(out / "frames", source, frames);
      std::cout << "frames " << frames.size() + 1 << "\n";
    }
  }
};

struct SimulateCmd {
  fs::path image, volume, events, out;
  double duration = 4.0;
  SimConfig sim;
  double damping = kDefaultDamping;
  double mass = kDefaultModalMass;
  double magnify = 1.0;
  bool no_frames = false;

  void run() const {
    const auto source = read_png(image);
    const auto vol = read_spectral_volume(volume);
    require(vol.width() == source.width() && vol.height() == source.height(), ErrorCode::DimensionMismatch,
            "image and volume differ in size");
    std::vector<TimedForceEvent> schedule;
    {
      std::istringstream in(slurp(events));
      std::string line;
      int lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        const auto ev = parse_force_record(line);
        require(ev.has_value(), ErrorCode::DataError,
                events.string() + ":" + std::to_string(lineno) + ": malformed event: " + line);
        require(ev->time <= duration, ErrorCode::InvalidArgument,
                events.string() + ":" + std::to_string(lineno) + ": event after the end of the run");
        schedule.push_back(*ev);
      }
    }
    std::stable_sort(schedule.begin(), schedule.end(), [](const auto& a, const auto& b) { return a.time < b.time; });

    const auto basis = modal_basis(vol);
    const auto params = OscillatorParams::from_volume(vol, damping, mass);
    ModalState state(vol.bands(), sim.dt(), params);
    ForceSchedule forces;
    const auto weights = compute_weights(ifft_inverse(vol));
    const int frames = static_cast<int>(std::floor(duration * sim.frame_rate + 1e-9));
    if (!no_frames) {
      fs::create_directories(out);
      write_png(frame_name(out, 0), source);
    }
    std::size_t next = 0;
    for (int frame = 1; frame <= frames; ++frame) {
      for (int s = 0; s < sim.substeps; ++s) {
        while (next < schedule.size() && schedule[next].time <= state.time() + 0.5 * state.dt()) {
          forces.apply(schedule[next++], basis, state, params);
        }
        step(state, params, forces.drive());
      }
      auto field = displacement_field(basis, state);
      TickOutput t;
      t.tick = static_cast<std::uint64_t>(frame);
      t.energy = state.band_energy(params);
      for (auto& d : field.data()) {
        d.dx *= magnify;
        d.dy *= magnify;
        t.max_displacement = std::max(t.max_displacement, std::hypot(d.dx, d.dy));
      }
      std::cout << t.telemetry() << "\n";
      if (!no_frames) write_png(frame_name(out, frame), synthesize_frame(source, field, weights));
    }
  }
};

struct ServeCmd {
  std::string bind = "0.0.0.0";
  int port = -1;
  int threads = 2;

  void run() const {
    int p = port;
    if (p < 0) {
      const char* env = std::getenv("PORT");
      p = env != nullptr ? std::atoi(env) : 8080;
    }
    require(p >= 0 && p <= 65535, ErrorCode::InvalidArgument, "port out of range");
    SessionManager sessions;
    Server server(sessions, bind, static_cast<unsigned short>(p), threads);
    server.start();
    std::cerr << "listening on " << bind << ":" << server.port() << "\n";
    std::cout << "port " << server.port() << std::endl;
    server.wait();
  }
};

struct SynthCmd {
  std::string kind;
  fs::path out;
  int size = 64;
  int frames = 1;
  int dx = 3, dy = 2;
  int bands = 8;
  double amplitude = 1.5;
  int cycles = 2;

  void run(std::uint64_t seed) const {
    if (kind == "translate") {
      const int margin = (std::abs(dx) + std::abs(dy)) * frames + 8;
      const auto big = fixtures::noise_texture(size + 2 * margin, size + 2 * margin, seed + 1, 1.5);
      fs::create_directories(out);
      MotionTexture truth(size, size, frames);
      for (int t = 0; t <= frames; ++t) {
        GrayImage img(size, size);
        for (int y = 0; y < size; ++y) {
          for (int x = 0; x < size; ++x) img.at(x, y) = big.at(x + margin - t * dx, y + margin - t * dy);
        }
        write_png(frame_name(out, t), to_rgb(img));
        if (t == 0) continue;
        for (int y = 0; y < size; ++y) {
          for (int x = 0; x < size; ++x) truth.at(t - 1, x, y) = {static_cast<double>(t * dx), static_cast<double>(t * dy)};
        }
      }
      write_motion_texture(out / "truth.motex", truth);
      std::cout << "frames " << frames + 1 << "\n";
    } else if (kind == "sway") {
      fixtures::SwayScene scene;
      scene.width = scene.height = size;
      scene.frames = frames;
      scene.amplitude = amplitude;
      scene.cycles = cycles;
      fs::create_directories(out);
      for (int t = 0; t <= frames; ++t) write_png(frame_name(out, t), scene.frame(t));
      write_motion_texture(out / "truth.motex", scene.truth());
      std::cout << "frames " << frames + 1 << "\n";
    } else if (kind == "drift") {
      auto vol = truncate(fft_forward(fixtures::drifting_texture(size, size, frames)), std::min(bands, frames / 2));
      vol.clear_mean();
      if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
      write_spectral_volume(out, vol);
      write_png(out.string() + ".png", fixtures::pattern_image(size, size));
      std::cout << "bands " << vol.bands() << "\n";
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown synth kind " + kind);
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral motion textures: extract, analyze, animate, simulate and serve."};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice");

  std::function<void()> action;

  ExtractCmd extract;
  auto* c = app.add_subcommand("extract", "Video directory -> MOTEX001 motion texture");
  c->add_option("video", extract.video, "Directory of frame_%05d.png")->required()->check(CLI::ExistingDirectory);
  c->add_option("out", extract.out, "Output .motex")->required();
  c->add_option("--start", extract.start, "First frame")->check(CLI::NonNegativeNumber);
  c->add_option("--horizon", extract.horizon, "Frames after the start")->check(CLI::PositiveNumber);
  c->add_option("--alpha", extract.flow.alpha, "Flow smoothness weight");
  c->add_option("--iterations", extract.flow.iterations, "Relaxation sweeps per warp");
  c->add_option("--warps", extract.flow.warps, "Warps per pyramid level");
  c->add_option("--reference", extract.reference, "Ground-truth .motex; reports mean endpoint error");
  c->add_option("--border", extract.border, "Pixels excluded from the endpoint error");
  c->callback([&] { action = [&] { extract.run(); }; });

  SpectralCmd spectral;
  c = app.add_subcommand("spectral", "MOTEX001 -> SPECVOL1 spectral volume");
  c->add_option("in", spectral.in, "Input .motex")->required()->check(CLI::ExistingFile);
  c->add_option("out", spectral.out, "Output .specvol")->required();
  c->add_option("--bands", spectral.bands, "Bands kept")->check(CLI::PositiveNumber);
  c->add_option("--fps", spectral.fps, "Source frame rate")->check(CLI::PositiveNumber);
  c->callback([&] { action = [&] { spectral.run(); }; });

  CorpusCmd corpus;
  c = app.add_subcommand("corpus", "Video directories -> filtered sample corpus with manifest");
  c->add_option("out", corpus.out, "Corpus directory")->required();
  c->add_option("videos", corpus.videos, "Video directories")->required()->check(CLI::ExistingDirectory);
  c->add_option("--horizon", corpus.params.horizon, "Frames per sample after the start")->check(CLI::PositiveNumber);
  c->add_option("--stride", corpus.params.stride, "Start-frame stride")->check(CLI::PositiveNumber);
  c->add_option("--bands", corpus.params.bands, "Bands kept")->check(CLI::PositiveNumber);
  c->add_option("--fps", corpus.params.fps, "Source frame rate")->check(CLI::PositiveNumber);
  c->callback([&] { action = [&] { corpus.run(); }; });

  StatsCmd stats;
  c = app.add_subcommand("stats", "Corpus -> normalization and spectrum statistics");
  c->add_option("corpus", stats.corpus, "Corpus directory or manifest.txt")->required()->check(CLI::ExistingPath);
  c->add_option("--percentile", stats.percentile, "Scale percentile")->check(CLI::Range(0.0, 1.0));
  c->callback([&] { action = [&] { stats.run(); }; });

  AnimateCmd animate_cmd;
  c = app.add_subcommand("animate", "Image + SPECVOL1 -> PNG frames");
  c->add_option("image", animate_cmd.image, "Source PNG")->required()->check(CLI::ExistingFile);
  c->add_option("volume", animate_cmd.volume, "Spectral volume")->required()->check(CLI::ExistingFile);
  c->add_option("out", animate_cmd.out, "Output frame directory")->required();
  c->add_option("--stats", animate_cmd.stats, "Normalization stats; the volume is then treated as normalized")
      ->check(CLI::ExistingFile);
  c->add_option("--frames", animate_cmd.frames, "Trajectory length (default: the volume's T)");
  animate_cmd.render.add(c);
  c->callback([&] { action = [&] { animate_cmd.run(); }; });

  LoopCmd loop;
  c = app.add_subcommand("loop", "Image + oracle denoiser config -> looping volume and frames");
  c->add_option("image", loop.image, "Conditioning PNG")->required()->check(CLI::ExistingFile);
  c->add_option("oracle", loop.oracle, "Oracle config JSON")->required()->check(CLI::ExistingFile);
  c->add_option("out", loop.out, "Output directory")->required();
  c->add_option("--cfg-weight", loop.guidance.cfg_weight, "Classifier-free guidance weight w");
  c->add_option("--loop-weight", loop.guidance.loop_weight, "Loop guidance weight u");
  c->add_option("--steps", loop.guidance.steps, "DDIM steps")->check(CLI::PositiveNumber);
  c->add_option("--recurrence", loop.guidance.recurrence, "Self-recurrences per step")->check(CLI::NonNegativeNumber);
  c->add_option("--fd-step", loop.guidance.fd_step, "Finite-difference step");
  c->add_option("--fd-block", loop.guidance.fd_block, "Coordinates differentiated per step (0: all)");
  c->add_flag("--no-frames", loop.no_frames, "Skip rendering");
  loop.render.add(c);
  c->callback([&] { action = [&] { loop.run(seed); }; });

  SimulateCmd simulate_cmd;
  c = app.add_subcommand("simulate", "Headless modal run from an event script -> frames + telemetry");
  c->add_option("image", simulate_cmd.image, "Source PNG")->required()->check(CLI::ExistingFile);
  c->add_option("volume", simulate_cmd.volume, "Spectral volume")->required()->check(CLI::ExistingFile);
  c->add_option("events", simulate_cmd.events, "Event script, one \"t_ms kind x y fx fy\" per line")
      ->required()
      ->check(CLI::ExistingFile);
  c->add_option("out", simulate_cmd.out, "Output frame directory")->required();
  c->add_option("--duration", simulate_cmd.duration, "Seconds")->check(CLI::NonNegativeNumber);
  c->add_option("--fps", simulate_cmd.sim.frame_rate, "Output frame rate")->check(CLI::PositiveNumber);
  c->add_option("--substeps", simulate_cmd.sim.substeps, "Integration steps per frame")->check(CLI::PositiveNumber);
  c->add_option("--damping", simulate_cmd.damping, "Damping ratio")->check(CLI::NonNegativeNumber);
  c->add_option("--mass", simulate_cmd.mass, "Modal mass")->check(CLI::PositiveNumber);
  c->add_option("--magnify", simulate_cmd.magnify, "Rendered displacement scale");
  c->add_flag("--no-frames", simulate_cmd.no_frames, "Telemetry only");
  c->callback([&] { action = [&] { simulate_cmd.run(); }; });

  ServeCmd serve;
  c = app.add_subcommand("serve", "Start the interactive session server");
  c->add_option("--bind", serve.bind, "Listen address");
  c->add_option("--port", serve.port, "Listen port (default: $PORT, else 8080)");
  c->add_option("--threads", serve.threads, "Network threads")->check(CLI::PositiveNumber);
  c->callback([&] { action = [&] { serve.run(); }; });

  SynthCmd synth;
  c = app.add_subcommand("synth", "Write synthetic fixtures: translate, sway (videos) or drift (volume)");
  c->add_option("kind", synth.kind, "translate, sway or drift")
      ->required()
      ->check(CLI::IsMember({"translate", "sway", "drift"}));
  c->add_option("out", synth.out, "Output directory (file for drift)")->required();
  c->add_option("--size", synth.size, "Width and height")->check(CLI::PositiveNumber);
  c->add_option("--frames", synth.frames, "Frames after the first (T for drift)")->check(CLI::PositiveNumber);
  c->add_option("--dx", synth.dx, "Per-frame x shift");
  c->add_option("--dy", synth.dy, "Per-frame y shift");
  c->add_option("--bands", synth.bands, "Bands kept (drift)")->check(CLI::PositiveNumber);
  c->add_option("--amplitude", synth.amplitude, "Peak sway in pixels");
  c->add_option("--cycles", synth.cycles, "Sway cycles over the video");
  c->callback([&] { action = [&] { synth.run(seed); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  try {
    action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return 0;
}
