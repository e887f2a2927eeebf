#include "motionspec/texture_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

namespace motionspec {

namespace {

constexpr std::string_view kMotexMagic = "MOTEX001";
constexpr std::string_view kSpecvolMagic = "SPECVOL1";
// Guards against allocating absurd buffers from a corrupt header.
constexpr std::uint64_t kMaxScalars = std::uint64_t{1} << 32;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }
  void u32(std::uint32_t v) { raw(to_little(v)); }
  void f32(double v) { raw(to_little(std::bit_cast<std::uint32_t>(static_cast<float>(v)))); }

  void finish() {
    out_.flush();
    require(static_cast<bool>(out_), ErrorCode::IoError, "write failed");
  }

 private:
  template <typename T>
  void raw(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void magic(std::string_view expected) {
    std::string got(expected.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    require(in_.gcount() == static_cast<std::streamsize>(got.size()) && got == expected, ErrorCode::DataError,
            "bad magic: expected " + std::string(expected));
  }
  std::uint32_t u32() { return to_little(raw<std::uint32_t>()); }
  float f32() {
    const float v = std::bit_cast<float>(to_little(raw<std::uint32_t>()));
    require(std::isfinite(v), ErrorCode::DataError, "non-finite value in payload");
    return v;
  }

 private:
  template <typename T>
  T raw() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(in_.gcount() == sizeof(T), ErrorCode::DataError, "truncated file");
    return v;
  }
  std::istream& in_;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

}  // namespace

void write_motion_texture(std::ostream& out, const MotionTexture& tex) {
  Writer w(out);
  w.magic(kMotexMagic);
  w.u32(static_cast<std::uint32_t>(tex.height()));
  w.u32(static_cast<std::uint32_t>(tex.width()));
  w.u32(static_cast<std::uint32_t>(tex.frames()));
  for (const auto& d : tex.data()) {
    w.f32(d.dx);
    w.f32(d.dy);
  }
  w.finish();
}

MotionTexture read_motion_texture(std::istream& in) {
  Reader r(in);
  r.magic(kMotexMagic);
  const auto h = r.u32();
  const auto w = r.u32();
  const auto t = r.u32();
  require(h > 0 && w > 0 && t > 0, ErrorCode::DataError, "MOTEX001 header has zero dimension");
  require(std::uint64_t{h} * w * t * 2 < kMaxScalars, ErrorCode::DataError, "MOTEX001 header too large");
  MotionTexture tex(static_cast<int>(w), static_cast<int>(h), static_cast<int>(t));
  for (auto& d : tex.data()) {
    d.dx = r.f32();
    d.dy = r.f32();
  }
  return tex;
}

void write_spectral_volume(std::ostream& out, const SpectralVolume& vol) {
  Writer w(out);
  w.magic(kSpecvolMagic);
  w.u32(static_cast<std::uint32_t>(vol.height()));
  w.u32(static_cast<std::uint32_t>(vol.width()));
  w.u32(static_cast<std::uint32_t>(vol.bands()));
  w.u32(static_cast<std::uint32_t>(vol.frames()));
  w.u32(static_cast<std::uint32_t>(std::lround(vol.fps() * 1000.0)));
  for (const auto& c : vol.data()) {
    w.f32(c.sx.real());
    w.f32(c.sx.imag());
    w.f32(c.sy.real());
    w.f32(c.sy.imag());
  }
  w.finish();
}

SpectralVolume read_spectral_volume(std::istream& in) {
  Reader r(in);
  r.magic(kSpecvolMagic);
  const auto h = r.u32();
  const auto w = r.u32();
  const auto k = r.u32();
  const auto t = r.u32();
  const auto fps_milli = r.u32();
  require(h > 0 && w > 0 && k > 0 && fps_milli > 0, ErrorCode::DataError, "SPECVOL1 header has zero field");
  require(std::uint64_t{t} >= 2ull * k, ErrorCode::DataError, "SPECVOL1 header has T < 2K");
  require(std::uint64_t{h} * w * k * 4 < kMaxScalars, ErrorCode::DataError, "SPECVOL1 header too large");
  SpectralVolume vol(static_cast<int>(w), static_cast<int>(h), static_cast<int>(k), static_cast<int>(t),
                     fps_milli / 1000.0);
  for (auto& c : vol.data()) {
    const double sxr = r.f32();
    const double sxi = r.f32();
    const double syr = r.f32();
    const double syi = r.f32();
    c.sx = {sxr, sxi};
    c.sy = {syr, syi};
  }
  return vol;
}

void write_motion_texture(const std::filesystem::path& path, const MotionTexture& tex) {
  auto out = open_out(path);
  write_motion_texture(out, tex);
}

MotionTexture read_motion_texture(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_motion_texture(in);
}

void write_spectral_volume(const std::filesystem::path& path, const SpectralVolume& vol) {
  auto out = open_out(path);
  write_spectral_volume(out, vol);
}

SpectralVolume read_spectral_volume(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_spectral_volume(in);
}

}  // namespace motionspec
