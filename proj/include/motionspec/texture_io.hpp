#pragma once

#include <filesystem>
#include <iosfwd>

#include "motionspec/spectral.hpp"

namespace motionspec {

// MOTEX001: magic, u32 H, W, T, then T*H*W*2 f32 as [t][y][x][dx, dy].
// SPECVOL1: magic, u32 H, W, K, T, fps_milli, then K*H*W*4 f32 as
// [k][y][x][Re Sx, Im Sx, Re Sy, Im Sy]. Everything little-endian.

void write_motion_texture(std::ostream& out, const MotionTexture& tex);
MotionTexture read_motion_texture(std::istream& in);
void write_motion_texture(const std::filesystem::path& path, const MotionTexture& tex);
MotionTexture read_motion_texture(const std::filesystem::path& path);

/// The mean plane is not part of the format and is dropped.
void write_spectral_volume(std::ostream& out, const SpectralVolume& vol);
SpectralVolume read_spectral_volume(std::istream& in);
void write_spectral_volume(const std::filesystem::path& path, const SpectralVolume& vol);
SpectralVolume read_spectral_volume(const std::filesystem::path& path);

}  // namespace motionspec
