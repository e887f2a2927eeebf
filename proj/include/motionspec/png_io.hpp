#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "motionspec/image.hpp"

namespace motionspec {

RgbImage read_png(const std::filesystem::path& path);
RgbImage decode_png(std::span<const std::uint8_t> bytes);

void write_png(const std::filesystem::path& path, const RgbImage& img);
std::vector<std::uint8_t> encode_png(const RgbImage& img);

}  // namespace motionspec
