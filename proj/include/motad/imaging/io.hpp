#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "motad/imaging/types.hpp"

namespace motad {

/// Middlebury .flo: float32 202021.25 tag, int32 width, int32 height, then
/// interleaved float32 (dx, dy) in row-major order, all little-endian.
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& flow, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_flo(const FlowField& flow);
FlowField decode_flo(const std::vector<std::uint8_t>& bytes);

inline constexpr float kFloTag = 202021.25f;

/// 8-bit PNG (gray or RGB) to [0,1] floats.
Image read_png(const std::filesystem::path& path);
/// Quantizes to 8 bits with rounding. Output bytes depend only on pixels.
void write_png(const Image& img, const std::filesystem::path& path);
/// Raw 8-bit RGB buffer (width*height*3 bytes).
void write_png_rgb8(const std::vector<std::uint8_t>& rgb, int width, int height,
                    const std::filesystem::path& path);

/// Binary PGM (P5, maxval 255) gray images.
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const Image& img, const std::filesystem::path& path);

/// Dispatches on extension (.png / .pgm).
Image read_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

}  // namespace motad
