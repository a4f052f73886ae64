#pragma once

#include <filesystem>

#include "kryptolab/image.hpp"

namespace kryptolab::pnm {

/// Reads binary 8-bit PGM (P5, one channel) or PPM (P6, three channels).
/// Values map linearly to [0,1] as v / maxval.
Image read_image(const std::filesystem::path& path);

/// Writes P5 for one channel and P6 for three; values are rounded to 8 bits.
void write_image(const std::filesystem::path& path, const Image& img);

/// Masks are stored as P5 with {0, 255}; any nonzero byte reads as foreground.
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask(const std::filesystem::path& path);

}  // namespace kryptolab::pnm
