#pragma once

#include <string>

#include "acsc/tensor.hpp"

namespace acsc {

// Binary PGM (P5, 8-bit, maxval 255). Pixels are divided by 255 on read so
// images enter the library already in [0,1].
Image read_pgm(const std::string& path);

// Clamps to [0,1], rescales to 0..255 and rounds to nearest. Single-channel
// images only.
void write_pgm(const Image& x, const std::string& path);

}  // namespace acsc
