// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "vo/core/image.hpp"

namespace vo {

// PGM (P5, binary). 8-bit or 16-bit; 16-bit samples are big-endian per the
// format. Values are normalized to [0, 1] by the header maxval on load.
Image load_pgm(const std::string& path);
void save_pgm16(const std::string& path, const Image& img);

// PFM, single-channel ("Pf"), little-endian (negative scale), rows stored
// bottom-up. Values pass through unscaled.
Image load_pfm(const std::string& path);
void save_pfm(const std::string& path, const Image& img);

// Grayscale PNG, 8 or 16 bit, normalized to [0, 1] on load.
Image load_png_gray(const std::string& path);
void save_png_gray16(const std::string& path, const Image& img);

// Dispatch on extension: .pgm, .pfm, .png.
Image load_image(const std::string& path);

}  // namespace vo
