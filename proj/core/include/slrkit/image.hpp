#pragma once

#include <filesystem>

#include "slrkit/tensor.hpp"

namespace slrkit {

// Decodes any OpenCV-supported image to an (h, w, 3) RGB tensor with values
// in [0, 255]. Throws DataError with the path on decode failure.
Tensor decode_image(const std::filesystem::path& path);

// Bilinear resample to (side, side, 3) with half-pixel-center alignment:
// src = (dst + 0.5) * scale - 0.5, edge-clamped. Deterministic.
Tensor resize_bilinear(const Tensor& img, int side);

// decode + resize.
Tensor load_and_resize(const std::filesystem::path& path, int side = 75);

// Writes an (h, w, 3) RGB tensor with values in [0, 255] as PNG
// (values rounded to the nearest integer and clamped).
void write_png(const std::filesystem::path& path, const Tensor& img);

}  // namespace slrkit
