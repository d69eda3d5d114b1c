#pragma once

#include <filesystem>

#include "tagseg/image.hpp"

namespace tagseg {

/// Reads a .png or .ppm (P6) color image. Gray and palette PNGs are expanded
/// to RGB, alpha is dropped. Throws DataError on unreadable input.
ImageU8 read_image(const std::filesystem::path& path);

/// Reads an 8-bit grayscale PNG as an id raster.
IdRaster read_id_raster(const std::filesystem::path& path);

void write_image_png(const std::filesystem::path& path, const ImageU8& image);
void write_id_raster_png(const std::filesystem::path& path, const IdRaster& raster);

}  // namespace tagseg
