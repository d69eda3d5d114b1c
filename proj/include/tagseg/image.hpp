#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace tagseg {

/// Interleaved 8-bit sRGB raster, row-major.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // height * width * 3

  ImageU8() = default;
  ImageU8(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::uint8_t* px(int r, int c) {
    return rgb.data() + 3 * (static_cast<std::size_t>(r) * width + c);
  }
  const std::uint8_t* px(int r, int c) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(r) * width + c);
  }
  bool empty() const { return rgb.empty(); }
};

/// Single-channel 8-bit raster of label or segment ids.
struct IdRaster {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> id;  // height * width

  IdRaster() = default;
  IdRaster(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), id(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int r, int c) { return id[static_cast<std::size_t>(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return id[static_cast<std::size_t>(r) * width + c]; }
  bool empty() const { return id.empty(); }
};

/// Planar CIELAB image (D65 white point). L in [0,100], a and b roughly [-110,110].
struct LabImage {
  Eigen::ArrayXXf L;
  Eigen::ArrayXXf a;
  Eigen::ArrayXXf b;

  int height() const { return static_cast<int>(L.rows()); }
  int width() const { return static_cast<int>(L.cols()); }
};

LabImage rgb_to_lab(const ImageU8& image);

/// Central-difference gradient of the L channel with replicated borders.
/// Orientation is folded into [0, pi).
struct Gradient {
  Eigen::ArrayXXf magnitude;
  Eigen::ArrayXXf orientation;
};

Gradient lab_gradient(const LabImage& lab);

}  // namespace tagseg
