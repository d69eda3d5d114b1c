#include "tagseg/image.hpp"

#include <array>
#include <cmath>

namespace tagseg {

namespace {

const std::array<float, 256>& srgb_to_linear_table() {
  static const std::array<float, 256> table = [] {
    std::array<float, 256> t{};
    for (int i = 0; i < 256; ++i) {
      const float c = static_cast<float>(i) / 255.0f;
      t[i] = c <= 0.04045f ? c / 12.92f : std::pow((c + 0.055f) / 1.055f, 2.4f);
    }
    return t;
  }();
  return table;
}

inline float lab_f(float t) {
  constexpr float kDelta3 = 0.008856452f;  // (6/29)^3
  constexpr float kSlope = 7.787037f;      // 1 / (3 (6/29)^2)
  return t > kDelta3 ? std::cbrt(t) : kSlope * t + 4.0f / 29.0f;
}

}  // namespace

LabImage rgb_to_lab(const ImageU8& image) {
  const auto& lin = srgb_to_linear_table();
  LabImage lab;
  lab.L.resize(image.height, image.width);
  lab.a.resize(image.height, image.width);
  lab.b.resize(image.height, image.width);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const std::uint8_t* p = image.px(r, c);
      const float R = lin[p[0]], G = lin[p[1]], B = lin[p[2]];
      // sRGB -> XYZ (D65), normalized by the white point.
      const float x = (0.4124564f * R + 0.3575761f * G + 0.1804375f * B) / 0.95047f;
      const float y = 0.2126729f * R + 0.7151522f * G + 0.0721750f * B;
      const float z = (0.0193339f * R + 0.1191920f * G + 0.9503041f * B) / 1.08883f;
      const float fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
      lab.L(r, c) = 116.0f * fy - 16.0f;
      lab.a(r, c) = 500.0f * (fx - fy);
      lab.b(r, c) = 200.0f * (fy - fz);
    }
  }
  return lab;
}

Gradient lab_gradient(const LabImage& lab) {
  const int h = lab.height(), w = lab.width();
  Gradient g;
  g.magnitude.resize(h, w);
  g.orientation.resize(h, w);
  const float kPi = 3.14159265358979323846f;
  for (int r = 0; r < h; ++r) {
    const int rm = r > 0 ? r - 1 : 0;
    const int rp = r < h - 1 ? r + 1 : h - 1;
    for (int c = 0; c < w; ++c) {
      const int cm = c > 0 ? c - 1 : 0;
      const int cp = c < w - 1 ? c + 1 : w - 1;
      const float gx = 0.5f * (lab.L(r, cp) - lab.L(r, cm));
      const float gy = 0.5f * (lab.L(rp, c) - lab.L(rm, c));
      g.magnitude(r, c) = std::sqrt(gx * gx + gy * gy);
      float theta = std::atan2(gy, gx);
      if (theta < 0.0f) theta += kPi;
      if (theta >= kPi) theta -= kPi;
      g.orientation(r, c) = theta;
    }
  }
  return g;
}

}  // namespace tagseg
