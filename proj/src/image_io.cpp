#include "tagseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <memory>
#include <string>

#include "tagseg/errors.hpp"

namespace tagseg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Reads a PNG into 8-bit rows with `channels` samples per pixel.
std::vector<std::vector<png_byte>> read_png_rows(const std::filesystem::path& path, int& height,
                                                 int& width, int& channels, bool force_rgb) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw DataError("unreadable raster: " + path.string());

  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw DataError("unreadable raster (not a PNG): " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png reader allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png reader allocation failed");
  }
  std::vector<std::vector<png_byte>> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unreadable raster: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (force_rgb && (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA))
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  channels = static_cast<int>(png_get_channels(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  rows.assign(static_cast<std::size_t>(height), std::vector<png_byte>(rowbytes));
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) row_ptrs[static_cast<std::size_t>(r)] = rows[static_cast<std::size_t>(r)].data();
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return rows;
}

ImageU8 read_png_rgb(const std::filesystem::path& path) {
  int h = 0, w = 0, channels = 0;
  auto rows = read_png_rows(path, h, w, channels, /*force_rgb=*/true);
  if (channels != 3) throw DataError("unexpected channel count in " + path.string());
  ImageU8 image(h, w);
  for (int r = 0; r < h; ++r)
    std::copy_n(rows[static_cast<std::size_t>(r)].data(), static_cast<std::size_t>(w) * 3, image.px(r, 0));
  return image;
}

int parse_ppm_int(std::FILE* f, const std::string& path) {
  int c = std::fgetc(f);
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = std::fgetc(f);
    } else if (!std::isspace(c)) {
      break;
    }
    c = std::fgetc(f);
  }
  if (c == EOF || !std::isdigit(c)) throw DataError("unreadable raster (bad PPM header): " + path);
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = std::fgetc(f);
  }
  return value;
}

ImageU8 read_ppm(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw DataError("unreadable raster: " + path.string());
  char magic[2];
  if (std::fread(magic, 1, 2, file.get()) != 2 || magic[0] != 'P' || magic[1] != '6')
    throw DataError("unreadable raster (expected P6 PPM): " + path.string());
  const int w = parse_ppm_int(file.get(), path.string());
  const int h = parse_ppm_int(file.get(), path.string());
  const int maxval = parse_ppm_int(file.get(), path.string());
  if (maxval != 255) throw DataError("unsupported PPM maxval in " + path.string());
  ImageU8 image(h, w);
  if (std::fread(image.rgb.data(), 1, image.rgb.size(), file.get()) != image.rgb.size())
    throw DataError("unreadable raster (truncated PPM): " + path.string());
  return image;
}

void write_png(const std::filesystem::path& path, int height, int width, int color_type,
               const png_bytep* row_ptrs) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw DataError("unwritable path: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png writer allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("unwritable path: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytep*>(row_ptrs));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageU8 read_image(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_png_rgb(path);
  if (ext == ".ppm") return read_ppm(path);
  throw DataError("unsupported image format: " + path.string());
}

IdRaster read_id_raster(const std::filesystem::path& path) {
  int h = 0, w = 0, channels = 0;
  auto rows = read_png_rows(path, h, w, channels, /*force_rgb=*/false);
  if (channels != 1) throw DataError("not a grayscale id raster: " + path.string());
  IdRaster raster(h, w);
  for (int r = 0; r < h; ++r)
    std::copy_n(rows[static_cast<std::size_t>(r)].data(), static_cast<std::size_t>(w),
                raster.id.data() + static_cast<std::size_t>(r) * w);
  return raster;
}

void write_image_png(const std::filesystem::path& path, const ImageU8& image) {
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int r = 0; r < image.height; ++r)
    rows[static_cast<std::size_t>(r)] = const_cast<png_bytep>(image.px(r, 0));
  write_png(path, image.height, image.width, PNG_COLOR_TYPE_RGB, rows.data());
}

void write_id_raster_png(const std::filesystem::path& path, const IdRaster& raster) {
  std::vector<png_bytep> rows(static_cast<std::size_t>(raster.height));
  for (int r = 0; r < raster.height; ++r)
    rows[static_cast<std::size_t>(r)] =
        const_cast<png_bytep>(raster.id.data() + static_cast<std::size_t>(r) * raster.width);
  write_png(path, raster.height, raster.width, PNG_COLOR_TYPE_GRAY, rows.data());
}

}  // namespace tagseg
