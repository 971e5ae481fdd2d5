#pragma once

// 8-bit single-channel PNG read/write over libpng.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "gm/error.hpp"
#include "gm/raster.hpp"

namespace gm::png {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void on_error(png_structp, png_const_charp msg) { throw Error(ErrorCode::FormatError, msg); }
inline void on_warning(png_structp, png_const_charp) {}

}  // namespace detail

inline void write_gray8(const std::filesystem::path& path, const Grid<Label>& image) {
  detail::FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::IoError, "libpng initialisation failed");
  }
  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const auto values = image.values();
    for (int v = 0; v < image.height(); ++v) {
      png_write_row(png, values.data() + static_cast<std::size_t>(v) * static_cast<std::size_t>(image.width()));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) fail(ErrorCode::IoError, "flush failed for " + path.string());
}

inline Grid<Label> read_gray8(const std::filesystem::path& path) {
  detail::FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(ErrorCode::FormatError, "cannot open " + path.string());

  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    fail(ErrorCode::FormatError, path.string() + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::on_error, detail::on_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::IoError, "libpng initialisation failed");
  }
  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    if (png_get_bit_depth(png, info) != 8 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
        png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
      fail(ErrorCode::FormatError, path.string() + ": expected 8-bit grayscale, non-interlaced");
    }
    std::vector<Label> data(static_cast<std::size_t>(width) * height);
    for (png_uint_32 v = 0; v < height; ++v) png_read_row(png, data.data() + static_cast<std::size_t>(v) * width, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return Grid<Label>(static_cast<int>(width), static_cast<int>(height), std::move(data));
  } catch (const Error& e) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
}

}  // namespace gm::png
