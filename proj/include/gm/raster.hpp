#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gm/error.hpp"

namespace gm {

/// Row-major raster. Pixel (u, v) is column u, row v.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}
  Grid(int width, int height, std::vector<T> values)
      : width_(width), height_(height), data_(std::move(values)) {
    if (data_.size() != checked_size(width, height)) {
      fail(ErrorCode::DimensionMismatch, "raster value count does not match " +
                                             std::to_string(width) + "x" + std::to_string(height));
    }
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] bool contains(int u, int v) const noexcept {
    return u >= 0 && v >= 0 && u < width_ && v < height_;
  }

  [[nodiscard]] const T& at(int u, int v) const {
    return data_[static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(u)];
  }
  T& at(int u, int v) {
    return data_[static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(u)];
  }

  [[nodiscard]] std::span<const T> values() const noexcept { return data_; }
  std::span<T> values() noexcept { return data_; }

  template <typename U>
  [[nodiscard]] bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width <= 0 || height <= 0) {
      fail(ErrorCode::InvalidArgument, "raster dimensions must be positive");
    }
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Label = std::uint8_t;

/// Per-pixel class codes.
using SegMask = Grid<Label>;

/// Metric z-depth per pixel. Non-positive or non-finite values mark dropouts.
class DepthMap : public Grid<float> {
 public:
  using Grid<float>::Grid;
  DepthMap(Grid<float> grid) : Grid<float>(std::move(grid)) {}  // NOLINT

  [[nodiscard]] static bool valid_value(float d) noexcept { return std::isfinite(d) && d > 0.0f; }
  [[nodiscard]] bool valid(int u, int v) const { return contains(u, v) && valid_value(at(u, v)); }
};

struct PixelCoord {
  int u = 0;
  int v = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
  friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

}  // namespace gm
