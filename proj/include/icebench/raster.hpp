#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "icebench/error.hpp"

namespace icebench {

// Dense row-major 2-D grid. Rows are contiguous; (r, c) maps to data[r * width + c].
template <typename T>
class Raster {
 public:
  Raster() = default;

  Raster(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height <= 0 || width <= 0)
      fail(Err::InvalidArgument, "raster dims must be positive, got " + std::to_string(height) +
                                     "x" + std::to_string(width));
    data_.assign(static_cast<size_t>(height) * static_cast<size_t>(width), fill);
  }

  static Raster from_data(int height, int width, std::vector<T> data) {
    Raster r(height, width);
    if (data.size() != r.data_.size())
      fail(Err::ShapeMismatch, "raster payload has " + std::to_string(data.size()) +
                                   " elements, want " + std::to_string(r.data_.size()));
    r.data_ = std::move(data);
    return r;
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& at(int r, int c) { return data_[static_cast<size_t>(r) * width_ + c]; }
  const T& at(int r, int c) const { return data_[static_cast<size_t>(r) * width_ + c]; }

  const T* row(int r) const { return data_.data() + static_cast<size_t>(r) * width_; }
  T* row(int r) { return data_.data() + static_cast<size_t>(r) * width_; }

  bool in_bounds(int r, int c) const noexcept {
    return r >= 0 && r < height_ && c >= 0 && c < width_;
  }

  template <typename U>
  bool same_shape(const Raster<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const Raster& other) const {
    return height_ == other.height_ && width_ == other.width_ && data_ == other.data_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using LabelRaster = Raster<uint8_t>;

// Class ids: 0..5 are ice classes, 255 means "ignore" (mixed, unknown, or land).
inline constexpr uint8_t kIgnoreLabel = 255;
inline constexpr int kNumClasses = 6;

inline const char* class_name(int cls) {
  switch (cls) {
    case 0: return "open_water";
    case 1: return "new_ice";
    case 2: return "young_ice";
    case 3: return "thin_fyi";
    case 4: return "thick_fyi";
    case 5: return "old_ice";
  }
  return "ignore";
}

}  // namespace icebench
