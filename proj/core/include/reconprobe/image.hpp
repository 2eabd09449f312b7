#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace reconprobe {

// Declared value range of a raster. Metrics never rescale between the two.
enum class PixelScale { unit, byte };

double scale_max(PixelScale scale);
std::string_view to_string(PixelScale scale);
PixelScale parse_pixel_scale(std::string_view text);

// H x W x C grid of samples stored row-major with interleaved channels.
class ImageRaster {
 public:
  ImageRaster() = default;
  ImageRaster(int height, int width, int channels, PixelScale scale);
  ImageRaster(int height, int width, int channels, PixelScale scale, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  PixelScale scale() const { return scale_; }
  double max_value() const { return scale_max(scale_); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  double at(int row, int col, int ch = 0) const { return data_[index(row, col, ch)]; }
  double& at(int row, int col, int ch = 0) { return data_[index(row, col, ch)]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool same_shape(const ImageRaster& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  // Throws ValidationError when any sample lies outside the declared range.
  void check_range() const;
  // Clamps every sample into the declared range.
  void clamp_to_scale();

  // Same pixels expressed in another scale (v * 255 or v / 255).
  ImageRaster converted(PixelScale target) const;

  friend bool operator==(const ImageRaster&, const ImageRaster&) = default;

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  PixelScale scale_ = PixelScale::unit;
  std::vector<double> data_;
};

// Binary degraded-region mask; 1 marks a degraded pixel. Never empty.
class MaskRaster {
 public:
  MaskRaster() = default;
  MaskRaster(int height, int width, std::vector<std::uint8_t> bits);

  int height() const { return height_; }
  int width() const { return width_; }
  bool at(int row, int col) const { return bits_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  std::size_t count() const;

  bool matches(const ImageRaster& image) const {
    return height_ == image.height() && width_ == image.width();
  }

  struct Box {
    int row0, col0, row1, col1;  // half-open
    int rows() const { return row1 - row0; }
    int cols() const { return col1 - col0; }
  };
  // Tight bounding rectangle of the set bits.
  Box bounding_box() const;

  friend bool operator==(const MaskRaster&, const MaskRaster&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

// PNG (8-bit gray or RGB) and binary PGM/PPM (maxval 255).
ImageRaster load_image(const std::filesystem::path& path, PixelScale scale);
// Writes 8-bit samples, round(v / max * 255). Format chosen from the extension.
void save_image(const ImageRaster& image, const std::filesystem::path& path);

// Single-channel PNG, 0 = untouched, 255 = degraded.
void save_mask(const MaskRaster& mask, const std::filesystem::path& path);
MaskRaster load_mask(const std::filesystem::path& path);

}  // namespace reconprobe
