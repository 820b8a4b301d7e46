#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace pt {

/// RGB raster with float channels in [0, 255], row-major, interleaved.
/// Float storage keeps intensity transforms exact until encoding.
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 255.0f);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  float* pixel(int x, int y) noexcept { return &data_[index(x, y)]; }
  const float* pixel(int x, int y) const noexcept { return &data_[index(x, y)]; }
  void set(int x, int y, float r, float g, float b) noexcept;
  void fill_rect(int x0, int y0, int w, int h, float r, float g, float b) noexcept;

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  /// ITU-R BT.601 luma, row-major.
  std::vector<double> luma() const;

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// Throws Error(InvalidImage) when the bytes are not a decodable PNG.
Image decode_png(std::span<const std::uint8_t> png);
/// 8-bit RGB; channels are rounded and clamped.
std::vector<std::uint8_t> encode_png(const Image& image);

Image read_png_file(const std::filesystem::path& path);
void write_png_file(const std::filesystem::path& path, const Image& image);

}  // namespace pt
