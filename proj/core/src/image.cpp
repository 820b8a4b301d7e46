#include "pt/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "pt/error.hpp"

namespace pt {

Image::Image(int width, int height, float fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidImage, "negative image size");
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3, fill);
}

void Image::set(int x, int y, float r, float g, float b) noexcept {
  float* p = pixel(x, y);
  p[0] = r;
  p[1] = g;
  p[2] = b;
}

void Image::fill_rect(int x0, int y0, int w, int h, float r, float g, float b) noexcept {
  int x1 = std::min(width_, x0 + w);
  int y1 = std::min(height_, y0 + h);
  for (int y = std::max(0, y0); y < y1; ++y) {
    for (int x = std::max(0, x0); x < x1; ++x) set(x, y, r, g, b);
  }
}

std::vector<double> Image::luma() const {
  std::vector<double> out(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.299 * data_[3 * i] + 0.587 * data_[3 * i + 1] + 0.114 * data_[3 * i + 2];
  }
  return out;
}

Image decode_png(std::span<const std::uint8_t> png) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_memory(&img, png.data(), png.size()) == 0) {
    throw Error(ErrorCode::InvalidImage, std::string("PNG header: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr) == 0) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::InvalidImage, "PNG decode: " + msg);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  std::transform(buf.begin(), buf.end(), out.data().begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.empty()) throw Error(ErrorCode::InvalidImage, "cannot encode an empty image");
  std::vector<std::uint8_t> rgb(image.data().size());
  std::transform(image.data().begin(), image.data().end(), rgb.begin(), [](float v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  });
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (png_image_write_to_memory(&img, nullptr, &size, 0, rgb.data(), 0, nullptr) == 0) {
    throw Error(ErrorCode::InvalidImage, std::string("PNG encode: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (png_image_write_to_memory(&img, out.data(), &size, 0, rgb.data(), 0, nullptr) == 0) {
    throw Error(ErrorCode::InvalidImage, std::string("PNG encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

Image read_png_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidImage, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

void write_png_file(const std::filesystem::path& path, const Image& image) {
  auto bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidImage, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace pt
