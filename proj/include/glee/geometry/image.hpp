#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace glee::geometry {

struct ImageSize {
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// Interleaved H x W x C float image, values nominally in [0, 1]. Pixel (r, c)
// covers the continuous square [c, c+1) x [r, r+1); its center sits at
// (c + 0.5, r + 0.5).
struct Image {
  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c = 3, float fill = 0.0f)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<float> pixels;

  bool empty() const { return pixels.empty(); }
  ImageSize size() const { return {height, width}; }

  float& at(std::size_t r, std::size_t c, std::size_t ch) {
    return pixels[(r * width + c) * channels + ch];
  }
  float at(std::size_t r, std::size_t c, std::size_t ch) const {
    return pixels[(r * width + c) * channels + ch];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Bilinear sample at continuous index coordinates (x = column, y = row,
// integer values hit pixel centers), clamping to the border.
void sample_bilinear(const Image& img, double x, double y, float* out);

// Half-pixel-center bilinear resize.
Image resize_bilinear(const Image& src, std::size_t out_h, std::size_t out_w);

Image mirror_horizontal(const Image& src);

// 8-bit binary netpbm (P5 grey, P6 RGB). Grey images are expanded to 3
// channels on read.
Image read_netpbm(const std::string& path);
ImageSize read_netpbm_size(const std::string& path);
void write_netpbm(const std::string& path, const Image& img);

}  // namespace glee::geometry
