#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irisloc/geometry.hpp"

namespace irisloc {

/// Grayscale raster. Values are 32-bit floats, nominally in [0, 1]; storage is
/// row-major with pixel centers at integer coordinates.
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return px_.empty(); }

  float& at(int x, int y) { return px_[static_cast<size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return px_[static_cast<size_t>(y) * width_ + x]; }

  float* row(int y) { return px_.data() + static_cast<size_t>(y) * width_; }
  const float* row(int y) const { return px_.data() + static_cast<size_t>(y) * width_; }

  float* data() { return px_.data(); }
  const float* data() const { return px_.data(); }
  size_t size() const { return px_.size(); }

  /// Bilinear sample at a continuous coordinate; border pixels replicate.
  float sample(double x, double y) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> px_;
};

/// 8-bit binary PGM (P5). Loading scales to [0, 1] by the header maxval;
/// saving writes "P5\n<w> <h>\n255\n" followed by rounded row-major bytes.
Image load_pgm(const std::string& path);
void save_pgm(const Image& img, const std::string& path);

std::vector<uint8_t> image_to_u8(const Image& img);
Image image_from_u8(const std::vector<uint8_t>& bytes, int width, int height);

/// Bilinear resize with half-pixel centers: src = (dst + 0.5) * scale - 0.5.
Image resize_bilinear(const Image& src, int out_width, int out_height);

/// Separable Gaussian blur, kernel truncated at 3 sigma, replicated borders.
/// sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& src, double sigma);

/// Resamples src so that out(p) = src(map^-1(p)); `map` sends source
/// coordinates to destination coordinates. Border pixels replicate.
Image warp_affine(const Image& src, const Affine2& map, int out_width, int out_height);

}  // namespace irisloc
