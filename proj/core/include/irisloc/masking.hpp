#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "irisloc/geometry.hpp"

namespace irisloc {

class Image;

/// Row-major boolean raster; nonzero means set.
struct BoolRaster {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> v;

  BoolRaster() = default;
  BoolRaster(int w, int h) : width(w), height(h), v(static_cast<size_t>(w) * h, 0) {}
  bool at(int x, int y) const { return v[static_cast<size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool b) { v[static_cast<size_t>(y) * width + x] = b ? 1 : 0; }
  size_t count() const;
};

struct EyelidMaskResult {
  BoolRaster mask;
  /// The chain P1-P3-P4-P5-P2-P8-P7-P6 crossed itself; the mask is still the
  /// even-odd fill of the polygon.
  bool self_intersecting = false;
};

/// Interior of the closed polygon P1->P3->P4->P5->P2->P8->P7->P6->P1 (upper
/// chain then lower chain), even-odd fill rule, boundary pixels set.
EyelidMaskResult eyelid_mask(const std::array<Point, 8>& points, int width, int height);

/// Rasterizes the polygon chain edges into an existing mask.
void draw_polygon_boundary(BoolRaster& mask, const std::array<Point, 8>& points);

struct IrisMaskResult {
  /// Usable-pixel mask: inside iris circle, inside eyelid polygon, and within
  /// the Tukey fences of the region's intensity distribution.
  BoolRaster usable;
  bool empty_region = false;
  double q1 = 0.0, q3 = 0.0;
  double fence_lo = 0.0, fence_hi = 0.0;
};

/// Interquartile anomaly masking over pixels inside iris AND eyelid mask.
/// Quantiles use linear interpolation; pixels outside
/// [Q1 - factor*IQR, Q3 + factor*IQR] are dropped. Fences are computed once
/// per call, so re-running on the surviving pixels removes nothing more.
IrisMaskResult iqr_anomaly_mask(const Image& image, const Circle& iris,
                                const BoolRaster& eyelid, double fence_factor = 1.5);

/// Linear-interpolation quantile of unsorted values, p in [0, 1].
double interpolated_quantile(std::vector<double> values, double p);

/// 0/255 PGM export for external recognition engines.
void save_mask_pgm(const BoolRaster& mask, const std::string& path);

}  // namespace irisloc
