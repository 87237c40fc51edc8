#include "irisloc/masking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "irisloc/error.hpp"
#include "irisloc/image.hpp"

namespace irisloc {

size_t BoolRaster::count() const {
  size_t n = 0;
  for (uint8_t b : v) n += b != 0;
  return n;
}

namespace {

// The polygon chain: upper lid left-to-right, then lower lid right-to-left.
std::array<Point, 8> chain_order(const std::array<Point, 8>& p) {
  return {p[0], p[2], p[3], p[4], p[1], p[7], p[6], p[5]};
}

void draw_segment(BoolRaster& m, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(a.x + t * dx));
    const int y = static_cast<int>(std::lround(a.y + t * dy));
    if (x >= 0 && x < m.width && y >= 0 && y < m.height) m.set(x, y, true);
  }
}

bool segments_properly_intersect(Point p1, Point p2, Point p3, Point p4) {
  auto cross = [](Point o, Point a, Point b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  const double d1 = cross(p3, p4, p1), d2 = cross(p3, p4, p2);
  const double d3 = cross(p1, p2, p3), d4 = cross(p1, p2, p4);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace

void draw_polygon_boundary(BoolRaster& mask, const std::array<Point, 8>& points) {
  const auto poly = chain_order(points);
  for (size_t i = 0; i < poly.size(); ++i)
    draw_segment(mask, poly[i], poly[(i + 1) % poly.size()]);
}

EyelidMaskResult eyelid_mask(const std::array<Point, 8>& points, int width, int height) {
  for (const Point& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw ShapeError("eyelid_mask: non-finite point");
  if (width <= 0 || height <= 0) throw ShapeError("eyelid_mask: bad raster extents");

  EyelidMaskResult res;
  res.mask = BoolRaster(width, height);
  const auto poly = chain_order(points);
  const size_t n = poly.size();

  // Scanline even-odd fill at pixel centers. Half-open vertical rule
  // (min(ay,by) <= y < max(ay,by)) pairs crossings consistently.
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    xs.clear();
    for (size_t i = 0; i < n; ++i) {
      const Point a = poly[i], b = poly[(i + 1) % n];
      if (a.y == b.y) continue;
      const double ylo = std::min(a.y, b.y), yhi = std::max(a.y, b.y);
      if (!(ylo <= y && y < yhi)) continue;
      xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (size_t i = 0; i + 1 < xs.size(); i += 2) {
      int x0 = static_cast<int>(std::ceil(xs[i]));
      int x1 = static_cast<int>(std::ceil(xs[i + 1])) - 1;
      x0 = std::max(x0, 0);
      x1 = std::min(x1, width - 1);
      for (int x = x0; x <= x1; ++x) res.mask.set(x, y, true);
    }
  }
  draw_polygon_boundary(res.mask, points);

  for (size_t i = 0; i < n && !res.self_intersecting; ++i) {
    for (size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent around the wrap
      if (segments_properly_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
        res.self_intersecting = true;
        break;
      }
    }
  }
  return res;
}

double interpolated_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ShapeError("interpolated_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ShapeError("interpolated_quantile: p outside [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = p * (static_cast<double>(values.size()) - 1);
  const size_t i = static_cast<size_t>(pos);
  if (i + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(i);
  return values[i] + frac * (values[i + 1] - values[i]);
}

IrisMaskResult iqr_anomaly_mask(const Image& image, const Circle& iris,
                                const BoolRaster& eyelid, double fence_factor) {
  if (eyelid.width != image.width() || eyelid.height != image.height())
    throw ShapeError("iqr_anomaly_mask: eyelid mask extents differ from image");
  if (!(iris.r > 0)) throw ShapeError("iqr_anomaly_mask: degenerate iris circle");

  IrisMaskResult res;
  res.usable = BoolRaster(image.width(), image.height());

  const int y0 = std::max(0, static_cast<int>(std::ceil(iris.y - iris.r)));
  const int y1 = std::min(image.height() - 1, static_cast<int>(std::floor(iris.y + iris.r)));
  const int x0 = std::max(0, static_cast<int>(std::ceil(iris.x - iris.r)));
  const int x1 = std::min(image.width() - 1, static_cast<int>(std::floor(iris.x + iris.r)));
  const double r2 = iris.r * iris.r;

  std::vector<double> values;
  for (int y = y0; y <= y1; ++y) {
    const double dy = y - iris.y;
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - iris.x;
      if (dx * dx + dy * dy > r2 || !eyelid.at(x, y)) continue;
      values.push_back(image.at(x, y));
    }
  }
  if (values.empty()) {
    res.empty_region = true;
    return res;
  }

  res.q1 = interpolated_quantile(values, 0.25);
  res.q3 = interpolated_quantile(values, 0.75);
  const double iqr = res.q3 - res.q1;
  res.fence_lo = res.q1 - fence_factor * iqr;
  res.fence_hi = res.q3 + fence_factor * iqr;

  for (int y = y0; y <= y1; ++y) {
    const double dy = y - iris.y;
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - iris.x;
      if (dx * dx + dy * dy > r2 || !eyelid.at(x, y)) continue;
      const double v = image.at(x, y);
      res.usable.set(x, y, v >= res.fence_lo && v <= res.fence_hi);
    }
  }
  return res;
}

void save_mask_pgm(const BoolRaster& mask, const std::string& path) {
  if (mask.width <= 0 || mask.height <= 0) throw ShapeError("save_mask_pgm: empty mask");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("mask: cannot write " + path);
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<uint8_t> bytes(mask.v.size());
  for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.v[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("mask: write failed for " + path);
}

}  // namespace irisloc
