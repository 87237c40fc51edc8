#include "irisloc/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "irisloc/error.hpp"

namespace irisloc {

Image::Image(int width, int height, float fill)
    : width_(width), height_(height),
      px_(static_cast<size_t>(width) * height, fill) {
  if (width <= 0 || height <= 0)
    throw ShapeError("Image: extents must be positive, got " +
                     std::to_string(width) + "x" + std::to_string(height));
}

float Image::sample(double x, double y) const {
  // Border replicate: clamp the continuous coordinate into the pixel grid.
  x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  int x1 = std::min(x0 + 1, width_ - 1);
  int y1 = std::min(y0 + 1, height_ - 1);
  double fx = x - x0;
  double fy = y - y0;
  double top = at(x0, y0) + fx * (at(x1, y0) - at(x0, y0));
  double bot = at(x0, y1) + fx * (at(x1, y1) - at(x0, y1));
  return static_cast<float>(top + fy * (bot - top));
}

std::vector<uint8_t> image_to_u8(const Image& img) {
  std::vector<uint8_t> out(img.size());
  const float* p = img.data();
  for (size_t i = 0; i < out.size(); ++i) {
    float v = std::clamp(p[i], 0.0f, 1.0f);
    out[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

Image image_from_u8(const std::vector<uint8_t>& bytes, int width, int height) {
  if (bytes.size() != static_cast<size_t>(width) * height)
    throw ShapeError("image_from_u8: byte count does not match extents");
  Image img(width, height);
  float* p = img.data();
  for (size_t i = 0; i < bytes.size(); ++i) p[i] = bytes[i] * (1.0f / 255.0f);
  return img;
}

namespace {

int pgm_next_int(std::istream& in) {
  // Skips whitespace and '#' comments between header tokens.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw IoError("pgm: truncated header");
  int value = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw IoError("pgm: malformed header token");
  return value;
}

}  // namespace

Image load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pgm: cannot open " + path);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || magic[1] != '5')
    throw IoError("pgm: not a binary P5 file: " + path);
  int w = pgm_next_int(in);
  int h = pgm_next_int(in);
  int maxval = pgm_next_int(in);
  if (w <= 0 || h <= 0) throw IoError("pgm: bad extents in " + path);
  if (maxval <= 0 || maxval > 255)
    throw IoError("pgm: only 8-bit maxval supported in " + path);
  std::vector<uint8_t> bytes(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw IoError("pgm: truncated pixel data in " + path);
  Image img(w, h);
  float* p = img.data();
  const float inv = 1.0f / static_cast<float>(maxval);
  for (size_t i = 0; i < bytes.size(); ++i) p[i] = bytes[i] * inv;
  return img;
}

void save_pgm(const Image& img, const std::string& path) {
  if (img.empty()) throw ShapeError("save_pgm: empty image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("pgm: cannot write " + path);
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  auto bytes = image_to_u8(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("pgm: write failed for " + path);
}

Image resize_bilinear(const Image& src, int out_width, int out_height) {
  if (src.empty()) throw ShapeError("resize_bilinear: empty image");
  Image dst(out_width, out_height);
  const double sx = static_cast<double>(src.width()) / out_width;
  const double sy = static_cast<double>(src.height()) / out_height;
  for (int y = 0; y < out_height; ++y) {
    const double srcy = (y + 0.5) * sy - 0.5;
    float* drow = dst.row(y);
    for (int x = 0; x < out_width; ++x) {
      drow[x] = src.sample((x + 0.5) * sx - 0.5, srcy);
    }
  }
  return dst;
}

Image gaussian_blur(const Image& src, double sigma) {
  if (src.empty()) throw ShapeError("gaussian_blur: empty image");
  if (sigma <= 0.0) return src;

  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    double v = std::exp(-0.5 * (t * t) / (sigma * sigma));
    kernel[t + radius] = static_cast<float>(v);
    norm += v;
  }
  for (float& k : kernel) k = static_cast<float>(k / norm);

  const int w = src.width(), h = src.height();
  Image tmp(w, h);
  // Horizontal pass: accumulate shifted rows (axpy form vectorizes well);
  // out-of-range taps replicate the row ends.
  std::vector<float> acc(w);
  for (int y = 0; y < h; ++y) {
    const float* in = src.row(y);
    std::fill(acc.begin(), acc.end(), 0.0f);
    for (int t = -radius; t <= radius; ++t) {
      const float k = kernel[t + radius];
      const int lo = std::max(0, -t);        // dest range with in-bounds source
      const int hi = std::min(w, w - t);
      for (int x = lo; x < hi; ++x) acc[x] += k * in[x + t];
      const float left = in[0], right = in[w - 1];
      for (int x = 0; x < lo; ++x) acc[x] += k * left;
      for (int x = hi; x < w; ++x) acc[x] += k * right;
    }
    std::copy(acc.begin(), acc.end(), tmp.row(y));
  }
  // Vertical pass, processed row-wise for locality.
  Image dst(w, h);
  for (int y = 0; y < h; ++y) {
    float* out = dst.row(y);
    std::fill(out, out + w, 0.0f);
    for (int t = -radius; t <= radius; ++t) {
      const float k = kernel[t + radius];
      const int yy = std::clamp(y + t, 0, h - 1);
      const float* in = tmp.row(yy);
      for (int x = 0; x < w; ++x) out[x] += k * in[x];
    }
  }
  return dst;
}

Image warp_affine(const Image& src, const Affine2& map, int out_width, int out_height) {
  if (src.empty()) throw ShapeError("warp_affine: empty image");
  const Affine2 inv = map.inverse();
  Image dst(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    float* drow = dst.row(y);
    const double bx = inv.m[1] * y + inv.m[2];
    const double by = inv.m[4] * y + inv.m[5];
    for (int x = 0; x < out_width; ++x) {
      drow[x] = src.sample(inv.m[0] * x + bx, inv.m[3] * x + by);
    }
  }
  return dst;
}

}  // namespace irisloc
