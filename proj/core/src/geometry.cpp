#include "irisloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "irisloc/error.hpp"
#include "irisloc/image.hpp"

namespace irisloc {

Affine2 Affine2::translation(double tx, double ty) {
  return {{1, 0, tx, 0, 1, ty}};
}

Affine2 Affine2::scaling(double sx, double sy, Point center) {
  return {{sx, 0, center.x * (1 - sx), 0, sy, center.y * (1 - sy)}};
}

Affine2 Affine2::rotation(double radians, Point center) {
  const double c = std::cos(radians), s = std::sin(radians);
  return {{c, -s, center.x - c * center.x + s * center.y,
           s, c, center.y - s * center.x - c * center.y}};
}

Point Affine2::apply(Point p) const {
  return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]};
}

Affine2 Affine2::then(const Affine2& s) const {
  return {{s.m[0] * m[0] + s.m[1] * m[3],
           s.m[0] * m[1] + s.m[1] * m[4],
           s.m[0] * m[2] + s.m[1] * m[5] + s.m[2],
           s.m[3] * m[0] + s.m[4] * m[3],
           s.m[3] * m[1] + s.m[4] * m[4],
           s.m[3] * m[2] + s.m[4] * m[5] + s.m[5]}};
}

Affine2 Affine2::inverse() const {
  const double d = det();
  if (std::abs(d) < 1e-12) throw ShapeError("Affine2::inverse: singular map");
  const double ia = m[4] / d, ib = -m[1] / d, ic = -m[3] / d, id = m[0] / d;
  return {{ia, ib, -(ia * m[2] + ib * m[5]), ic, id, -(ic * m[2] + id * m[5])}};
}

bool Affine2::is_similarity(double tol) const {
  // Columns of the linear part must be orthogonal and of equal length.
  const double c0 = m[0] * m[0] + m[3] * m[3];
  const double c1 = m[1] * m[1] + m[4] * m[4];
  const double dot = m[0] * m[1] + m[3] * m[4];
  const double scale = std::max(1.0, std::max(c0, c1));
  return std::abs(c0 - c1) <= tol * scale && std::abs(dot) <= tol * scale;
}

double distance(Point a, Point b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

EyeWidth eye_width(const LandmarkSet& gt) {
  double v = distance(gt.eyelid[0], gt.eyelid[1]);
  if (!(v > 0.0)) throw ShapeError("eye_width: P1 and P2 coincide");
  return {v};
}

bool validate_landmarks(const LandmarkSet& lm, std::string* why) {
  auto fail = [&](const char* msg) {
    if (why) *why = msg;
    return false;
  };
  auto finite = [](double v) { return std::isfinite(v); };
  for (const Point& p : lm.eyelid)
    if (!finite(p.x) || !finite(p.y)) return fail("non-finite eyelid point");
  for (const Circle* c : {&lm.pupil, &lm.iris}) {
    if (!finite(c->x) || !finite(c->y) || !finite(c->r)) return fail("non-finite circle");
    if (!(c->r > 0)) return fail("non-positive radius");
  }
  if (!(lm.pupil.r < lm.iris.r)) return fail("pupil radius not below iris radius");
  const double d = std::hypot(lm.pupil.x - lm.iris.x, lm.pupil.y - lm.iris.y);
  if (!(d < lm.iris.r)) return fail("pupil center outside iris circle");
  if (!(lm.eyelid[0].x < lm.eyelid[1].x)) return fail("P1 not left of P2");
  return true;
}

double hausdorff_circles(const Circle& g, const Circle& c) {
  if (!(g.r > 0) || !(c.r > 0))
    throw ShapeError("hausdorff_circles: radii must be positive");
  const double d = std::hypot(g.x - c.x, g.y - c.y);
  // Point-to-circle distance along either boundary is |rho - r| with rho the
  // distance to the other center; rho ranges over [|d-r|, d+r], and |rho - r|
  // is convex in rho, so each directed sup is attained at an endpoint.
  const double v1 = std::abs(d + g.r - c.r);
  const double v2 = std::abs(std::abs(d - g.r) - c.r);
  const double v3 = std::abs(d + c.r - g.r);
  const double v4 = std::abs(std::abs(d - c.r) - g.r);
  return std::max(std::max(v1, v2), std::max(v3, v4));
}

double normalized_hausdorff(const Circle& g, const Circle& c, EyeWidth w) {
  if (!(w.value > 0)) throw ShapeError("normalized_hausdorff: eye width must be positive");
  return hausdorff_circles(g, c) / w.value;
}

Image rubber_sheet(const Image& image, const Circle& pupil, const Circle& iris,
                   int n_theta, int n_rho) {
  if (!(pupil.r > 0) || !(iris.r > 0))
    throw ShapeError("rubber_sheet: degenerate circle");
  if (n_theta < 2 || n_rho < 2)
    throw ShapeError("rubber_sheet: need n_theta, n_rho >= 2");
  Image sheet(n_theta, n_rho);
  for (int i = 0; i < n_rho; ++i) {
    const double rho = static_cast<double>(i) / (n_rho - 1);
    float* row = sheet.row(i);
    for (int j = 0; j < n_theta; ++j) {
      const double t = 2.0 * std::numbers::pi * j / n_theta;
      const double ct = std::cos(t), st = std::sin(t);
      const double px = pupil.x + pupil.r * ct, py = pupil.y + pupil.r * st;
      const double ix = iris.x + iris.r * ct, iy = iris.y + iris.r * st;
      row[j] = image.sample((1.0 - rho) * px + rho * ix, (1.0 - rho) * py + rho * iy);
    }
  }
  return sheet;
}

EllipseParams circle_under_affine(const Circle& c, const Affine2& a) {
  const double d = a.det();
  if (std::abs(d) < 1e-12) throw ShapeError("circle_under_affine: singular map");
  const Point center = a.apply({c.x, c.y});
  // Singular values of the 2x2 linear part M: the ellipse is M * (circle),
  // axes r*sigma_1 >= r*sigma_2 along the left singular vectors.
  const double m00 = a.m[0], m01 = a.m[1], m10 = a.m[3], m11 = a.m[4];
  const double frob2 = m00 * m00 + m01 * m01 + m10 * m10 + m11 * m11;
  const double disc = std::sqrt(std::max(0.0, frob2 * frob2 - 4.0 * d * d));
  const double s1 = std::sqrt((frob2 + disc) / 2.0);
  const double s2 = std::sqrt(std::max(0.0, (frob2 - disc) / 2.0));
  // Major axis direction: principal eigenvector of M*M^T.
  const double alpha = m00 * m00 + m01 * m01;
  const double gamma = m10 * m10 + m11 * m11;
  const double beta = m00 * m10 + m01 * m11;
  double theta = (std::abs(beta) < 1e-15 && std::abs(alpha - gamma) < 1e-15)
                     ? 0.0
                     : 0.5 * std::atan2(2.0 * beta, alpha - gamma);
  // Normalize into [-pi/2, pi/2).
  while (theta < -std::numbers::pi / 2) theta += std::numbers::pi;
  while (theta >= std::numbers::pi / 2) theta -= std::numbers::pi;
  return {center.x, center.y, c.r * s1, c.r * s2, theta};
}

Point ellipse_point(const EllipseParams& e, double t) {
  const double ct = std::cos(t), st = std::sin(t);
  const double cR = std::cos(e.theta), sR = std::sin(e.theta);
  return {e.x + e.a * ct * cR - e.b * st * sR,
          e.y + e.a * ct * sR + e.b * st * cR};
}

double ellipse_boundary_hausdorff(const EllipseParams& g, const EllipseParams& c,
                                  int samples) {
  if (samples < 64) throw ShapeError("ellipse_boundary_hausdorff: samples >= 64 required");
  std::vector<double> gx(samples), gy(samples), cx(samples), cy(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / samples;
    Point pg = ellipse_point(g, t);
    Point pc = ellipse_point(c, t);
    gx[i] = pg.x; gy[i] = pg.y;
    cx[i] = pc.x; cy[i] = pc.y;
  }
  auto directed = [samples](const std::vector<double>& ax, const std::vector<double>& ay,
                            const std::vector<double>& bx, const std::vector<double>& by) {
    double sup = 0.0;
    for (int i = 0; i < samples; ++i) {
      double best = std::numeric_limits<double>::max();
      for (int j = 0; j < samples; ++j) {
        const double dx = ax[i] - bx[j], dy = ay[i] - by[j];
        best = std::min(best, dx * dx + dy * dy);
      }
      sup = std::max(sup, best);
    }
    return std::sqrt(sup);
  };
  return std::max(directed(gx, gy, cx, cy), directed(cx, cy, gx, gy));
}

LandmarkSet landmarks_under_similarity(const LandmarkSet& lm, const Affine2& a) {
  if (!a.is_similarity(1e-7))
    throw ShapeError("landmarks_under_similarity: map is not a similarity");
  const double scale = std::sqrt(std::abs(a.det()));
  LandmarkSet out;
  auto map_circle = [&](const Circle& c) {
    Point p = a.apply({c.x, c.y});
    return Circle{p.x, p.y, c.r * scale};
  };
  out.pupil = map_circle(lm.pupil);
  out.iris = map_circle(lm.iris);
  for (size_t i = 0; i < lm.eyelid.size(); ++i) out.eyelid[i] = a.apply(lm.eyelid[i]);
  return out;
}

}  // namespace irisloc
