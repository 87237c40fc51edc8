#pragma once

#include <array>
#include <string>

namespace irisloc {

// Coordinate convention, used everywhere: x grows right, y grows down,
// pixel centers sit at integer coordinates, and angles are measured from the
// positive x-axis counter-clockwise in that frame. A circle's boundary point
// at angle t is (x + r*cos t, y + r*sin t).

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Circle {
  double x = 0.0;
  double y = 0.0;
  double r = 0.0;
};

/// Oriented ellipse: semi-axes a >= b > 0, rotation theta in [-pi/2, pi/2).
struct EllipseParams {
  double x = 0.0;
  double y = 0.0;
  double a = 0.0;
  double b = 0.0;
  double theta = 0.0;
};

/// Ground-truth distance between the eye corner points P1 and P2, in pixels.
struct EyeWidth {
  double value = 0.0;
};

/// Pupil circle, iris circle and the eight eyelid points P1..P8.
/// P1 is the left image-side corner, P2 the right; P3..P5 run left-to-right
/// along the upper lid, P6..P8 left-to-right along the lower lid.
struct LandmarkSet {
  Circle pupil;
  Circle iris;
  std::array<Point, 8> eyelid;
};

/// Row-major 2x3 affine map [a b tx; c d ty] acting on column points.
struct Affine2 {
  double m[6] = {1, 0, 0, 0, 1, 0};

  static Affine2 identity() { return {}; }
  static Affine2 translation(double tx, double ty);
  static Affine2 scaling(double sx, double sy, Point center = {0, 0});
  static Affine2 rotation(double radians, Point center = {0, 0});

  Point apply(Point p) const;
  /// Composition: (second.after(*this))(p) == second(this(p)).
  Affine2 then(const Affine2& second) const;
  Affine2 inverse() const;
  double det() const { return m[0] * m[4] - m[1] * m[3]; }
  /// True when the linear part is an isotropic scale times a rotation.
  bool is_similarity(double tol = 1e-9) const;
};

double distance(Point a, Point b);

EyeWidth eye_width(const LandmarkSet& ground_truth);

/// Checks the ground-truth invariants (pupil inside iris, pupil.r < iris.r,
/// P1 left of P2, finite coordinates). Predictions are never validated.
bool validate_landmarks(const LandmarkSet& lm, std::string* why = nullptr);

/// Symmetric Hausdorff distance between two circle boundaries, closed form.
/// Evaluates the four endpoint values of the convex radial profile
/// |d+rg-rc|, ||d-rg|-rc|, |d+rc-rg|, ||d-rc|-rg| and takes the maximum.
double hausdorff_circles(const Circle& g, const Circle& c);

/// hausdorff_circles divided by the ground-truth eye width.
double normalized_hausdorff(const Circle& g, const Circle& c, EyeWidth w);

class Image;

/// Daugman rubber-sheet unwrap of the pupil-iris annulus into an
/// [n_rho x n_theta] raster. Sample (j, i) is the bilinear image value at
/// (1-rho_i) * pupil_boundary(theta_j) + rho_i * iris_boundary(theta_j) with
/// theta_j = 2*pi*j/n_theta and rho_i = i/(n_rho-1). Out-of-frame samples
/// clamp to the nearest border pixel.
Image rubber_sheet(const Image& image, const Circle& pupil, const Circle& iris,
                   int n_theta, int n_rho);

/// Exact image of a circle under a nonsingular affine map, as an ellipse.
/// Axes come from the singular values of the linear part scaled by r, the
/// orientation from the left singular vectors, the center maps affinely.
EllipseParams circle_under_affine(const Circle& c, const Affine2& a);

/// Boundary point at parameter t in [0, 2*pi).
Point ellipse_point(const EllipseParams& e, double t);

/// Symmetric discrete Hausdorff distance over uniformly sampled boundary
/// point sets, `samples` points per ellipse.
double ellipse_boundary_hausdorff(const EllipseParams& g, const EllipseParams& c,
                                  int samples);

/// Transports landmarks through a similarity map (isotropic scale + rotation
/// + translation): centers and points map affinely, radii scale by
/// sqrt(|det|). Throws ShapeError for anisotropic maps.
LandmarkSet landmarks_under_similarity(const LandmarkSet& lm, const Affine2& a);

}  // namespace irisloc
