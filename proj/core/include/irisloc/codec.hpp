#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "irisloc/geometry.hpp"

namespace irisloc {

/// Flat 22-element landmark encoding in 640x480 reference coordinates:
/// [pupil.x, pupil.y, pupil.r, iris.x, iris.y, iris.r, P1.x, P1.y, ..., P8.x, P8.y].
/// The layout is fixed; its hash is embedded in every weights file.
struct TargetVector {
  std::array<double, 22> values{};
};

TargetVector encode_landmarks(const LandmarkSet& lm);
LandmarkSet decode_landmarks(const TargetVector& k);

/// 25-element ellipse extension: pupil (x,y,a,b), iris (x,y,a,b), one shared
/// rotation, then the eight eyelid points. A single rotation suffices because
/// an affine map sends concentric circles to ellipses of identical orientation.
struct EllipseTarget {
  std::array<double, 25> values{};
};

struct EllipseLandmarks {
  EllipseParams pupil;
  EllipseParams iris;
  std::array<Point, 8> eyelid;
};

EllipseTarget encode_ellipse(const EllipseLandmarks& el);
EllipseLandmarks decode_ellipse(const EllipseTarget& k);

/// Per-element normalization statistics; all sigma entries must be positive.
struct NormStats {
  std::vector<double> mu;
  std::vector<double> sigma;

  /// ILN defaults: mu 320 / 240 for x / y elements, 50 and 120 for the pupil
  /// and iris radius, sigma = mu / 6.
  static NormStats iln();
  /// PRN defaults in ROI coordinates: mu (64, 64, 20), sigma (10, 10, 10).
  static NormStats prn();
  /// Ellipse-head defaults: axes follow the matching radius stats, the
  /// shared rotation uses mu 0, sigma pi/9.
  static NormStats ellipse();
};

/// Elementwise (k - mu) / sigma.
std::vector<double> normalize_targets(std::span<const double> k, const NormStats& stats);
/// Exact inverse: k_norm * sigma + mu.
std::vector<double> denormalize_targets(std::span<const double> k_norm, const NormStats& stats);

/// Square crop around the ILN iris estimate, fed to PRN after resizing to
/// out_size x out_size. Label and pixel mappings share one affine:
/// roi = (original - (center - side/2)) * out_size / side.
struct RoiFrame {
  Point center;
  double side = 0.0;
  int out_size = 128;

  double scale() const { return side / out_size; }
  Point to_roi(Point p) const;
  Point to_original(Point p) const;
};

/// ROI covering 1.2x the iris outer circle: side = 2 * 1.2 * iris.r.
RoiFrame make_roi(const Circle& iris);

/// Pupil circle -> ROI coordinates -> PRN-normalized 3-vector.
std::array<double, 3> to_roi_coords(const Circle& pupil, const RoiFrame& roi);
/// Inverse of to_roi_coords, back to original coordinates.
Circle from_roi_coords(const std::array<double, 3>& v, const RoiFrame& roi);

/// FNV-1a hash of the element layout for output length d (22, 3 or 25).
uint64_t layout_hash(int d);
std::string layout_descriptor(int d);

/// One line of the annotation / prediction JSONL stream:
/// {"image": path, "pupil": [x,y,r], "iris": [x,y,r], "eyelid": [[x,y] x 8],
///  "eye": "L"|"R"} plus optional "infer_ms" and "ellipse" fields on
/// predictions. Coordinates are in the 640x480 reference frame.
struct AnnotationRecord {
  std::string image;
  LandmarkSet landmarks;
  char eye = 'L';
  std::optional<double> infer_ms;
  std::optional<EllipseLandmarks> ellipse;
};

std::string annotation_to_json_line(const AnnotationRecord& rec);
AnnotationRecord annotation_from_json_line(const std::string& line);
std::vector<AnnotationRecord> read_annotation_jsonl(const std::string& path);
void write_annotation_jsonl(const std::string& path, const std::vector<AnnotationRecord>& recs);

}  // namespace irisloc
