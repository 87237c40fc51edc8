#include "irisloc/codec.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "irisloc/error.hpp"

namespace irisloc {

using nlohmann::json;

TargetVector encode_landmarks(const LandmarkSet& lm) {
  TargetVector k;
  k.values[0] = lm.pupil.x;
  k.values[1] = lm.pupil.y;
  k.values[2] = lm.pupil.r;
  k.values[3] = lm.iris.x;
  k.values[4] = lm.iris.y;
  k.values[5] = lm.iris.r;
  for (int i = 0; i < 8; ++i) {
    k.values[6 + 2 * i] = lm.eyelid[static_cast<size_t>(i)].x;
    k.values[7 + 2 * i] = lm.eyelid[static_cast<size_t>(i)].y;
  }
  return k;
}

LandmarkSet decode_landmarks(const TargetVector& k) {
  LandmarkSet lm;
  lm.pupil = {k.values[0], k.values[1], k.values[2]};
  lm.iris = {k.values[3], k.values[4], k.values[5]};
  for (int i = 0; i < 8; ++i)
    lm.eyelid[static_cast<size_t>(i)] = {k.values[6 + 2 * i], k.values[7 + 2 * i]};
  return lm;
}

EllipseTarget encode_ellipse(const EllipseLandmarks& el) {
  EllipseTarget k;
  k.values[0] = el.pupil.x;
  k.values[1] = el.pupil.y;
  k.values[2] = el.pupil.a;
  k.values[3] = el.pupil.b;
  k.values[4] = el.iris.x;
  k.values[5] = el.iris.y;
  k.values[6] = el.iris.a;
  k.values[7] = el.iris.b;
  k.values[8] = el.iris.theta;
  for (int i = 0; i < 8; ++i) {
    k.values[9 + 2 * i] = el.eyelid[static_cast<size_t>(i)].x;
    k.values[10 + 2 * i] = el.eyelid[static_cast<size_t>(i)].y;
  }
  return k;
}

EllipseLandmarks decode_ellipse(const EllipseTarget& k) {
  EllipseLandmarks el;
  el.pupil = {k.values[0], k.values[1], k.values[2], k.values[3], k.values[8]};
  el.iris = {k.values[4], k.values[5], k.values[6], k.values[7], k.values[8]};
  for (int i = 0; i < 8; ++i)
    el.eyelid[static_cast<size_t>(i)] = {k.values[9 + 2 * i], k.values[10 + 2 * i]};
  return el;
}

namespace {

constexpr double kMuX = 320.0, kMuY = 240.0, kMuPupilR = 50.0, kMuIrisR = 120.0;

void push_xy(NormStats& s, int pairs) {
  for (int i = 0; i < pairs; ++i) {
    s.mu.push_back(kMuX);
    s.sigma.push_back(kMuX / 6.0);
    s.mu.push_back(kMuY);
    s.sigma.push_back(kMuY / 6.0);
  }
}

}  // namespace

NormStats NormStats::iln() {
  NormStats s;
  push_xy(s, 1);
  s.mu.push_back(kMuPupilR);
  s.sigma.push_back(kMuPupilR / 6.0);
  push_xy(s, 1);
  s.mu.push_back(kMuIrisR);
  s.sigma.push_back(kMuIrisR / 6.0);
  push_xy(s, 8);
  return s;
}

NormStats NormStats::prn() {
  return {{64.0, 64.0, 20.0}, {10.0, 10.0, 10.0}};
}

NormStats NormStats::ellipse() {
  NormStats s;
  push_xy(s, 1);
  for (int i = 0; i < 2; ++i) {
    s.mu.push_back(kMuPupilR);
    s.sigma.push_back(kMuPupilR / 6.0);
  }
  push_xy(s, 1);
  for (int i = 0; i < 2; ++i) {
    s.mu.push_back(kMuIrisR);
    s.sigma.push_back(kMuIrisR / 6.0);
  }
  s.mu.push_back(0.0);
  s.sigma.push_back(std::numbers::pi / 9.0);
  push_xy(s, 8);
  return s;
}

std::vector<double> normalize_targets(std::span<const double> k, const NormStats& stats) {
  if (k.size() != stats.mu.size() || stats.mu.size() != stats.sigma.size())
    throw ShapeError("normalize_targets: stats length does not match vector length");
  std::vector<double> out(k.size());
  for (size_t i = 0; i < k.size(); ++i) {
    if (!(stats.sigma[i] > 0)) throw ShapeError("normalize_targets: sigma must be positive");
    out[i] = (k[i] - stats.mu[i]) / stats.sigma[i];
  }
  return out;
}

std::vector<double> denormalize_targets(std::span<const double> k_norm, const NormStats& stats) {
  if (k_norm.size() != stats.mu.size() || stats.mu.size() != stats.sigma.size())
    throw ShapeError("denormalize_targets: stats length does not match vector length");
  std::vector<double> out(k_norm.size());
  for (size_t i = 0; i < k_norm.size(); ++i) {
    if (!(stats.sigma[i] > 0)) throw ShapeError("denormalize_targets: sigma must be positive");
    out[i] = k_norm[i] * stats.sigma[i] + stats.mu[i];
  }
  return out;
}

Point RoiFrame::to_roi(Point p) const {
  const double inv = out_size / side;
  return {(p.x - (center.x - side / 2.0)) * inv, (p.y - (center.y - side / 2.0)) * inv};
}

Point RoiFrame::to_original(Point p) const {
  const double s = scale();
  return {p.x * s + (center.x - side / 2.0), p.y * s + (center.y - side / 2.0)};
}

RoiFrame make_roi(const Circle& iris) {
  if (!(iris.r > 0)) throw ShapeError("make_roi: iris radius must be positive");
  return {{iris.x, iris.y}, 2.0 * 1.2 * iris.r, 128};
}

std::array<double, 3> to_roi_coords(const Circle& pupil, const RoiFrame& roi) {
  if (!(roi.side > 0)) throw ShapeError("to_roi_coords: invalid roi");
  const Point p = roi.to_roi({pupil.x, pupil.y});
  const double r = pupil.r / roi.scale();
  const NormStats stats = NormStats::prn();
  const double raw[3] = {p.x, p.y, r};
  std::array<double, 3> out;
  for (int i = 0; i < 3; ++i) out[static_cast<size_t>(i)] = (raw[i] - stats.mu[static_cast<size_t>(i)]) / stats.sigma[static_cast<size_t>(i)];
  return out;
}

Circle from_roi_coords(const std::array<double, 3>& v, const RoiFrame& roi) {
  if (!(roi.side > 0)) throw ShapeError("from_roi_coords: invalid roi");
  const NormStats stats = NormStats::prn();
  double raw[3];
  for (int i = 0; i < 3; ++i) raw[i] = v[static_cast<size_t>(i)] * stats.sigma[static_cast<size_t>(i)] + stats.mu[static_cast<size_t>(i)];
  const Point p = roi.to_original({raw[0], raw[1]});
  return {p.x, p.y, raw[2] * roi.scale()};
}

std::string layout_descriptor(int d) {
  auto points = [] {
    std::string s;
    for (int i = 1; i <= 8; ++i)
      s += ",P" + std::to_string(i) + ".x,P" + std::to_string(i) + ".y";
    return s;
  };
  switch (d) {
    case 22:
      return "pupil.x,pupil.y,pupil.r,iris.x,iris.y,iris.r" + points();
    case 3:
      return "roi.pupil.x,roi.pupil.y,roi.pupil.r";
    case 25:
      return "pupil.x,pupil.y,pupil.a,pupil.b,iris.x,iris.y,iris.a,iris.b,theta" + points();
    default:
      throw ShapeError("layout_descriptor: unsupported output length " + std::to_string(d));
  }
}

uint64_t layout_hash(int d) {
  const std::string desc = layout_descriptor(d);
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : desc) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

json circle_to_json(const Circle& c) { return json::array({c.x, c.y, c.r}); }

Circle circle_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("annotation: circle must be [x,y,r]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json ellipse_to_json(const EllipseParams& e) {
  return json::array({e.x, e.y, e.a, e.b, e.theta});
}

EllipseParams ellipse_from_json(const json& j) {
  if (!j.is_array() || j.size() != 5) throw IoError("annotation: ellipse must be [x,y,a,b,theta]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>(), j[4].get<double>()};
}

}  // namespace

std::string annotation_to_json_line(const AnnotationRecord& rec) {
  json j;
  j["image"] = rec.image;
  j["pupil"] = circle_to_json(rec.landmarks.pupil);
  j["iris"] = circle_to_json(rec.landmarks.iris);
  json lid = json::array();
  for (const Point& p : rec.landmarks.eyelid) lid.push_back(json::array({p.x, p.y}));
  j["eyelid"] = lid;
  j["eye"] = std::string(1, rec.eye);
  if (rec.infer_ms) j["infer_ms"] = *rec.infer_ms;
  if (rec.ellipse) {
    j["ellipse"] = {{"pupil", ellipse_to_json(rec.ellipse->pupil)},
                    {"iris", ellipse_to_json(rec.ellipse->iris)}};
  }
  return j.dump();
}

AnnotationRecord annotation_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("annotation: invalid JSON line: ") + e.what());
  }
  AnnotationRecord rec;
  try {
    rec.image = j.at("image").get<std::string>();
    rec.landmarks.pupil = circle_from_json(j.at("pupil"));
    rec.landmarks.iris = circle_from_json(j.at("iris"));
    const json& lid = j.at("eyelid");
    if (!lid.is_array() || lid.size() != 8) throw IoError("annotation: eyelid must hold 8 points");
    for (size_t i = 0; i < 8; ++i) {
      if (!lid[i].is_array() || lid[i].size() != 2) throw IoError("annotation: eyelid point must be [x,y]");
      rec.landmarks.eyelid[i] = {lid[i][0].get<double>(), lid[i][1].get<double>()};
    }
    const std::string eye = j.value("eye", "L");
    if (eye != "L" && eye != "R") throw IoError("annotation: eye must be \"L\" or \"R\"");
    rec.eye = eye[0];
    if (j.contains("infer_ms")) rec.infer_ms = j["infer_ms"].get<double>();
    if (j.contains("ellipse")) {
      EllipseLandmarks el;
      el.pupil = ellipse_from_json(j["ellipse"].at("pupil"));
      el.iris = ellipse_from_json(j["ellipse"].at("iris"));
      el.eyelid = rec.landmarks.eyelid;
      rec.ellipse = el;
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("annotation: missing or malformed field: ") + e.what());
  }
  return rec;
}

std::vector<AnnotationRecord> read_annotation_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("annotation: cannot open " + path);
  std::vector<AnnotationRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(annotation_from_json_line(line));
    } catch (const IoError& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_annotation_jsonl(const std::string& path, const std::vector<AnnotationRecord>& recs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("annotation: cannot write " + path);
  for (const AnnotationRecord& r : recs) out << annotation_to_json_line(r) << "\n";
  if (!out) throw IoError("annotation: write failed for " + path);
}

}  // namespace irisloc
