#include "irisloc/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "irisloc/error.hpp"
#include "irisloc/image.hpp"
#include "irisloc/tensor.hpp"

namespace irisloc {

EvalRecord make_eval_record(std::string id, const LandmarkSet& predicted,
                            const LandmarkSet& truth, double infer_ms) {
  EvalRecord r;
  r.id = std::move(id);
  r.predicted = predicted;
  r.truth = truth;
  r.eye_width = eye_width(truth).value;
  r.infer_ms = infer_ms;
  return r;
}

std::vector<double> pupil_errors(const std::vector<EvalRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const EvalRecord& r : records)
    out.push_back(normalized_hausdorff(r.truth.pupil, r.predicted.pupil, {r.eye_width}));
  return out;
}

std::vector<double> iris_errors(const std::vector<EvalRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const EvalRecord& r : records)
    out.push_back(normalized_hausdorff(r.truth.iris, r.predicted.iris, {r.eye_width}));
  return out;
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw ShapeError("mean: empty sample");
  double acc = 0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

std::vector<double> ced_curve(const std::vector<double>& errors,
                              const std::vector<double>& thresholds) {
  if (errors.empty()) throw ShapeError("ced_curve: empty error list");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw ShapeError("ced_curve: thresholds must be sorted ascending");
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
    out.push_back(static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size()));
  }
  return out;
}

std::array<double, 10> per_point_l2(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw ShapeError("per_point_l2: no records");
  std::array<double, 10> acc{};
  for (const EvalRecord& r : records) {
    acc[0] += distance({r.predicted.pupil.x, r.predicted.pupil.y},
                       {r.truth.pupil.x, r.truth.pupil.y});
    acc[1] += distance({r.predicted.iris.x, r.predicted.iris.y},
                       {r.truth.iris.x, r.truth.iris.y});
    for (size_t i = 0; i < 8; ++i)
      acc[2 + i] += distance(r.predicted.eyelid[i], r.truth.eyelid[i]);
  }
  for (double& v : acc) v /= static_cast<double>(records.size());
  return acc;
}

EvalSummary summarize(const std::vector<EvalRecord>& records) {
  EvalSummary s;
  s.count = records.size();
  s.mean_pupil_nhd = mean(pupil_errors(records));
  s.mean_iris_nhd = mean(iris_errors(records));
  s.point_l2 = per_point_l2(records);
  double ms = 0;
  for (const EvalRecord& r : records) ms += r.infer_ms;
  s.mean_infer_ms = ms / static_cast<double>(records.size());
  return s;
}

LatencyStats bench_latency(const std::function<void(const Image&)>& model,
                           const std::vector<Image>& images, int warmup, int reps) {
  if (reps < 3) throw ShapeError("bench_latency: need at least 3 reps");
  if (images.empty()) throw ShapeError("bench_latency: no images");
  pin_single_thread_blas();
  for (int i = 0; i < warmup; ++i) model(images[static_cast<size_t>(i) % images.size()]);

  std::vector<double> ms(static_cast<size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const Image& img = images[static_cast<size_t>(i) % images.size()];
    const auto t0 = std::chrono::steady_clock::now();
    model(img);
    ms[static_cast<size_t>(i)] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  LatencyStats stats;
  stats.reps = reps;
  double acc = 0;
  for (double v : ms) acc += v;
  stats.mean_ms = acc / reps;
  std::sort(ms.begin(), ms.end());
  const size_t idx = static_cast<size_t>(std::ceil(0.95 * reps)) - 1;  // nearest-rank
  stats.p95_ms = ms[std::min(idx, ms.size() - 1)];
  return stats;
}

void write_records_csv(const std::string& path, const std::vector<EvalRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("eval: cannot write " + path);
  out << "id,pupil_nhd,iris_nhd,pupil_center_l2,iris_center_l2";
  for (int i = 1; i <= 8; ++i) out << ",p" << i << "_l2";
  out << ",eye_width,infer_ms\n";
  for (const EvalRecord& r : records) {
    out << r.id << ","
        << normalized_hausdorff(r.truth.pupil, r.predicted.pupil, {r.eye_width}) << ","
        << normalized_hausdorff(r.truth.iris, r.predicted.iris, {r.eye_width}) << ","
        << distance({r.predicted.pupil.x, r.predicted.pupil.y}, {r.truth.pupil.x, r.truth.pupil.y})
        << ","
        << distance({r.predicted.iris.x, r.predicted.iris.y}, {r.truth.iris.x, r.truth.iris.y});
    for (size_t i = 0; i < 8; ++i) out << "," << distance(r.predicted.eyelid[i], r.truth.eyelid[i]);
    out << "," << r.eye_width << "," << r.infer_ms << "\n";
  }
}

void write_summary_csv(const std::string& path, const EvalSummary& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("eval: cannot write " + path);
  out << "metric,value\n";
  out << "count," << s.count << "\n";
  out << "mean_pupil_nhd," << s.mean_pupil_nhd << "\n";
  out << "mean_iris_nhd," << s.mean_iris_nhd << "\n";
  const char* names[10] = {"pupil_center", "iris_center", "p1", "p2", "p3",
                           "p4", "p5", "p6", "p7", "p8"};
  for (int i = 0; i < 10; ++i)
    out << "l2_" << names[i] << "," << s.point_l2[static_cast<size_t>(i)] << "\n";
  out << "mean_infer_ms," << s.mean_infer_ms << "\n";
}

void write_ced_csv(const std::string& path, const std::vector<double>& thresholds,
                   const std::vector<CedSeries>& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("eval: cannot write " + path);
  out << "threshold";
  for (const CedSeries& s : series) out << "," << s.label;
  out << "\n";
  for (size_t i = 0; i < thresholds.size(); ++i) {
    out << thresholds[i];
    for (const CedSeries& s : series) out << "," << s.fractions.at(i);
    out << "\n";
  }
}

void write_ced_svg(const std::string& path, const std::vector<double>& thresholds,
                   const std::vector<CedSeries>& series) {
  if (thresholds.size() < 2) throw ShapeError("write_ced_svg: need at least two thresholds");
  const int W = 640, H = 420, ml = 60, mr = 20, mt = 20, mb = 50;
  const double x0 = thresholds.front(), x1 = thresholds.back();
  auto px = [&](double t) { return ml + (t - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double f) { return H - mb - f * (H - mt - mb); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  // Axes and horizontal gridlines every 0.2.
  for (int i = 0; i <= 5; ++i) {
    const double f = i / 5.0;
    svg << "<line x1=\"" << ml << "\" y1=\"" << py(f) << "\" x2=\"" << W - mr << "\" y2=\""
        << py(f) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(f) + 4
        << "\" font-size=\"12\" text-anchor=\"end\">" << f << "</text>\n";
  }
  for (size_t i = 0; i < thresholds.size(); ++i) {
    svg << "<text x=\"" << px(thresholds[i]) << "\" y=\"" << H - mb + 18
        << "\" font-size=\"12\" text-anchor=\"middle\">" << thresholds[i] << "</text>\n";
  }
  svg << "<line x1=\"" << ml << "\" y1=\"" << py(0) << "\" x2=\"" << W - mr << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << py(0) << "\" x2=\"" << ml << "\" y2=\"" << py(1)
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
      << "\" font-size=\"13\" text-anchor=\"middle\">normalized Hausdorff threshold</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    if (series[s].fractions.size() != thresholds.size())
      throw ShapeError("write_ced_svg: series length mismatch");
    svg << "<polyline fill=\"none\" stroke=\"" << colors[s % 5] << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < thresholds.size(); ++i)
      svg << px(thresholds[i]) << "," << py(series[s].fractions[i]) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << W - mr - 8 << "\" y=\"" << mt + 16 + 16 * static_cast<int>(s)
        << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << colors[s % 5] << "\">"
        << series[s].label << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("eval: cannot write " + path);
  out << svg.str();
}

}  // namespace irisloc
