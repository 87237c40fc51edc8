#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "irisloc/geometry.hpp"

namespace irisloc {

class Image;

struct EvalRecord {
  std::string id;
  LandmarkSet predicted;
  LandmarkSet truth;
  double eye_width = 0;  // ground-truth P1-P2 distance
  double infer_ms = 0;
};

EvalRecord make_eval_record(std::string id, const LandmarkSet& predicted,
                            const LandmarkSet& truth, double infer_ms = 0);

std::vector<double> pupil_errors(const std::vector<EvalRecord>& records);
std::vector<double> iris_errors(const std::vector<EvalRecord>& records);
double mean(const std::vector<double>& values);

/// Fraction of errors <= each threshold; thresholds must be sorted ascending.
std::vector<double> ced_curve(const std::vector<double>& errors,
                              const std::vector<double>& thresholds);

/// Mean Euclidean error per landmark: pupil center, iris center, P1..P8.
std::array<double, 10> per_point_l2(const std::vector<EvalRecord>& records);

struct EvalSummary {
  size_t count = 0;
  double mean_pupil_nhd = 0;
  double mean_iris_nhd = 0;
  std::array<double, 10> point_l2{};
  double mean_infer_ms = 0;
};

EvalSummary summarize(const std::vector<EvalRecord>& records);

struct LatencyStats {
  double mean_ms = 0;
  double p95_ms = 0;
  int reps = 0;
};

/// Wall-clock per-image latency of `model` over the image list (cycled),
/// after `warmup` untimed calls. The timed region runs on the calling thread
/// with the BLAS backend pinned to one thread; image decode is outside it.
LatencyStats bench_latency(const std::function<void(const Image&)>& model,
                           const std::vector<Image>& images, int warmup, int reps);

void write_records_csv(const std::string& path, const std::vector<EvalRecord>& records);
void write_summary_csv(const std::string& path, const EvalSummary& summary);

struct CedSeries {
  std::string label;
  std::vector<double> fractions;
};

/// Deterministic SVG line plot of CED curves over shared thresholds.
void write_ced_svg(const std::string& path, const std::vector<double>& thresholds,
                   const std::vector<CedSeries>& series);
void write_ced_csv(const std::string& path, const std::vector<double>& thresholds,
                   const std::vector<CedSeries>& series);

}  // namespace irisloc
