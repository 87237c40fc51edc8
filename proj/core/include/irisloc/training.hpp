#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "irisloc/nets.hpp"
#include "irisloc/traindata.hpp"

namespace irisloc {

/// SGD recipe. Paper-scale values are batch 128 / 100k iterations; the desk
/// presets below train the same models at laptop scale.
struct TrainConfig {
  ModelConfig model;
  int batch_size = 32;
  int total_iters = 5000;
  double lr = 1e-3;
  double lr_after = 1e-4;  // active from iteration floor(0.9 * total_iters)
  double weight_decay = 1e-5;
  LossWeights weights;
  uint64_t seed = 1;
  AugmentParams augment;
  int checkpoint_every = 1000;
  int log_every = 50;
  std::string out_dir;  // empty: keep checkpoints and log off disk

  static TrainConfig iln_desk();
  static TrainConfig iln_paper();
  static TrainConfig prn_desk();
  static TrainConfig ellipse_desk();
};

double lr_at(const TrainConfig& cfg, int iter);

/// w <- w - lr * (g + weight_decay * w) for every parameter, then gradients
/// are dropped. Throws NumericError when a parameter has no gradient yet.
void sgd_step(NetworkParams& params, double lr, double weight_decay);

struct TrainLogRow {
  int iter = 0;
  double lr = 0;
  double loss = 0;
  double wall_ms = 0;
};

struct TrainResult {
  NetworkParams params;
  std::vector<TrainLogRow> log;
  double final_loss = 0;
};

/// Trains ILN (d == 22) or the ellipse head (d == 25, anisotropic
/// augmentation) on the corpus train split. Deterministic given cfg.seed:
/// batch sampling and augmentation draws are seeded per iteration, so a
/// checkpoint reload continues the identical stream.
TrainResult train_iln(const TrainConfig& cfg, const Corpus& corpus);
TrainResult train_iln_from(const TrainConfig& cfg, const Corpus& corpus,
                           NetworkParams start, int first_iter);

/// Trains PRN (d == 3); ROI crops jitter the ground-truth iris by the
/// measured ILN error std.
TrainResult train_prn(const TrainConfig& cfg, const Corpus& corpus,
                      std::array<double, 3> iln_error_std);
TrainResult train_prn_from(const TrainConfig& cfg, const Corpus& corpus,
                           std::array<double, 3> iln_error_std,
                           NetworkParams start, int first_iter);

/// Population std of (prediction - truth) for iris x, y, r over a split;
/// feeds the PRN crop jitter.
std::array<double, 3> measure_iln_error_std(const NetworkParams& iln, const Corpus& corpus,
                                            bool use_train_split);

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log);

}  // namespace irisloc
