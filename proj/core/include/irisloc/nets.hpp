#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "irisloc/codec.hpp"
#include "irisloc/tensor.hpp"

namespace irisloc {

class Image;

/// Network hyperparameters. ILN consumes a round(640*s) x round(480*s)
/// downsample of the reference image; PRN (d == 3) has no resize parameter
/// and always takes 128 x 128. d selects the head: 22 circles+points,
/// 3 ROI pupil, 25 ellipse extension.
struct ModelConfig {
  float s = 0.2f;
  float m = 0.25f;
  int d = 22;

  int input_width() const;
  int input_height() const;
};

/// Stage channel widths round(m * [64,128,256,512,512]), floored at 8 so the
/// smallest multiplier stays trainable.
std::array<int, 5> stage_widths(float m);

struct LossWeights {
  std::vector<float> w;

  static LossWeights uniform(int d);
  /// 3.0 on the six pupil/iris circle elements, 1.0 on the eyelid points.
  static LossWeights iln_default();
  /// Equal weights on the three ROI pupil elements.
  static LossWeights prn_default();
  /// 3.0 on the nine ellipse shape elements, 1.0 on the eyelid points.
  static LossWeights ellipse_default();
};

/// VGG-style parameter set: five stages of conv3x3-relu-conv3x3-relu-maxpool2,
/// global average pooling, then a linear head of length d.
struct NetworkParams {
  struct Conv {
    Tensor weight;  // [K,C,3,3]
    Tensor bias;    // [K]
  };

  ModelConfig config;
  std::array<std::array<Conv, 2>, 5> stages;
  Tensor head_weight;  // [d, widths[4]]
  Tensor head_bias;    // [d]

  /// Stable name -> tensor listing ("stage1.conv1.weight", ..., "head.bias").
  std::vector<std::pair<std::string, Tensor>> named() const;
  int64_t parameter_count() const;
  void zero_grads();
};

/// Kaiming fan-in initialization for weights, zero biases. The zero head bias
/// makes the untrained network predict the normalization means.
NetworkParams init_network(const ModelConfig& config, uint64_t seed);

/// Raw batched forward: [N,1,H,W] -> [N,d] in normalized units.
Tensor network_forward(const NetworkParams& params, const Tensor& input,
                       GradientTape* tape = nullptr);

/// Resizes a reference image to the config input size and packs it as [1,1,H,W].
Tensor image_to_input(const Image& reference, const ModelConfig& config);

/// Full ILN inference: 640x480 reference image in [0,1] -> resize -> network
/// -> denormalized 22-element target vector. Deterministic per build.
TargetVector iln_forward(const Image& reference, const NetworkParams& params);

/// Same pipeline for a d == 25 ellipse head.
EllipseTarget iln_forward_ellipse(const Image& reference, const NetworkParams& params);

/// PRN inference on a 128x128 ROI crop; returns the refined pupil circle in
/// original coordinates via from_roi_coords. The caller replaces only the
/// pupil elements of the ILN output.
Circle prn_forward(const Image& roi_image, const NetworkParams& params, const RoiFrame& roi);

/// sum_i w_i * |pred_i - target_i| per row, averaged over rows.
/// pred and target are [N,d] (or [d]); returns a scalar tensor.
Tensor weighted_l1_loss(const Tensor& pred, const Tensor& target,
                        const LossWeights& weights, GradientTape* tape = nullptr);

/// Elementwise mean over at least one model output.
TargetVector ensemble_predict(const std::vector<TargetVector>& outputs);

/// Forward multiply-add count times two, from the config alone.
double estimated_forward_flops(const ModelConfig& config);

// Weights file: magic "ILNW", u16 format version, config (s, m, d), codec
// layout hash, then per-tensor records (name length, name, rank, extents,
// little-endian 32-bit reals). Round-trips bit-exactly.
void save_weights(const NetworkParams& params, const std::string& path);
NetworkParams load_weights(const std::string& path);

/// FNV-1a over a file's bytes, for manifests.
uint64_t file_fnv1a(const std::string& path);

}  // namespace irisloc
