#include "irisloc/nets.hpp"

#include <cmath>
#include <random>

#include "irisloc/error.hpp"
#include "irisloc/image.hpp"
#include "op_recorder.hpp"

namespace irisloc {

int ModelConfig::input_width() const {
  return d == 3 ? 128 : static_cast<int>(std::lround(640.0 * s));
}

int ModelConfig::input_height() const {
  return d == 3 ? 128 : static_cast<int>(std::lround(480.0 * s));
}

std::array<int, 5> stage_widths(float m) {
  constexpr int base[5] = {64, 128, 256, 512, 512};
  std::array<int, 5> out{};
  for (int i = 0; i < 5; ++i)
    out[static_cast<size_t>(i)] = std::max(8, static_cast<int>(std::lround(m * base[i])));
  return out;
}

LossWeights LossWeights::uniform(int d) {
  return {std::vector<float>(static_cast<size_t>(d), 1.0f)};
}

LossWeights LossWeights::iln_default() {
  LossWeights lw = uniform(22);
  for (int i = 0; i < 6; ++i) lw.w[static_cast<size_t>(i)] = 3.0f;
  return lw;
}

LossWeights LossWeights::prn_default() { return uniform(3); }

LossWeights LossWeights::ellipse_default() {
  LossWeights lw = uniform(25);
  for (int i = 0; i < 9; ++i) lw.w[static_cast<size_t>(i)] = 3.0f;
  return lw;
}

std::vector<std::pair<std::string, Tensor>> NetworkParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (int s = 0; s < 5; ++s) {
    for (int c = 0; c < 2; ++c) {
      const std::string base =
          "stage" + std::to_string(s + 1) + ".conv" + std::to_string(c + 1);
      out.emplace_back(base + ".weight", stages[static_cast<size_t>(s)][static_cast<size_t>(c)].weight);
      out.emplace_back(base + ".bias", stages[static_cast<size_t>(s)][static_cast<size_t>(c)].bias);
    }
  }
  out.emplace_back("head.weight", head_weight);
  out.emplace_back("head.bias", head_bias);
  return out;
}

int64_t NetworkParams::parameter_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : named()) n += t.numel();
  return n;
}

void NetworkParams::zero_grads() {
  for (auto& [name, t] : named()) const_cast<Tensor&>(t).zero_grad();
}

NetworkParams init_network(const ModelConfig& config, uint64_t seed) {
  if (config.d <= 0) throw ShapeError("init_network: output length must be positive");
  std::mt19937_64 rng(seed);
  auto kaiming = [&rng](Shape shape, int fan_in) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    int64_t n = shape_numel(shape);
    std::vector<float> data(static_cast<size_t>(n));
    for (float& v : data) v = static_cast<float>(dist(rng));
    return Tensor::param_from(std::move(shape), std::move(data));
  };

  NetworkParams np;
  np.config = config;
  const std::array<int, 5> widths = stage_widths(config.m);
  int in_ch = 1;
  for (int s = 0; s < 5; ++s) {
    const int out_ch = widths[static_cast<size_t>(s)];
    for (int c = 0; c < 2; ++c) {
      const int cin = (c == 0) ? in_ch : out_ch;
      auto& conv = np.stages[static_cast<size_t>(s)][static_cast<size_t>(c)];
      conv.weight = kaiming({out_ch, cin, 3, 3}, cin * 9);
      conv.bias = Tensor::param({out_ch});
    }
    in_ch = out_ch;
  }
  np.head_weight = kaiming({config.d, widths[4]}, widths[4]);
  np.head_bias = Tensor::param({config.d});
  return np;
}

Tensor network_forward(const NetworkParams& np, const Tensor& input, GradientTape* tape) {
  if (!input.defined() || input.shape().size() != 4 || input.dim(1) != 1)
    throw ShapeError("network_forward: input must be [N,1,H,W]");
  Tensor h = input;
  for (const auto& stage : np.stages) {
    h = relu(conv2d(h, stage[0].weight, stage[0].bias, tape), tape);
    h = relu(conv2d(h, stage[1].weight, stage[1].bias, tape), tape);
    h = maxpool2(h, tape);
  }
  h = global_avg_pool(h, tape);
  return linear(h, np.head_weight, np.head_bias, tape);
}

Tensor image_to_input(const Image& reference, const ModelConfig& config) {
  const int w = config.input_width(), h = config.input_height();
  Image net_in = (reference.width() == w && reference.height() == h)
                     ? reference
                     : resize_bilinear(reference, w, h);
  std::vector<float> data(net_in.data(), net_in.data() + net_in.size());
  return Tensor::from_data({1, 1, h, w}, std::move(data));
}

namespace {

std::vector<double> forward_vector(const Image& reference, const NetworkParams& np,
                                   const NormStats& stats) {
  if (reference.width() != 640 || reference.height() != 480)
    throw ShapeError("iln_forward: reference image must be 640x480");
  Tensor out = network_forward(np, image_to_input(reference, np.config));
  std::vector<double> norm(out.data().begin(), out.data().end());
  return denormalize_targets(norm, stats);
}

}  // namespace

TargetVector iln_forward(const Image& reference, const NetworkParams& np) {
  if (np.config.d != 22) throw ShapeError("iln_forward: model head is not d=22");
  std::vector<double> v = forward_vector(reference, np, NormStats::iln());
  TargetVector k;
  std::copy(v.begin(), v.end(), k.values.begin());
  return k;
}

EllipseTarget iln_forward_ellipse(const Image& reference, const NetworkParams& np) {
  if (np.config.d != 25) throw ShapeError("iln_forward_ellipse: model head is not d=25");
  std::vector<double> v = forward_vector(reference, np, NormStats::ellipse());
  EllipseTarget k;
  std::copy(v.begin(), v.end(), k.values.begin());
  return k;
}

Circle prn_forward(const Image& roi_image, const NetworkParams& np, const RoiFrame& roi) {
  if (np.config.d != 3) throw ShapeError("prn_forward: model head is not d=3");
  if (roi_image.width() != 128 || roi_image.height() != 128)
    throw ShapeError("prn_forward: roi image must be 128x128");
  Tensor out = network_forward(np, image_to_input(roi_image, np.config));
  std::array<double, 3> v{out.data()[0], out.data()[1], out.data()[2]};
  return from_roi_coords(v, roi);
}

Tensor weighted_l1_loss(const Tensor& pred, const Tensor& target,
                        const LossWeights& weights, GradientTape* tape) {
  if (!pred.defined() || !target.defined())
    throw ShapeError("weighted_l1_loss: undefined operand");
  if (pred.shape() != target.shape())
    throw ShapeError("weighted_l1_loss: prediction and target lengths differ");
  const size_t rank = pred.shape().size();
  if (rank != 1 && rank != 2)
    throw ShapeError("weighted_l1_loss: operands must be [d] or [N,d]");
  const int N = rank == 2 ? pred.dim(0) : 1;
  const int d = rank == 2 ? pred.dim(1) : pred.dim(0);
  if (static_cast<int>(weights.w.size()) != d)
    throw ShapeError("weighted_l1_loss: weight length " + std::to_string(weights.w.size()) +
                     " does not match output length " + std::to_string(d));

  const float* p = pred.data().data();
  const float* t = target.data().data();
  double acc = 0.0;
  for (int n = 0; n < N; ++n)
    for (int i = 0; i < d; ++i)
      acc += weights.w[static_cast<size_t>(i)] *
             std::abs(static_cast<double>(p[n * d + i]) - t[n * d + i]);
  Tensor y = Tensor::from_data({1}, {static_cast<float>(acc / N)});

  if (tape) {
    int out = OpRecorder::add_node(*tape, 1);
    OpRecorder::set_node(y, out);
    auto ps = OpRecorder::storage(pred);
    int pn = OpRecorder::node_of(pred);
    auto ts = OpRecorder::storage(target);
    int tn = OpRecorder::node_of(target);
    auto w = weights.w;
    OpRecorder::set_pull(*tape, out, [=](GradientTape& tp) {
      const float g = OpRecorder::out_grad(tp, out)[0] / static_cast<float>(N);
      float* gp = OpRecorder::sink(tp, ps, pn);
      float* gt = OpRecorder::sink(tp, ts, tn);
      if (!gp && !gt) return;
      for (int n = 0; n < N; ++n)
        for (int i = 0; i < d; ++i) {
          const int64_t idx = static_cast<int64_t>(n) * d + i;
          const float diff = ps->data[static_cast<size_t>(idx)] - ts->data[static_cast<size_t>(idx)];
          const float s = diff > 0.0f ? 1.0f : (diff < 0.0f ? -1.0f : 0.0f);
          const float v = g * w[static_cast<size_t>(i)] * s;
          if (gp) gp[idx] += v;
          if (gt) gt[idx] -= v;
        }
    });
  }
  return y;
}

TargetVector ensemble_predict(const std::vector<TargetVector>& outputs) {
  if (outputs.empty()) throw ShapeError("ensemble_predict: no model outputs");
  TargetVector mean;
  for (const TargetVector& k : outputs)
    for (size_t i = 0; i < mean.values.size(); ++i) mean.values[i] += k.values[i];
  for (double& v : mean.values) v /= static_cast<double>(outputs.size());
  return mean;
}

double estimated_forward_flops(const ModelConfig& config) {
  const std::array<int, 5> widths = stage_widths(config.m);
  double w = config.input_width(), h = config.input_height();
  double flops = 0.0;
  int in_ch = 1;
  for (int s = 0; s < 5; ++s) {
    const int out_ch = widths[static_cast<size_t>(s)];
    flops += 2.0 * w * h * out_ch * in_ch * 9;   // conv1
    flops += 2.0 * w * h * out_ch * out_ch * 9;  // conv2
    w = std::floor(w / 2);
    h = std::floor(h / 2);
    in_ch = out_ch;
  }
  flops += 2.0 * widths[4] * config.d;
  return flops;
}

}  // namespace irisloc
