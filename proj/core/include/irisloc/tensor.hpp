#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace irisloc {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);

class GradientTape;

/// Dense 32-bit float array with optional reverse-mode gradient linkage.
/// Copies share storage; tensors are treated as immutable once created,
/// except for explicit parameter updates between training steps.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, float value);
  static Tensor from_data(Shape shape, std::vector<float> data);
  /// Leaf with persistent gradient storage; backward() accumulates into it.
  static Tensor param(Shape shape);
  static Tensor param_from(Shape shape, std::vector<float> data);

  bool defined() const { return st_ != nullptr; }
  const Shape& shape() const { return st_->shape; }
  int64_t numel() const { return static_cast<int64_t>(st_->data.size()); }
  int dim(int i) const { return st_->shape[i]; }

  std::span<const float> data() const { return st_->data; }
  /// In-place access for parameter updates; never call on tensors that are
  /// inputs of a tape that has not been backgraded yet.
  std::span<float> mutable_data() { return st_->data; }

  bool is_param() const { return st_ && st_->is_param; }
  bool has_grad() const { return st_ && !st_->grad.empty(); }
  std::span<const float> grad() const { return st_->grad; }
  std::span<float> mutable_grad() { return st_->grad; }
  /// Zeroes accumulated gradients in place (keeps storage).
  void zero_grad();
  /// Releases gradient storage; the next backward allocates fresh zeros.
  void drop_grad();

  /// Value of a one-element tensor.
  float scalar() const;

  int tape_node() const { return node_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // persistent, parameters only
    bool is_param = false;
  };

  std::shared_ptr<Storage> st_;
  int node_ = -1;  // producing node in the active tape, -1 for leaves

  friend class GradientTape;
  friend class OpRecorder;
};

/// Append-only record of executed operations. Backward visits nodes in strict
/// reverse append order; every node's inputs precede it by construction.
/// Single-writer: one tape serves one forward/backward pass at a time.
class GradientTape {
 public:
  /// Runs reverse-mode accumulation from a scalar loss. Parameter gradients
  /// accumulate additively across calls until zero_grad() is called on them;
  /// intermediate node gradients are reset on every call.
  void backward(const Tensor& loss);

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::function<void(GradientTape&)> pull;  // scatter node grad to inputs
    std::vector<float> grad;                  // grad wrt node output, lazy
    int64_t out_numel = 0;
  };
  std::vector<Node> nodes_;

  int add_node(int64_t out_numel);
  float* node_grad(int node);                 // allocates zeros on first use
  const float* node_grad_if_set(int node) const;
  void accumulate(const std::shared_ptr<Tensor::Storage>& st, int node,
                  const float* values, int64_t n);
  bool wants_grad(const std::shared_ptr<Tensor::Storage>& st, int node) const {
    return node >= 0 || (st && st->is_param);
  }

  friend class OpRecorder;
};

// Differentiable operations. Each computes eagerly and, when a tape is given,
// registers the matching backward rule on it.

/// 3x3 cross-correlation, stride 1, zero padding 1.
/// input [N,C,H,W], weight [K,C,3,3], bias [K] -> [N,K,H,W].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              GradientTape* tape = nullptr);

/// 2x2 max pooling, stride 2; gradient routes to the first maximum in
/// row-major window order. [N,C,H,W] -> [N,C,H/2,W/2].
Tensor maxpool2(const Tensor& input, GradientTape* tape = nullptr);

Tensor relu(const Tensor& input, GradientTape* tape = nullptr);

/// x [N,F], weight [D,F], bias [D] -> x * weight^T + bias, shape [N,D].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias,
              GradientTape* tape = nullptr);

/// Spatial mean: [N,C,H,W] -> [N,C].
Tensor global_avg_pool(const Tensor& input, GradientTape* tape = nullptr);

Tensor sum(const Tensor& input, GradientTape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, GradientTape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, GradientTape* tape = nullptr);

/// Pins the BLAS backend to one thread; called once per process before any
/// timed or reproducibility-sensitive work. Idempotent.
void pin_single_thread_blas();

}  // namespace irisloc
