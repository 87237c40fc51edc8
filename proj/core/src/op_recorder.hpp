#pragma once

#include "irisloc/tensor.hpp"

namespace irisloc {

// Internal private-access shim between the op implementations and the tape.
// Not installed; ops live in tensor.cpp and nets.cpp.
class OpRecorder {
 public:
  static int node_of(const Tensor& t) { return t.node_; }
  static std::shared_ptr<Tensor::Storage> storage(const Tensor& t) { return t.st_; }
  static void set_node(Tensor& t, int node) { t.node_ = node; }
  static int add_node(GradientTape& tp, int64_t out_numel) { return tp.add_node(out_numel); }
  static void set_pull(GradientTape& tp, int node, std::function<void(GradientTape&)> f) {
    tp.nodes_[static_cast<size_t>(node)].pull = std::move(f);
  }
  static const float* out_grad(GradientTape& tp, int node) { return tp.node_grad(node); }
  /// Buffer the op's backward accumulates into, or nullptr when the input
  /// needs no gradient. Allocates zeroed storage on first use.
  static float* sink(GradientTape& tp, const std::shared_ptr<Tensor::Storage>& st, int node) {
    if (node >= 0) return tp.node_grad(node);
    if (st && st->is_param) {
      if (st->grad.empty()) st->grad.assign(st->data.size(), 0.0f);
      return st->grad.data();
    }
    return nullptr;
  }
};

}  // namespace irisloc
