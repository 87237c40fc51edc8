#include "irisloc/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>

#include "irisloc/error.hpp"
#include "op_recorder.hpp"

namespace irisloc {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw ShapeError("shape: extents must be positive");
    n *= e;
  }
  return n;
}

void pin_single_thread_blas() {
  static std::once_flag flag;
  std::call_once(flag, [] { openblas_set_num_threads(1); });
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape) {
  Tensor t;
  int64_t n = shape_numel(shape);
  t.st_ = std::make_shared<Storage>(Storage{std::move(shape), std::vector<float>(n, 0.0f), {}, false});
  return t;
}

Tensor Tensor::full(Shape shape, float value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.st_->data.begin(), t.st_->data.end(), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw ShapeError("Tensor::from_data: data length does not match shape");
  Tensor t;
  t.st_ = std::make_shared<Storage>(Storage{std::move(shape), std::move(data), {}, false});
  return t;
}

Tensor Tensor::param(Shape shape) {
  Tensor t = zeros(std::move(shape));
  t.st_->is_param = true;
  return t;
}

Tensor Tensor::param_from(Shape shape, std::vector<float> data) {
  Tensor t = from_data(std::move(shape), std::move(data));
  t.st_->is_param = true;
  return t;
}

void Tensor::zero_grad() {
  if (st_ && !st_->grad.empty())
    std::fill(st_->grad.begin(), st_->grad.end(), 0.0f);
}

void Tensor::drop_grad() {
  if (st_) st_->grad.clear();
}

float Tensor::scalar() const {
  if (!st_ || st_->data.size() != 1)
    throw ShapeError("Tensor::scalar: tensor is not a single element");
  return st_->data[0];
}

// ---------------------------------------------------------------------------
// GradientTape

int GradientTape::add_node(int64_t out_numel) {
  nodes_.push_back(Node{nullptr, {}, out_numel});
  return static_cast<int>(nodes_.size()) - 1;
}

float* GradientTape::node_grad(int node) {
  Node& n = nodes_[static_cast<size_t>(node)];
  if (n.grad.empty()) n.grad.assign(static_cast<size_t>(n.out_numel), 0.0f);
  return n.grad.data();
}

const float* GradientTape::node_grad_if_set(int node) const {
  const Node& n = nodes_[static_cast<size_t>(node)];
  return n.grad.empty() ? nullptr : n.grad.data();
}

void GradientTape::accumulate(const std::shared_ptr<Tensor::Storage>& st, int node,
                              const float* values, int64_t n) {
  if (node >= 0) {
    float* g = node_grad(node);
    for (int64_t i = 0; i < n; ++i) g[i] += values[i];
  } else if (st && st->is_param) {
    if (st->grad.empty()) st->grad.assign(st->data.size(), 0.0f);
    float* g = st->grad.data();
    for (int64_t i = 0; i < n; ++i) g[i] += values[i];
  }
}

void GradientTape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ShapeError("backward: loss must be a scalar tensor");
  if (loss.node_ < 0)
    throw ShapeError("backward: loss was not produced under this tape");
  // Intermediate gradients reset every pass; parameter gradients persist and
  // therefore accumulate across repeated backward calls.
  for (Node& n : nodes_) n.grad.clear();
  node_grad(loss.node_)[0] = 1.0f;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.grad.empty() && n.pull) n.pull(*this);
  }
}

namespace {

using Rec = OpRecorder;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// im2col for 3x3 kernels, stride 1, zero padding 1: one source image
// [C,H,W] -> col [C*9, H*W] where row (c*9 + ky*3 + kx) holds the input
// shifted by (ky-1, kx-1).
void im2col_3x3(const float* src, int C, int H, int W, float* col) {
  const int64_t hw = static_cast<int64_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    const float* plane = src + static_cast<int64_t>(c) * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        float* dst = col + (static_cast<int64_t>(c) * 9 + ky * 3 + kx) * hw;
        const int x0 = std::max(0, 1 - kx);          // valid output column range
        const int x1 = std::min(W, W + 1 - kx);
        for (int y = 0; y < H; ++y) {
          const int sy = y + ky - 1;
          float* drow = dst + static_cast<int64_t>(y) * W;
          if (sy < 0 || sy >= H) {
            std::memset(drow, 0, sizeof(float) * W);
            continue;
          }
          const float* srow = plane + static_cast<int64_t>(sy) * W;
          if (x0 > 0) drow[0] = 0.0f;
          if (x1 < W) drow[W - 1] = 0.0f;
          std::memcpy(drow + x0, srow + x0 + (kx - 1), sizeof(float) * (x1 - x0));
        }
      }
    }
  }
}

// Transposed counterpart: scatter-adds col [C*9, H*W] back into [C,H,W].
void col2im_add_3x3(const float* col, int C, int H, int W, float* dst) {
  const int64_t hw = static_cast<int64_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    float* plane = dst + static_cast<int64_t>(c) * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const float* srcrow = col + (static_cast<int64_t>(c) * 9 + ky * 3 + kx) * hw;
        const int x0 = std::max(0, 1 - kx);
        const int x1 = std::min(W, W + 1 - kx);
        for (int y = 0; y < H; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= H) continue;
          float* drow = plane + static_cast<int64_t>(sy) * W + (kx - 1);
          const float* s = srcrow + static_cast<int64_t>(y) * W;
          for (int x = x0; x < x1; ++x) drow[x] += s[x];
        }
      }
    }
  }
}

thread_local std::vector<float> g_col_ws;
thread_local std::vector<float> g_gcol_ws;

float* workspace(std::vector<float>& ws, int64_t n) {
  if (static_cast<int64_t>(ws.size()) < n) ws.resize(static_cast<size_t>(n));
  return ws.data();
}

}  // namespace

// ---------------------------------------------------------------------------
// Operations

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, GradientTape* tape) {
  pin_single_thread_blas();
  require(x.defined() && x.shape().size() == 4, "conv2d: input must be rank-4 [N,C,H,W]");
  require(w.defined() && w.shape().size() == 4, "conv2d: weight must be rank-4 [K,C,3,3]");
  require(b.defined() && b.shape().size() == 1, "conv2d: bias must be rank-1 [K]");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int K = w.dim(0);
  require(w.dim(1) == C, "conv2d: weight channel axis (1) = " + std::to_string(w.dim(1)) +
                             " does not match input channel axis (1) = " + std::to_string(C));
  require(w.dim(2) == 3 && w.dim(3) == 3, "conv2d: kernel axes (2,3) must both be 3");
  require(b.dim(0) == K, "conv2d: bias axis (0) = " + std::to_string(b.dim(0)) +
                             " does not match weight output axis (0) = " + std::to_string(K));
  require(H >= 1 && W >= 1, "conv2d: spatial axes (2,3) must be >= 1");

  const int64_t hw = static_cast<int64_t>(H) * W;
  const int ck = C * 9;
  Tensor y = Tensor::zeros({N, K, H, W});
  float* ydata = y.mutable_data().data();
  const float* xdata = x.data().data();
  const float* wdata = w.data().data();
  const float* bdata = b.data().data();

  float* col = workspace(g_col_ws, static_cast<int64_t>(ck) * hw);
  for (int n = 0; n < N; ++n) {
    im2col_3x3(xdata + static_cast<int64_t>(n) * C * hw, C, H, W, col);
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, K, static_cast<int>(hw), ck,
                1.0f, wdata, ck, col, static_cast<int>(hw), 0.0f,
                ydata + static_cast<int64_t>(n) * K * hw, static_cast<int>(hw));
    for (int k = 0; k < K; ++k) {
      float* plane = ydata + (static_cast<int64_t>(n) * K + k) * hw;
      const float bk = bdata[k];
      for (int64_t i = 0; i < hw; ++i) plane[i] += bk;
    }
  }

  if (tape) {
    int out = Rec::add_node(*tape, y.numel());
    Rec::set_node(y, out);
    auto xs = Rec::storage(x); int xn = Rec::node_of(x);
    auto ws_ = Rec::storage(w); int wn = Rec::node_of(w);
    auto bs = Rec::storage(b); int bn = Rec::node_of(b);
    Rec::set_pull(*tape, out, [=](GradientTape& tp) {
      const float* gy = Rec::out_grad(tp, out);
      if (float* gb = Rec::sink(tp, bs, bn)) {
        for (int n = 0; n < N; ++n)
          for (int k = 0; k < K; ++k) {
            const float* plane = gy + (static_cast<int64_t>(n) * K + k) * hw;
            float acc = 0.0f;
            for (int64_t i = 0; i < hw; ++i) acc += plane[i];
            gb[k] += acc;
          }
      }
      float* gw = Rec::sink(tp, ws_, wn);
      float* gx = Rec::sink(tp, xs, xn);
      if (!gw && !gx) return;
      float* colb = workspace(g_col_ws, static_cast<int64_t>(ck) * hw);
      float* gcol = gx ? workspace(g_gcol_ws, static_cast<int64_t>(ck) * hw) : nullptr;
      for (int n = 0; n < N; ++n) {
        const float* gy_n = gy + static_cast<int64_t>(n) * K * hw;
        if (gw) {
          im2col_3x3(xs->data.data() + static_cast<int64_t>(n) * C * hw, C, H, W, colb);
          cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, K, ck, static_cast<int>(hw),
                      1.0f, gy_n, static_cast<int>(hw), colb, static_cast<int>(hw),
                      1.0f, gw, ck);
        }
        if (gx) {
          cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, ck, static_cast<int>(hw), K,
                      1.0f, ws_->data.data(), ck, gy_n, static_cast<int>(hw),
                      0.0f, gcol, static_cast<int>(hw));
          col2im_add_3x3(gcol, C, H, W, gx + static_cast<int64_t>(n) * C * hw);
        }
      }
    });
  }
  return y;
}

Tensor maxpool2(const Tensor& x, GradientTape* tape) {
  require(x.defined() && x.shape().size() == 4, "maxpool2: input must be rank-4 [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(H >= 2 && W >= 2, "maxpool2: spatial axes (2,3) must be >= 2");
  const int Ho = H / 2, Wo = W / 2;
  Tensor y = Tensor::zeros({N, C, Ho, Wo});
  float* ydata = y.mutable_data().data();
  const float* xdata = x.data().data();

  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(y.numel()));
  int64_t oi = 0;
  for (int64_t nc = 0; nc < static_cast<int64_t>(N) * C; ++nc) {
    const float* plane = xdata + nc * H * W;
    for (int yo = 0; yo < Ho; ++yo) {
      for (int xo = 0; xo < Wo; ++xo, ++oi) {
        const int64_t base = static_cast<int64_t>(2 * yo) * W + 2 * xo;
        // Row-major window order; strict > keeps the first maximum on ties.
        int64_t best_idx = base;
        float best = plane[base];
        const int64_t cands[3] = {base + 1, base + W, base + W + 1};
        for (int64_t idx : cands) {
          if (plane[idx] > best) { best = plane[idx]; best_idx = idx; }
        }
        ydata[oi] = best;
        (*argmax)[static_cast<size_t>(oi)] = nc * H * W + best_idx;
      }
    }
  }

  if (tape) {
    int out = Rec::add_node(*tape, y.numel());
    Rec::set_node(y, out);
    auto xs = Rec::storage(x); int xn = Rec::node_of(x);
    const int64_t total = y.numel();
    Rec::set_pull(*tape, out, [=](GradientTape& tp) {
      float* gx = Rec::sink(tp, xs, xn);
      if (!gx) return;
      const float* gy = Rec::out_grad(tp, out);
      for (int64_t i = 0; i < total; ++i) gx[(*argmax)[static_cast<size_t>(i)]] += gy[i];
    });
  }
  return y;
}

Tensor relu(const Tensor& x, GradientTape* tape) {
  require(x.defined(), "relu: undefined input");
  Tensor y = Tensor::zeros(x.shape());
  const float* xd = x.data().data();
  float* yd = y.mutable_data().data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) yd[i] = xd[i] > 0.0f ? xd[i] : 0.0f;

  if (tape) {
    int out = Rec::add_node(*tape, n);
    Rec::set_node(y, out);
    auto xs = Rec::storage(x); int xn = Rec::node_of(x);
    auto ys = Rec::storage(y);
    Rec::set_pull(*tape, out, [=](GradientTape& tp) {
      float* gx = Rec::sink(tp, xs, xn);
      if (!gx) return;
      const float* gy = Rec::out_grad(tp, out);
      const float* yv = ys->data.data();
      for (int64_t i = 0; i < n; ++i)
        if (yv[i] > 0.0f) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b, GradientTape* tape) {
  pin_single_thread_blas();
  require(x.defined() && x.shape().size() == 2, "linear: input must be rank-2 [N,F]");
  require(w.defined() && w.shape().size() == 2, "linear: weight must be rank-2 [D,F]");
  require(b.defined() && b.shape().size() == 1, "linear: bias must be rank-1 [D]");
  const int N = x.dim(0), F = x.dim(1), D = w.dim(0);
  require(w.dim(1) == F, "linear: weight feature axis (1) = " + std::to_string(w.dim(1)) +
                             " does not match input feature axis (1) = " + std::to_string(F));
  require(b.dim(0) == D, "linear: bias axis (0) = " + std::to_string(b.dim(0)) +
                             " does not match weight output axis (0) = " + std::to_string(D));

  Tensor y = Tensor::zeros({N, D});
  float* yd = y.mutable_data().data();
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, N, D, F, 1.0f,
              x.data().data(), F, w.data().data(), F, 0.0f, yd, D);
  const float* bd = b.data().data();
  for (int n = 0; n < N; ++n)
    for (int d = 0; d < D; ++d) yd[static_cast<int64_t>(n) * D + d] += bd[d];

  if (tape) {
    int out = Rec::add_node(*tape, y.numel());
    Rec::set_node(y, out);
    auto xs = Rec::storage(x); int xn = Rec::node_of(x);
    auto ws_ = Rec::storage(w); int wn = Rec::node_of(w);
    auto bs = Rec::storage(b); int bn = Rec::node_of(b);
    Rec::set_pull(*tape, out, [=](GradientTape& tp) {
      const float* gy = Rec::out_grad(tp, out);
      if (float* gb = Rec::sink(tp, bs, bn)) {
        for (int n = 0; n < N; ++n)
          for (int d = 0; d < D; ++d) gb[d] += gy[static_cast<int64_t>(n) * D + d];
      }
      if (float* gw = Rec::sink(tp, ws_, wn)) {
        cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, D, F, N, 1.0f,
                    gy, D, xs->data.data(), F, 1.0f, gw, F);
      }
      if (float* gx = Rec::sink(tp, xs, xn)) {
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, N, F, D, 1.0f,
                    gy, D, ws_->data.data(), F, 1.0f, gx, F);
      }
    });
  }
  return y;
}

Tensor global_avg_pool(const Tensor& x, GradientTape* tape) {
  require(x.defined() && x.shape().size() == 4, "global_avg_pool: input must be rank-4 [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1);
  const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  Tensor y = Tensor::zeros({N, C});
  float* yd = y.mutable_data().data();
  const float* xd = x.data().data();
  for (int64_t nc = 0; nc < static_cast<int64_t>(N) * C; ++nc) {
    const float* plane = xd + nc * hw;
    float acc = 0.0f;
    for (int64_t i = 0; i < hw; ++i) acc += plane[i];
    yd[nc] = acc / static_cast<float>(hw);
  }

  if (tape) {
    int out = Rec::add_node(*tape, y.numel());
    Rec::set_node(y, out);
    auto xs = Rec::storage(x); int xn = Rec::node_of(x);
    Rec::set_pull(*tape, out, [=](GradientTape& tp) {
      float* gx = Rec::sink(tp, xs, xn);
      if (!gx) return;
      const float* gy = Rec::out_grad(tp, out);
      const float inv = 1.0f / static_cast<float>(hw);
      for (int64_t nc = 0; nc < static_cast<int64_t>(N) * C; ++nc) {
        const float g = gy[nc] * inv;
        float* plane = gx + nc * hw;
        for (int64_t i = 0; i < hw; ++i) plane[i] += g;
      }
    });
  }
  return y;
}

Tensor sum(const Tensor& x, GradientTape* tape) {
  require(x.defined(), "sum: undefined input");
  const float* xd = x.data().data();
  const int64_t n = x.numel();
  float acc = 0.0f;
  for (int64_t i = 0; i < n; ++i) acc += xd[i];
  Tensor y = Tensor::from_data({1}, {acc});

  if (tape) {
    int out = Rec::add_node(*tape, 1);
    Rec::set_node(y, out);
    auto xs = Rec::storage(x); int xn = Rec::node_of(x);
    Rec::set_pull(*tape, out, [=](GradientTape& tp) {
      float* gx = Rec::sink(tp, xs, xn);
      if (!gx) return;
      const float g = Rec::out_grad(tp, out)[0];
      for (int64_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return y;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.defined() && b.defined(), std::string(op) + ": undefined input");
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": operand shapes differ");
}

}  // namespace

Tensor mul(const Tensor& a, const Tensor& b, GradientTape* tape) {
  require_same_shape(a, b, "mul");
  const int64_t n = a.numel();
  Tensor y = Tensor::zeros(a.shape());
  float* yd = y.mutable_data().data();
  const float* ad = a.data().data();
  const float* bd = b.data().data();
  for (int64_t i = 0; i < n; ++i) yd[i] = ad[i] * bd[i];

  if (tape) {
    int out = Rec::add_node(*tape, n);
    Rec::set_node(y, out);
    auto as = Rec::storage(a); int an = Rec::node_of(a);
    auto bs = Rec::storage(b); int bn = Rec::node_of(b);
    Rec::set_pull(*tape, out, [=](GradientTape& tp) {
      const float* gy = Rec::out_grad(tp, out);
      if (float* ga = Rec::sink(tp, as, an))
        for (int64_t i = 0; i < n; ++i) ga[i] += gy[i] * bs->data[i];
      if (float* gb = Rec::sink(tp, bs, bn))
        for (int64_t i = 0; i < n; ++i) gb[i] += gy[i] * as->data[i];
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b, GradientTape* tape) {
  require_same_shape(a, b, "sub");
  const int64_t n = a.numel();
  Tensor y = Tensor::zeros(a.shape());
  float* yd = y.mutable_data().data();
  const float* ad = a.data().data();
  const float* bd = b.data().data();
  for (int64_t i = 0; i < n; ++i) yd[i] = ad[i] - bd[i];

  if (tape) {
    int out = Rec::add_node(*tape, n);
    Rec::set_node(y, out);
    auto as = Rec::storage(a); int an = Rec::node_of(a);
    auto bs = Rec::storage(b); int bn = Rec::node_of(b);
    Rec::set_pull(*tape, out, [=](GradientTape& tp) {
      const float* gy = Rec::out_grad(tp, out);
      if (float* ga = Rec::sink(tp, as, an))
        for (int64_t i = 0; i < n; ++i) ga[i] += gy[i];
      if (float* gb = Rec::sink(tp, bs, bn))
        for (int64_t i = 0; i < n; ++i) gb[i] -= gy[i];
    });
  }
  return y;
}

}  // namespace irisloc
