#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "irisloc/error.hpp"
#include "irisloc/nets.hpp"
#include "irisloc/tensor.hpp"
#include "support/reference_ops.hpp"

using namespace irisloc;
using refops::RT;
using refops::Sig;

namespace {

std::vector<float> random_vec(size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(dist(rng));
  return v;
}

RT to_ref(const Tensor& t) {
  RT r;
  r.shape = t.shape();
  r.v.assign(t.data().begin(), t.data().end());
  return r;
}

// Scalar readout L = sum(c .* y) so every output element contributes.
Tensor readout(const Tensor& y, const std::vector<float>& coeffs, GradientTape* tape) {
  Tensor c = Tensor::from_data(y.shape(), coeffs);
  return sum(mul(y, c, tape), tape);
}

double ref_readout(const RT& y, const std::vector<float>& coeffs) {
  double acc = 0;
  for (size_t i = 0; i < y.v.size(); ++i) acc += y.v[i] * coeffs[i];
  return acc;
}

void check_grads(std::span<const float> analytic, const std::vector<double>& oracle, double tol) {
  REQUIRE(analytic.size() == oracle.size());
  for (size_t i = 0; i < oracle.size(); ++i) {
    INFO("element ", i, ": analytic=", analytic[i], " oracle=", oracle[i]);
    CHECK(refops::grad_close(analytic[i], oracle[i], tol));
  }
}

}  // namespace

TEST_CASE("conv2d hand-counted overlaps") {
  Tensor x = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, w, b);
  CHECK(y.data()[4] == doctest::Approx(9.0f));  // center sees the full kernel
  CHECK(y.data()[0] == doctest::Approx(4.0f));  // corners see a 2x2 overlap
  CHECK(y.data()[2] == doctest::Approx(4.0f));
  CHECK(y.data()[6] == doctest::Approx(4.0f));
  CHECK(y.data()[8] == doctest::Approx(4.0f));
}

TEST_CASE("conv2d identity kernel is bitwise identity") {
  std::mt19937_64 rng(7);
  Tensor x = Tensor::from_data({1, 1, 6, 5}, random_vec(30, rng, 0.01, 1.0));
  std::vector<float> wk(9, 0.0f);
  wk[4] = 1.0f;  // center tap
  Tensor w = Tensor::from_data({1, 1, 3, 3}, wk);
  Tensor y = conv2d(x, w, Tensor::zeros({1}));
  for (size_t i = 0; i < 30; ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d rejects mismatched channels naming the axis") {
  Tensor x = Tensor::zeros({1, 4, 5, 5});
  Tensor w = Tensor::zeros({2, 3, 3, 3});
  Tensor b = Tensor::zeros({2});
  CHECK_THROWS_WITH_AS(conv2d(x, w, b),
                       doctest::Contains("channel axis (1)"), ShapeError);
}

TEST_CASE("maxpool2 basics and tie rule") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(maxpool2(x).scalar() == 4.0f);

  // Constant input: output constant, gradient concentrated on the first
  // window element in row-major order.
  Tensor c = Tensor::param_from({1, 1, 2, 2}, {5, 5, 5, 5});
  GradientTape tape;
  Tensor y = maxpool2(c, &tape);
  CHECK(y.scalar() == 5.0f);
  tape.backward(sum(y, &tape));
  CHECK(c.grad()[0] == 1.0f);
  CHECK(c.grad()[1] == 0.0f);
  CHECK(c.grad()[2] == 0.0f);
  CHECK(c.grad()[3] == 0.0f);

  CHECK_THROWS_AS(maxpool2(Tensor::zeros({1, 1, 1, 4})), ShapeError);
}

TEST_CASE("relu and linear basics") {
  Tensor x = Tensor::from_data({1, 2}, {-1.5f, 2.0f});
  Tensor y = relu(x);
  CHECK(y.data()[0] == 0.0f);
  CHECK(y.data()[1] == 2.0f);

  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor out = linear(x, eye, Tensor::zeros({2}));
  CHECK(out.data()[0] == -1.5f);
  CHECK(out.data()[1] == 2.0f);
}

TEST_CASE("backward basics: sum and sum of squares") {
  Tensor w = Tensor::param_from({3}, {3.0f, 3.0f, 3.0f});
  {
    GradientTape tape;
    tape.backward(sum(w, &tape));
    for (float g : w.grad()) CHECK(g == 1.0f);
    w.drop_grad();
  }
  {
    GradientTape tape;
    Tensor loss = sum(mul(w, w, &tape), &tape);
    CHECK(loss.scalar() == doctest::Approx(27.0f));
    tape.backward(loss);
    for (float g : w.grad()) CHECK(g == doctest::Approx(6.0f));
  }
}

TEST_CASE("backward twice without clearing doubles every gradient") {
  std::mt19937_64 rng(11);
  Tensor x = Tensor::param_from({1, 1, 4, 4}, random_vec(16, rng));
  GradientTape tape;
  Tensor loss = sum(relu(x, &tape), &tape);
  tape.backward(loss);
  std::vector<float> once(x.grad().begin(), x.grad().end());
  tape.backward(loss);
  for (size_t i = 0; i < once.size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0f * once[i]));
}

TEST_CASE("backward requires a scalar from this tape") {
  Tensor x = Tensor::param_from({2}, {1, 2});
  GradientTape tape;
  Tensor y = relu(x, &tape);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);          // non-scalar
  CHECK_THROWS_AS(tape.backward(sum(x)), ShapeError);     // taped elsewhere
}

TEST_CASE("conv2d gradient matches finite differences") {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    std::mt19937_64 rng(seed);
    const Shape xs{1, 2, 5, 5}, ws{3, 2, 3, 3}, bs{3};
    Tensor x = Tensor::param_from(xs, random_vec(50, rng));
    Tensor w = Tensor::param_from(ws, random_vec(54, rng));
    Tensor b = Tensor::param_from(bs, random_vec(3, rng));
    const std::vector<float> coeffs = random_vec(75, rng);

    GradientTape tape;
    tape.backward(readout(conv2d(x, w, b, &tape), coeffs, &tape));

    auto f = [&](const RT& xr, const RT& wr, const RT& br) {
      return ref_readout(refops::conv2d(xr, wr, br), coeffs);
    };
    const RT xr = to_ref(x), wr = to_ref(w), br = to_ref(b);
    auto fd_for = [&](const RT& base, int which) {
      return refops::fd_gradient(
          [&](const std::vector<double>& v, Sig*) {
            RT probe = base;
            probe.v = v;
            if (which == 0) return f(probe, wr, br);
            if (which == 1) return f(xr, probe, br);
            return f(xr, wr, probe);
          },
          base.v);
    };
    check_grads(x.grad(), fd_for(xr, 0), 1e-4);
    check_grads(w.grad(), fd_for(wr, 1), 1e-4);
    check_grads(b.grad(), fd_for(br, 2), 1e-4);
  }
}

TEST_CASE("maxpool2 gradient matches finite differences") {
  for (uint64_t seed : {4ull, 5ull, 6ull}) {
    std::mt19937_64 rng(seed);
    Tensor x = Tensor::param_from({1, 1, 6, 6}, random_vec(36, rng));
    const std::vector<float> coeffs = random_vec(9, rng);

    GradientTape tape;
    tape.backward(readout(maxpool2(x, &tape), coeffs, &tape));

    const RT xr = to_ref(x);
    auto fd = refops::fd_gradient(
        [&](const std::vector<double>& v, Sig* sig) {
          RT probe = xr;
          probe.v = v;
          return ref_readout(refops::maxpool2(probe, sig), coeffs);
        },
        xr.v);
    check_grads(x.grad(), fd, 1e-4);
  }
}

TEST_CASE("relu, linear and global_avg_pool gradients match finite differences") {
  for (uint64_t seed : {7ull, 8ull, 9ull}) {
    std::mt19937_64 rng(seed);
    {
      Tensor x = Tensor::param_from({2, 3, 2, 2}, random_vec(24, rng));
      const std::vector<float> coeffs = random_vec(24, rng);
      GradientTape tape;
      tape.backward(readout(relu(x, &tape), coeffs, &tape));
      const RT xr = to_ref(x);
      auto fd = refops::fd_gradient(
          [&](const std::vector<double>& v, Sig* sig) {
            RT probe = xr;
            probe.v = v;
            return ref_readout(refops::relu(probe, sig), coeffs);
          },
          xr.v);
      check_grads(x.grad(), fd, 1e-4);
    }
    {
      Tensor x = Tensor::param_from({2, 4}, random_vec(8, rng));
      Tensor w = Tensor::param_from({3, 4}, random_vec(12, rng));
      Tensor b = Tensor::param_from({3}, random_vec(3, rng));
      const std::vector<float> coeffs = random_vec(6, rng);
      GradientTape tape;
      tape.backward(readout(linear(x, w, b, &tape), coeffs, &tape));
      const RT xr = to_ref(x), wr = to_ref(w), br = to_ref(b);
      auto fd_x = refops::fd_gradient(
          [&](const std::vector<double>& v, Sig*) {
            RT probe = xr;
            probe.v = v;
            return ref_readout(refops::linear(probe, wr, br), coeffs);
          },
          xr.v);
      auto fd_w = refops::fd_gradient(
          [&](const std::vector<double>& v, Sig*) {
            RT probe = wr;
            probe.v = v;
            return ref_readout(refops::linear(xr, probe, br), coeffs);
          },
          wr.v);
      check_grads(x.grad(), fd_x, 1e-4);
      check_grads(w.grad(), fd_w, 1e-4);
    }
    {
      Tensor x = Tensor::param_from({1, 2, 3, 3}, random_vec(18, rng));
      const std::vector<float> coeffs = random_vec(2, rng);
      GradientTape tape;
      tape.backward(readout(global_avg_pool(x, &tape), coeffs, &tape));
      const RT xr = to_ref(x);
      auto fd = refops::fd_gradient(
          [&](const std::vector<double>& v, Sig*) {
            RT probe = xr;
            probe.v = v;
            return ref_readout(refops::global_avg_pool(probe), coeffs);
          },
          xr.v);
      check_grads(x.grad(), fd, 1e-4);
    }
  }
}

TEST_CASE("composite conv-relu-pool-linear-L1 chain gradient") {
  for (uint64_t seed : {10ull, 11ull}) {
    std::mt19937_64 rng(seed);
    // conv [1,2,6,6] -> relu -> pool [1,2,3,3] -> gap [1,2] -> linear [1,3] -> L1.
    Tensor x = Tensor::param_from({1, 1, 6, 6}, random_vec(36, rng));
    Tensor w = Tensor::param_from({2, 1, 3, 3}, random_vec(18, rng));
    Tensor b = Tensor::param_from({2}, random_vec(2, rng));
    Tensor lw = Tensor::param_from({3, 2}, random_vec(6, rng, -0.5, 0.5));
    Tensor lb = Tensor::param_from({3}, random_vec(3, rng));
    Tensor target = Tensor::from_data({1, 3}, random_vec(3, rng));
    const std::vector<double> weights{3.0, 1.0, 2.0};
    LossWeights lossw{{3.0f, 1.0f, 2.0f}};

    GradientTape tape;
    Tensor h = global_avg_pool(maxpool2(relu(conv2d(x, w, b, &tape), &tape), &tape), &tape);
    Tensor out = linear(h, lw, lb, &tape);
    tape.backward(weighted_l1_loss(out, target, lossw, &tape));

    const RT xr = to_ref(x), wr = to_ref(w), br = to_ref(b), lwr = to_ref(lw), lbr = to_ref(lb);
    const RT tr = to_ref(target);
    auto ref_chain = [&](const RT& xa, const RT& wa, const RT& ba, const RT& lwa, const RT& lba,
                         Sig* sig) {
      RT hh = refops::global_avg_pool(refops::maxpool2(refops::relu(refops::conv2d(xa, wa, ba), sig), sig));
      RT oo = refops::linear(hh, lwa, lba);
      return refops::weighted_l1(oo, tr, weights, sig);
    };
    auto fd_of = [&](const RT& base, int which) {
      return refops::fd_gradient(
          [&](const std::vector<double>& v, Sig* sig) {
            RT probe = base;
            probe.v = v;
            switch (which) {
              case 0: return ref_chain(probe, wr, br, lwr, lbr, sig);
              case 1: return ref_chain(xr, probe, br, lwr, lbr, sig);
              case 2: return ref_chain(xr, wr, probe, lwr, lbr, sig);
              case 3: return ref_chain(xr, wr, br, probe, lbr, sig);
              default: return ref_chain(xr, wr, br, lwr, probe, sig);
            }
          },
          base.v);
    };
    check_grads(x.grad(), fd_of(xr, 0), 1e-3);
    check_grads(w.grad(), fd_of(wr, 1), 1e-3);
    check_grads(b.grad(), fd_of(br, 2), 1e-3);
    check_grads(lw.grad(), fd_of(lwr, 3), 1e-3);
    check_grads(lb.grad(), fd_of(lbr, 4), 1e-3);
  }
}
