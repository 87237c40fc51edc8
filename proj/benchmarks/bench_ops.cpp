#include <benchmark/benchmark.h>

#include <random>

#include "irisloc/geometry.hpp"
#include "irisloc/image.hpp"
#include "irisloc/nets.hpp"
#include "irisloc/tensor.hpp"
#include "irisloc/traindata.hpp"

using namespace irisloc;

namespace {

Tensor random_tensor(Shape shape, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<float> data(static_cast<size_t>(shape_numel(shape)));
  for (float& v : data) v = static_cast<float>(u(rng));
  return Tensor::from_data(std::move(shape), std::move(data));
}

Image random_image(int w, int h, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Image img(w, h);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(u(rng));
  return img;
}

// Stage-2 shape of the s=0.2, m=0.25 network: the costliest conv in ILN.
void BM_Conv2dStage2(benchmark::State& state) {
  pin_single_thread_blas();
  Tensor x = random_tensor({1, 16, 64, 48}, 1);
  Tensor w = random_tensor({32, 16, 3, 3}, 2);
  Tensor b = random_tensor({32}, 3);
  for (auto _ : state) {
    Tensor y = conv2d(x, w, b);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_Conv2dStage2);

void BM_Conv2dBackward(benchmark::State& state) {
  pin_single_thread_blas();
  Tensor x = Tensor::param_from({1, 16, 64, 48}, std::vector<float>(16 * 64 * 48, 0.1f));
  Tensor w = Tensor::param_from({32, 16, 3, 3}, std::vector<float>(32 * 16 * 9, 0.05f));
  Tensor b = Tensor::param({32});
  for (auto _ : state) {
    GradientTape tape;
    Tensor loss = sum(conv2d(x, w, b, &tape), &tape);
    tape.backward(loss);
    w.drop_grad();
    x.drop_grad();
    b.drop_grad();
    benchmark::DoNotOptimize(loss.scalar());
  }
}
BENCHMARK(BM_Conv2dBackward);

void BM_IlnForward(benchmark::State& state) {
  const float scales[] = {0.1f, 0.2f, 0.5f};
  const NetworkParams np = init_network({scales[state.range(0)], 0.25f, 22}, 7);
  const Image img = random_image(640, 480, 7);
  for (auto _ : state) {
    TargetVector k = iln_forward(img, np);
    benchmark::DoNotOptimize(k.values[0]);
  }
}
BENCHMARK(BM_IlnForward)->Arg(0)->Arg(1)->Arg(2);

void BM_PrnForward(benchmark::State& state) {
  const NetworkParams np = init_network({0.2f, 0.25f, 3}, 8);
  const RoiFrame roi = make_roi({320, 240, 110});
  const Image img = random_image(128, 128, 8);
  for (auto _ : state) {
    Circle c = prn_forward(img, np, roi);
    benchmark::DoNotOptimize(c.x);
  }
}
BENCHMARK(BM_PrnForward);

void BM_GaussianBlur(benchmark::State& state) {
  const Image img = random_image(640, 480, 9);
  const double sigma = static_cast<double>(state.range(0));
  for (auto _ : state) {
    Image out = gaussian_blur(img, sigma);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_GaussianBlur)->Arg(2)->Arg(8)->Arg(25);

void BM_WarpAffine(benchmark::State& state) {
  const Image img = random_image(640, 480, 10);
  const Affine2 map = Affine2::scaling(1.3, 1.3, {320, 240}).then(Affine2::rotation(0.2, {320, 240}));
  for (auto _ : state) {
    Image out = warp_affine(img, map, 640, 480);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_WarpAffine);

void BM_RenderScene(benchmark::State& state) {
  uint64_t seed = 1;
  for (auto _ : state) {
    auto [img, lm] = render_scene(EyeScene::sample(seed++));
    benchmark::DoNotOptimize(img.data());
  }
}
BENCHMARK(BM_RenderScene);

void BM_HausdorffClosedForm(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0, 640), rad(10, 200);
  const Circle g{pos(rng), pos(rng), rad(rng)};
  const Circle c{pos(rng), pos(rng), rad(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(hausdorff_circles(g, c));
}
BENCHMARK(BM_HausdorffClosedForm);

void BM_RubberSheet(benchmark::State& state) {
  const Image img = random_image(640, 480, 12);
  for (auto _ : state) {
    Image sheet = rubber_sheet(img, {320, 240, 45}, {320, 240, 115}, 256, 64);
    benchmark::DoNotOptimize(sheet.data());
  }
}
BENCHMARK(BM_RubberSheet);

}  // namespace

BENCHMARK_MAIN();
