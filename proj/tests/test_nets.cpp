#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "irisloc/error.hpp"
#include "irisloc/image.hpp"
#include "irisloc/nets.hpp"

using namespace irisloc;

namespace {

Image noise_image(int w, int h, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Image img(w, h);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(u(rng));
  return img;
}

// Zero head weights + bias set to the normalized target make the network a
// constant function, whatever the convolutional trunk does.
void set_constant_head(NetworkParams& np, const std::vector<double>& normalized) {
  auto w = np.head_weight.mutable_data();
  std::fill(w.begin(), w.end(), 0.0f);
  auto b = np.head_bias.mutable_data();
  REQUIRE(b.size() == normalized.size());
  for (size_t i = 0; i < b.size(); ++i) b[i] = static_cast<float>(normalized[i]);
}

}  // namespace

TEST_CASE("model config geometry") {
  CHECK(ModelConfig{0.2f, 0.25f, 22}.input_width() == 128);
  CHECK(ModelConfig{0.2f, 0.25f, 22}.input_height() == 96);
  CHECK(ModelConfig{0.1f, 1.0f, 22}.input_width() == 64);
  CHECK(ModelConfig{0.5f, 1.0f, 22}.input_height() == 240);
  // PRN has no resize parameter.
  CHECK(ModelConfig{0.5f, 0.25f, 3}.input_width() == 128);
  CHECK(ModelConfig{0.5f, 0.25f, 3}.input_height() == 128);

  CHECK(stage_widths(1.0f) == std::array<int, 5>{64, 128, 256, 512, 512});
  CHECK(stage_widths(0.25f) == std::array<int, 5>{16, 32, 64, 128, 128});
  CHECK(stage_widths(0.125f) == std::array<int, 5>{8, 16, 32, 64, 64});
  CHECK(stage_widths(0.01f) == std::array<int, 5>{8, 8, 8, 8, 8});  // floor
}

TEST_CASE("parameter count decreases with m; flops scale like s^2") {
  const float widths[] = {1.0f, 0.5f, 0.25f, 0.125f};
  int64_t prev = -1;
  for (float m : widths) {
    const NetworkParams np = init_network({0.2f, m, 22}, 1);
    const int64_t count = np.parameter_count();
    if (prev > 0) CHECK(count < prev);
    prev = count;
  }
  const double f1 = estimated_forward_flops({0.1f, 0.25f, 22});
  const double f2 = estimated_forward_flops({0.2f, 0.25f, 22});
  const double f5 = estimated_forward_flops({0.5f, 0.25f, 22});
  CHECK(f2 / f1 == doctest::Approx(4.0).epsilon(0.15));
  CHECK(f5 / f2 == doctest::Approx(6.25).epsilon(0.15));
}

TEST_CASE("constant-head ILN reproduces the embedded target exactly") {
  LandmarkSet k0;
  k0.pupil = {310, 245, 42};
  k0.iris = {312, 243, 115};
  for (int i = 0; i < 8; ++i) k0.eyelid[static_cast<size_t>(i)] = {160.0 + 45 * i, 250.0 - 3 * i};

  NetworkParams np = init_network({0.2f, 0.125f, 22}, 3);
  const TargetVector k = encode_landmarks(k0);
  set_constant_head(np, normalize_targets(k.values, NormStats::iln()));

  const Image img = noise_image(640, 480, 11);
  const TargetVector out = iln_forward(img, np);
  for (size_t i = 0; i < 22; ++i)
    CHECK(out.values[i] == doctest::Approx(k.values[i]).epsilon(1e-5));
}

TEST_CASE("iln_forward is bitwise deterministic and validates input size") {
  NetworkParams np = init_network({0.2f, 0.125f, 22}, 5);
  const Image img = noise_image(640, 480, 12);
  const TargetVector a = iln_forward(img, np);
  const TargetVector b = iln_forward(img, np);
  CHECK(std::memcmp(a.values.data(), b.values.data(), sizeof(a.values)) == 0);

  CHECK_THROWS_AS(iln_forward(noise_image(320, 240, 1), np), ShapeError);
  CHECK_THROWS_AS(iln_forward(img, init_network({0.2f, 0.125f, 3}, 5)), ShapeError);
}

TEST_CASE("constant-head PRN reproduces a fixed pupil circle") {
  const RoiFrame roi = make_roi({320, 240, 100});
  const Circle pupil{317, 236, 44};
  NetworkParams np = init_network({0.2f, 0.125f, 3}, 7);
  const auto target = to_roi_coords(pupil, roi);
  set_constant_head(np, {target[0], target[1], target[2]});

  const Circle out = prn_forward(noise_image(128, 128, 13), np, roi);
  CHECK(out.x == doctest::Approx(pupil.x).epsilon(1e-5));
  CHECK(out.y == doctest::Approx(pupil.y).epsilon(1e-5));
  CHECK(out.r == doctest::Approx(pupil.r).epsilon(1e-5));

  CHECK_THROWS_AS(prn_forward(noise_image(64, 64, 1), np, roi), ShapeError);
}

TEST_CASE("weighted_l1_loss values and signed gradients") {
  // One circle element off by 0.5 normalized units at weight 3 -> loss 1.5.
  Tensor pred = Tensor::param_from({1, 22}, std::vector<float>(22, 0.0f));
  std::vector<float> tv(22, 0.0f);
  tv[2] = -0.5f;
  Tensor target = Tensor::from_data({1, 22}, tv);
  GradientTape tape;
  Tensor loss = weighted_l1_loss(pred, target, LossWeights::iln_default(), &tape);
  CHECK(loss.scalar() == doctest::Approx(1.5f));
  tape.backward(loss);
  // Gradient is +w_i where pred > target, 0 at the (excluded) kink.
  CHECK(pred.grad()[2] == doctest::Approx(3.0f));
  for (size_t i = 0; i < 22; ++i)
    if (i != 2) CHECK(pred.grad()[i] == 0.0f);

  // pred == target -> zero loss; zero iff equal under positive weights.
  Tensor same = Tensor::from_data({1, 22}, tv);
  CHECK(weighted_l1_loss(same, target, LossWeights::iln_default()).scalar() == 0.0f);

  CHECK_THROWS_AS(weighted_l1_loss(pred, Tensor::zeros({1, 3}), LossWeights::iln_default()),
                  ShapeError);
  CHECK_THROWS_AS(weighted_l1_loss(pred, target, LossWeights::prn_default()), ShapeError);
}

TEST_CASE("loss weight defaults") {
  const LossWeights iln = LossWeights::iln_default();
  REQUIRE(iln.w.size() == 22);
  for (size_t i = 0; i < 6; ++i) CHECK(iln.w[i] == 3.0f);
  for (size_t i = 6; i < 22; ++i) CHECK(iln.w[i] == 1.0f);
  CHECK(LossWeights::prn_default().w == std::vector<float>{1, 1, 1});
  const LossWeights el = LossWeights::ellipse_default();
  REQUIRE(el.w.size() == 25);
  for (size_t i = 0; i < 9; ++i) CHECK(el.w[i] == 3.0f);
}

TEST_CASE("ensemble_predict") {
  TargetVector a, b;
  for (size_t i = 0; i < 22; ++i) {
    a.values[i] = 10.0;
    b.values[i] = 20.0;
  }
  const TargetVector same = ensemble_predict({a, a});
  for (double v : same.values) CHECK(v == 10.0);
  const TargetVector mixed = ensemble_predict({a, b});
  for (double v : mixed.values) CHECK(v == 15.0);
  CHECK_THROWS_AS(ensemble_predict({}), ShapeError);
}

TEST_CASE("weights file round-trips bit-exactly and guards the layout") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "irisloc_nets_test";
  fs::create_directories(dir);
  const std::string path = (dir / "model.ilnw").string();

  const NetworkParams np = init_network({0.2f, 0.25f, 22}, 99);
  save_weights(np, path);
  const NetworkParams back = load_weights(path);
  CHECK(back.config.s == np.config.s);
  CHECK(back.config.m == np.config.m);
  CHECK(back.config.d == np.config.d);
  const auto a = np.named();
  const auto b = back.named();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    REQUIRE(a[i].second.numel() == b[i].second.numel());
    CHECK(std::memcmp(a[i].second.data().data(), b[i].second.data().data(),
                      static_cast<size_t>(a[i].second.numel()) * 4) == 0);
  }
  // Re-saving what was loaded reproduces the identical file.
  const std::string path2 = (dir / "model2.ilnw").string();
  save_weights(back, path2);
  CHECK(file_fnv1a(path) == file_fnv1a(path2));

  // A corrupted layout hash must be rejected: flip one hash byte in place.
  std::vector<char> bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  bytes[4 + 2 + 4 + 4 + 4] ^= 0x5a;  // magic + version + s + m + d, first hash byte
  const std::string bad = (dir / "bad.ilnw").string();
  {
    std::ofstream out(bad, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_WITH_AS(load_weights(bad), doctest::Contains("layout hash"), IoError);
  CHECK_THROWS_AS(load_weights("/nonexistent.ilnw"), IoError);
  fs::remove_all(dir);
}
