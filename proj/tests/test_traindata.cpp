#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "irisloc/error.hpp"
#include "irisloc/traindata.hpp"

using namespace irisloc;

namespace {

// Wide-open lids, no blur, no noise, no speculars: exact region values.
EyeScene plain_scene() {
  EyeScene s;
  s.rng_seed = 1;
  s.iris = {320, 240, 110};
  s.pupil = {320, 240, 40};
  s.corner_left = {150, 240};
  s.corner_right = {490, 240};
  const Point mid{320, 240};
  auto para = [&](double apex_y) {
    // Through both corners and the apex at mid span.
    const Point a = s.corner_left, b{mid.x, apex_y}, c = s.corner_right;
    const double d0 = (a.x - b.x) * (a.x - c.x), d1 = (b.x - a.x) * (b.x - c.x),
                 d2 = (c.x - a.x) * (c.x - b.x);
    const double k0 = a.y / d0, k1 = b.y / d1, k2 = c.y / d2;
    return std::array<double, 3>{k0 * b.x * c.x + k1 * a.x * c.x + k2 * a.x * b.x,
                                 -(k0 * (b.x + c.x) + k1 * (a.x + c.x) + k2 * (a.x + b.x)),
                                 k0 + k1 + k2};
  };
  s.upper_arc = para(240 - 150);
  s.lower_arc = para(240 + 150);
  s.pupil_level = 0.06;
  s.iris_level = 0.36;
  s.sclera_level = 0.82;
  s.skin_level = 0.55;
  s.blur_sigma = 0;
  s.noise_sigma = 0;
  s.texture_amp = 0;
  s.ring_amp = 0;
  return s;
}

}  // namespace

TEST_CASE("render determinism and exact pupil value") {
  const EyeScene s = plain_scene();
  auto [img, lm] = render_scene(s);
  CHECK(img.at(320, 240) == doctest::Approx(0.06f));
  CHECK(lm.pupil.r == 40);
  CHECK(lm.eyelid[0].x == 150);

  const EyeScene r = EyeScene::sample(1234);
  auto [a, la] = render_scene(r);
  auto [b, lb] = render_scene(r);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * 4) == 0);
  CHECK(la.pupil.x == lb.pupil.x);
}

TEST_CASE("landmark placement follows the lid arcs") {
  const EyeScene s = plain_scene();
  const LandmarkSet lm = s.landmarks();
  for (int i = 0; i < 3; ++i) {
    const double x = 150 + (0.25 + 0.25 * i) * 340;
    CHECK(lm.eyelid[static_cast<size_t>(2 + i)].x == doctest::Approx(x));
    CHECK(lm.eyelid[static_cast<size_t>(2 + i)].y == doctest::Approx(s.upper_lid_y(x)));
    CHECK(lm.eyelid[static_cast<size_t>(5 + i)].y == doctest::Approx(s.lower_lid_y(x)));
  }
}

TEST_CASE("generator labels satisfy the landmark invariants for 10k seeds") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 10000; ++i) {
    const EyeScene s = EyeScene::sample(rng());
    std::string why;
    INFO("seed index ", i, ": ", why);
    CHECK(validate_landmarks(s.landmarks(), &why));
  }
}

TEST_CASE("region intensity ordering over 100 random scenes") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const EyeScene s = EyeScene::sample(rng());
    SceneMasks masks;
    auto [img, lm] = render_scene(s, &masks);
    auto region_mean = [&](const BoolRaster& m, const BoolRaster& exclude) {
      double acc = 0;
      size_t n = 0;
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
          if (m.at(x, y) && !exclude.at(x, y)) {
            acc += img.at(x, y);
            ++n;
          }
      REQUIRE(n > 0);
      return acc / static_cast<double>(n);
    };
    const double pupil_mean = region_mean(masks.pupil, masks.specular);
    const double iris_mean = region_mean(masks.iris_annulus, masks.specular);
    const double sclera_mean = region_mean(masks.sclera, masks.specular);
    INFO("scene ", i);
    CHECK(pupil_mean < iris_mean);
    CHECK(iris_mean < sclera_mean);
  }
}

TEST_CASE("aspect_correct identity and padding arithmetic") {
  Image ref(640, 480, 0.25f);
  const AspectResult id = aspect_correct(ref);
  CHECK(id.image.width() == 640);
  CHECK(std::memcmp(id.image.data(), ref.data(), ref.size() * 4) == 0);
  const Point p = id.to_reference.apply({123.25, 88.5});
  CHECK(p.x == doctest::Approx(123.25));
  CHECK(p.y == doctest::Approx(88.5));

  // 600x600 -> pad right to 800x600 -> resize by 0.8 in both axes.
  Image square(600, 600, 0.5f);
  square.at(599, 300) = 1.0f;
  const AspectResult sq = aspect_correct(square);
  CHECK(sq.image.width() == 640);
  CHECK(sq.image.height() == 480);
  CHECK(sq.to_reference.m[0] == doctest::Approx(0.8));
  CHECK(sq.to_reference.m[4] == doctest::Approx(0.8));
  // Replicated border: the bright rightmost column spreads into the pad.
  CHECK(sq.image.at(639, 240) > 0.9f);

  CHECK_THROWS_AS(aspect_correct(Image()), ShapeError);
}

TEST_CASE("aspect_correct transport matches direct recomputation") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> size(100, 900);
  for (int i = 0; i < 50; ++i) {
    const int w = size(rng), h = size(rng);
    Image img(w, h, 0.5f);
    const AspectResult res = aspect_correct(img);
    // Direct recomputation of the same map from the pad geometry.
    const int pw = 3 * w < 4 * h ? static_cast<int>(std::ceil(4.0 * h / 3.0)) : w;
    const int ph = 3 * w > 4 * h ? static_cast<int>(std::ceil(3.0 * w / 4.0)) : h;
    const double sx = 640.0 / pw, sy = 480.0 / ph;
    const Circle c{w * 0.4, h * 0.6, 0.2 * std::min(w, h)};
    const Point via = res.to_reference.apply({c.x, c.y});
    const double ex = (pw == 640 && ph == 480) ? c.x : (c.x + 0.5) * sx - 0.5;
    const double ey = (pw == 640 && ph == 480) ? c.y : (c.y + 0.5) * sy - 0.5;
    CHECK(std::abs(via.x - ex) < 1e-6);
    CHECK(std::abs(via.y - ey) < 1e-6);
  }
}

TEST_CASE("geometric augmentation transports labels exactly") {
  const EyeScene s = plain_scene();
  auto [img, lm] = render_scene(s);

  AugmentDraw identity;
  identity.geometric_on = false;
  auto [i1, l1] = apply_geometric(img, lm, identity);
  CHECK(l1.pupil.x == lm.pupil.x);
  CHECK(l1.iris.r == lm.iris.r);

  AugmentDraw shift;
  shift.geometric_on = true;
  shift.geometric = Affine2::translation(10, 0);
  auto [i2, l2] = apply_geometric(img, lm, shift);
  CHECK(l2.pupil.x == doctest::Approx(lm.pupil.x + 10));
  CHECK(l2.pupil.y == doctest::Approx(lm.pupil.y));
  CHECK(l2.pupil.r == doctest::Approx(lm.pupil.r));
  CHECK(l2.eyelid[4].x == doctest::Approx(lm.eyelid[4].x + 10));

  AugmentDraw grow;
  grow.geometric_on = true;
  grow.geometric = Affine2::scaling(2, 2, {319.5, 239.5});
  auto [i3, l3] = apply_geometric(img, lm, grow);
  CHECK(l3.pupil.r == doctest::Approx(2 * lm.pupil.r));
  CHECK(l3.iris.r == doctest::Approx(2 * lm.iris.r));
  // Against the affine oracle: a circle under an isotropic map stays a circle.
  const EllipseParams e = circle_under_affine(lm.iris, grow.geometric);
  CHECK(e.a == doctest::Approx(l3.iris.r));
  CHECK(e.b == doctest::Approx(l3.iris.r));
  CHECK(e.x == doctest::Approx(l3.iris.x));
}

TEST_CASE("label transport commutes with composition") {
  const EyeScene s = plain_scene();
  const LandmarkSet lm = s.landmarks();
  const Affine2 A = Affine2::scaling(1.3, 1.3, {320, 240}).then(Affine2::rotation(0.2, {320, 240}));
  const Affine2 B = Affine2::rotation(-0.1, {100, 50}).then(Affine2::translation(12, -7));

  const LandmarkSet two_step = landmarks_under_similarity(landmarks_under_similarity(lm, A), B);
  const LandmarkSet one_step = landmarks_under_similarity(lm, A.then(B));
  CHECK(std::abs(two_step.pupil.x - one_step.pupil.x) < 1e-5);
  CHECK(std::abs(two_step.iris.r - one_step.iris.r) < 1e-5);
  for (size_t i = 0; i < 8; ++i) {
    CHECK(std::abs(two_step.eyelid[i].x - one_step.eyelid[i].x) < 1e-5);
    CHECK(std::abs(two_step.eyelid[i].y - one_step.eyelid[i].y) < 1e-5);
  }
}

TEST_CASE("photometric augmentation never touches labels") {
  const EyeScene s = plain_scene();
  auto [img, lm] = render_scene(s);
  std::mt19937_64 rng(31);
  AugmentParams params;
  params.scale_min = params.scale_max = 1.0;
  params.rotation_deg = 0.0;
  params.allow_shift = false;
  for (int i = 0; i < 20; ++i) {
    auto [aug, labels] = augment(img, lm, params, rng);
    CHECK(std::memcmp(&labels.pupil, &lm.pupil, sizeof(Circle)) == 0);
    CHECK(std::memcmp(labels.eyelid.data(), lm.eyelid.data(), sizeof(lm.eyelid)) == 0);
  }
}

TEST_CASE("augment keeps the iris inside the frame") {
  const EyeScene s = plain_scene();
  auto [img, lm] = render_scene(s);
  std::mt19937_64 rng(32);
  const AugmentParams params = AugmentParams::iln_defaults();
  for (int i = 0; i < 200; ++i) {
    auto [aug, labels] = augment(img, lm, params, rng);
    CHECK(labels.iris.x - labels.iris.r >= -1e-6);
    CHECK(labels.iris.x + labels.iris.r <= 639 + 1e-6);
    CHECK(labels.iris.y - labels.iris.r >= -1e-6);
    CHECK(labels.iris.y + labels.iris.r <= 479 + 1e-6);
  }
}

TEST_CASE("ellipse augmentation produces consistent shared-theta labels") {
  const EyeScene s = plain_scene();
  auto [img, lm] = render_scene(s);
  std::mt19937_64 rng(33);
  const AugmentParams params = AugmentParams::ellipse_defaults();
  for (int i = 0; i < 100; ++i) {
    auto [aug, el] = augment_ellipse(img, lm, params, rng);
    CHECK(el.pupil.theta == doctest::Approx(el.iris.theta).epsilon(1e-9));
    CHECK(el.pupil.a >= el.pupil.b);
    CHECK(el.iris.a >= el.iris.b);
    CHECK(el.iris.a > 0);
  }
}

TEST_CASE("prn_crop_sample pinned target and jitter statistics") {
  const EyeScene s = plain_scene();
  auto [img, lm] = render_scene(s);
  std::mt19937_64 rng(34);

  const PrnSample zero = prn_crop_sample(img, lm, {0, 0, 0}, rng);
  // Concentric scene: pupil sits at the roi center.
  CHECK(zero.target[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(zero.target[1] == doctest::Approx(0.0).epsilon(1e-9));
  const double r_roi = lm.pupil.r * 128.0 / zero.frame.side;
  CHECK(zero.target[2] == doctest::Approx((r_roi - 20.0) / 10.0));
  CHECK(zero.roi.width() == 128);

  // sigma = 0 draws are deterministic.
  std::mt19937_64 r1(5), r2(5);
  const PrnSample a = prn_crop_sample(img, lm, {0, 0, 0}, r1);
  const PrnSample b = prn_crop_sample(img, lm, {0, 0, 0}, r2);
  CHECK(a.frame.center.x == b.frame.center.x);
  CHECK(std::memcmp(a.roi.data(), b.roi.data(), a.roi.size() * 4) == 0);

  // Empirical jitter std over 10k draws within 5% of the request.
  Image small(32, 32, 0.5f);
  LandmarkSet tiny = lm;
  const std::array<double, 3> sigma{6.0, 4.0, 3.0};
  std::array<double, 3> acc{}, sq{};
  const int n = 10000;
  std::mt19937_64 rj(35);
  for (int i = 0; i < n; ++i) {
    const PrnSample sm = prn_crop_sample(small, tiny, sigma, rj);
    const double dx = sm.frame.center.x - tiny.iris.x;
    const double dy = sm.frame.center.y - tiny.iris.y;
    const double dr = sm.frame.side / 2.4 - tiny.iris.r;
    const double d[3] = {dx, dy, dr};
    for (int k = 0; k < 3; ++k) {
      acc[static_cast<size_t>(k)] += d[k];
      sq[static_cast<size_t>(k)] += d[k] * d[k];
    }
  }
  for (int k = 0; k < 3; ++k) {
    const double mu = acc[static_cast<size_t>(k)] / n;
    const double sd = std::sqrt(sq[static_cast<size_t>(k)] / n - mu * mu);
    CHECK(sd == doctest::Approx(sigma[static_cast<size_t>(k)]).epsilon(0.05));
  }

  CHECK_THROWS_AS(prn_crop_sample(img, lm, {-1, 0, 0}, rng), ShapeError);
}

TEST_CASE("corpus round trip") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "irisloc_corpus_test").string();
  fs::remove_all(dir);
  const Corpus made = synth_corpus(dir, 12, 9, 4242);
  CHECK(made.train_indices.size() == 9);
  CHECK(made.test_indices.size() == 3);

  const Corpus loaded = load_corpus(dir);
  REQUIRE(loaded.entries.size() == 12);
  CHECK(loaded.train_indices.size() == 9);
  CHECK(loaded.seed == 4242);
  CHECK(corpus_fingerprint(loaded) == corpus_fingerprint(made));
  for (size_t i = 0; i < 12; ++i) {
    CHECK(loaded.entries[i].id == made.entries[i].id);
    CHECK(loaded.entries[i].landmarks.pupil.x ==
          doctest::Approx(made.entries[i].landmarks.pupil.x));
  }
  const Image img = loaded.load_image(0);
  CHECK(img.width() == 640);
  CHECK(img.height() == 480);

  CHECK_THROWS_AS(load_corpus("/nonexistent-dir"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("pgm save/load round trip is byte exact") {
  std::mt19937_64 rng(77);
  Image img(31, 17);
  std::uniform_real_distribution<double> u(0, 1);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>(u(rng));
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "irisloc_pgm_test.pgm").string();
  save_pgm(img, path);
  const Image back = load_pgm(path);
  REQUIRE(back.width() == 31);
  REQUIRE(back.height() == 17);
  const auto u8a = image_to_u8(img);
  const auto u8b = image_to_u8(back);
  CHECK(u8a == u8b);
  fs::remove(path);
}
