#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "irisloc/error.hpp"
#include "irisloc/training.hpp"

using namespace irisloc;

namespace {

const Corpus& tiny_corpus() {
  static Corpus corpus = [] {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "irisloc_training_corpus").string();
    fs::remove_all(dir);
    return synth_corpus(dir, 10, 8, 20240601);
  }();
  return corpus;
}

TrainConfig small_cfg(int iters, uint64_t seed) {
  TrainConfig cfg = TrainConfig::iln_desk();
  cfg.model = {0.1f, 0.125f, 22};
  cfg.batch_size = 4;
  cfg.total_iters = iters;
  cfg.seed = seed;
  cfg.log_every = 10;
  cfg.checkpoint_every = 0;
  return cfg;
}

bool params_bitwise_equal(const NetworkParams& a, const NetworkParams& b) {
  const auto na = a.named(), nb = b.named();
  if (na.size() != nb.size()) return false;
  for (size_t i = 0; i < na.size(); ++i) {
    if (na[i].second.numel() != nb[i].second.numel()) return false;
    if (std::memcmp(na[i].second.data().data(), nb[i].second.data().data(),
                    static_cast<size_t>(na[i].second.numel()) * 4) != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("sgd_step pinned arithmetic") {
  // Single 3-element parameter vector exercised through a real network would
  // be noisy; drive the update rule directly through a 1-stage fake.
  NetworkParams np = init_network({0.1f, 0.125f, 3}, 1);
  // Overwrite one bias with the pinned cases: w=1 g=0, w=0 g=1, w=1000 g=0.
  Tensor& b = np.head_bias;
  auto bw = b.mutable_data();
  bw[0] = 1.0f;
  bw[1] = 0.0f;
  bw[2] = 1000.0f;

  // Gradients: populate every parameter with zeros, then pin the bias.
  GradientTape tape;
  Tensor in = Tensor::zeros({1, 1, 64, 48});
  Tensor out = network_forward(np, in, &tape);
  tape.backward(sum(out, &tape));
  b.zero_grad();
  auto bg = b.mutable_grad();
  bg[0] = 0.0f;
  bg[1] = 1.0f;
  bg[2] = 0.0f;

  SUBCASE("no decay") {
    sgd_step(np, 0.001, 0.0);
    CHECK(b.data()[0] == 1.0f);
    CHECK(b.data()[1] == doctest::Approx(-0.001f));
    CHECK(b.data()[2] == 1000.0f);
  }
  SUBCASE("decay only") {
    sgd_step(np, 0.001, 1e-5);
    // 1000 - 0.001 * (0 + 1e-5 * 1000) = 999.99999
    CHECK(b.data()[2] == doctest::Approx(999.99999f));
    CHECK(b.data()[0] == doctest::Approx(1.0f - 0.001f * 1e-5f));
  }
}

TEST_CASE("sgd_step requires populated gradients") {
  NetworkParams np = init_network({0.1f, 0.125f, 22}, 2);
  CHECK_THROWS_WITH_AS(sgd_step(np, 0.001, 0.0), doctest::Contains("no gradient"), NumericError);
}

TEST_CASE("learning rate schedule switches at 90% of total iterations") {
  TrainConfig cfg = small_cfg(1000, 1);
  CHECK(lr_at(cfg, 0) == 0.001);
  CHECK(lr_at(cfg, 899) == 0.001);
  CHECK(lr_at(cfg, 900) == 0.0001);
  CHECK(lr_at(cfg, 999) == 0.0001);
  // Paper schedule: switch after 90,000 of 100,000.
  TrainConfig paper = TrainConfig::iln_paper();
  CHECK(lr_at(paper, 89999) == 0.001);
  CHECK(lr_at(paper, 90000) == 0.0001);
}

TEST_CASE("zero iterations returns the initialization unchanged") {
  const TrainConfig cfg = small_cfg(0, 3);
  const NetworkParams init = init_network(cfg.model, cfg.seed);
  const TrainResult res = train_iln(cfg, tiny_corpus());
  CHECK(params_bitwise_equal(res.params, init));
}

TEST_CASE("loss decreases over the first 50 steps on a fixed batch") {
  // Reuse one deterministic batch every step by pinning the seed per
  // iteration through a one-image corpus subset.
  const Corpus& corpus = tiny_corpus();
  TrainConfig cfg = small_cfg(1, 4);
  NetworkParams params = init_network(cfg.model, cfg.seed);

  // Build a fixed batch once via a single training iteration's pipeline,
  // then descend on it directly.
  const int w = cfg.model.input_width(), h = cfg.model.input_height();
  std::vector<float> input_data;
  std::vector<float> target_data;
  std::mt19937_64 rng(99);
  for (int b = 0; b < 4; ++b) {
    const Image img = corpus.load_image(static_cast<size_t>(b));
    const TargetVector k = encode_landmarks(corpus.entries[static_cast<size_t>(b)].landmarks);
    const auto norm = normalize_targets(k.values, NormStats::iln());
    const Image resized = resize_bilinear(img, w, h);
    input_data.insert(input_data.end(), resized.data(), resized.data() + resized.size());
    for (double v : norm) target_data.push_back(static_cast<float>(v));
  }
  Tensor input = Tensor::from_data({4, 1, h, w}, input_data);
  Tensor target = Tensor::from_data({4, 22}, target_data);

  // Constant-magnitude L1 gradients make plain SGD zigzag step to step, so
  // the smoke assertion is on the trend: consecutive 10-step window means
  // fall, and the last window sits well below the first.
  std::vector<double> losses;
  for (int step = 0; step < 50; ++step) {
    GradientTape tape;
    Tensor out = network_forward(params, input, &tape);
    Tensor loss = weighted_l1_loss(out, target, cfg.weights, &tape);
    losses.push_back(loss.scalar());
    tape.backward(loss);
    sgd_step(params, 0.001, cfg.weight_decay);
  }
  auto window_mean = [&](int from) {
    double acc = 0;
    for (int i = from; i < from + 10; ++i) acc += losses[static_cast<size_t>(i)];
    return acc / 10;
  };
  double prev_window = window_mean(0);
  for (int from = 10; from < 50; from += 10) {
    const double m = window_mean(from);
    INFO("window at ", from, ": ", m, " prev ", prev_window);
    CHECK(m < prev_window);
    prev_window = m;
  }
  CHECK(window_mean(40) < 0.75 * window_mean(0));
  CHECK(losses.back() < losses.front());
}

TEST_CASE("equal seeds give bitwise-identical results; resume matches uninterrupted") {
  namespace fs = std::filesystem;
  const Corpus& corpus = tiny_corpus();

  TrainConfig cfg40 = small_cfg(40, 7);
  const TrainResult full_a = train_iln(cfg40, corpus);
  const TrainResult full_b = train_iln(cfg40, corpus);
  CHECK(params_bitwise_equal(full_a.params, full_b.params));

  // Interrupt the same schedule at its iteration-20 checkpoint and resume;
  // per-iteration seeding makes the continuation stream identical.
  TrainConfig ckpt_cfg = cfg40;
  ckpt_cfg.checkpoint_every = 20;
  ckpt_cfg.out_dir = (fs::temp_directory_path() / "irisloc_resume_ckpt").string();
  fs::remove_all(ckpt_cfg.out_dir);
  train_iln(ckpt_cfg, corpus);
  const NetworkParams reloaded =
      load_weights((fs::path(ckpt_cfg.out_dir) / "checkpoint_000020.ilnw").string());
  const TrainResult resumed = train_iln_from(cfg40, corpus, reloaded, 20);
  CHECK(params_bitwise_equal(resumed.params, full_a.params));
  fs::remove_all(ckpt_cfg.out_dir);

  // The lr schedule in the log matches lr_at.
  for (const TrainLogRow& row : full_a.log)
    CHECK(row.lr == lr_at(cfg40, row.iter - 1));
}

TEST_CASE("training writes checkpoints, final weights and a csv log") {
  namespace fs = std::filesystem;
  const std::string out = (fs::temp_directory_path() / "irisloc_train_out").string();
  fs::remove_all(out);
  TrainConfig cfg = small_cfg(6, 8);
  cfg.checkpoint_every = 3;
  cfg.log_every = 2;
  cfg.out_dir = out;
  train_iln(cfg, tiny_corpus());
  CHECK(fs::exists(fs::path(out) / "checkpoint_000003.ilnw"));
  CHECK(fs::exists(fs::path(out) / "checkpoint_000006.ilnw"));
  CHECK(fs::exists(fs::path(out) / "final.ilnw"));
  std::ifstream log(fs::path(out) / "train_log.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "iter,lr,loss,wall_ms");
  fs::remove_all(out);
}

TEST_CASE("train_prn smoke run and jitter contract") {
  TrainConfig cfg = TrainConfig::prn_desk();
  cfg.model.m = 0.125f;
  cfg.batch_size = 2;
  cfg.total_iters = 3;
  cfg.seed = 9;
  const TrainResult res = train_prn(cfg, tiny_corpus(), {4.0, 4.0, 3.0});
  CHECK(std::isfinite(res.final_loss));

  TrainConfig bad = cfg;
  bad.augment.allow_shift = true;
  CHECK_THROWS_AS(train_prn(bad, tiny_corpus(), {4.0, 4.0, 3.0}), ShapeError);
}

TEST_CASE("divergence guard aborts on non-finite loss") {
  TrainConfig cfg = small_cfg(25, 10);
  cfg.lr = 1e9;
  cfg.lr_after = 1e9;
  CHECK_THROWS_AS(train_iln(cfg, tiny_corpus()), NumericError);
}

TEST_CASE("measure_iln_error_std matches a direct computation for a constant model") {
  const Corpus& corpus = tiny_corpus();
  NetworkParams np = init_network({0.1f, 0.125f, 22}, 11);
  // Constant head: predict a fixed circle, so std(pred - gt) = std(gt).
  auto wspan = np.head_weight.mutable_data();
  std::fill(wspan.begin(), wspan.end(), 0.0f);
  const auto stds = measure_iln_error_std(np, corpus, true);
  std::array<double, 3> mean{}, sq{};
  const size_t n = corpus.train_indices.size();
  for (size_t idx : corpus.train_indices) {
    const Circle& c = corpus.entries[idx].landmarks.iris;
    const double v[3] = {c.x, c.y, c.r};
    for (int i = 0; i < 3; ++i) {
      mean[static_cast<size_t>(i)] += v[i];
      sq[static_cast<size_t>(i)] += v[i] * v[i];
    }
  }
  for (int i = 0; i < 3; ++i) {
    const double mu = mean[static_cast<size_t>(i)] / static_cast<double>(n);
    const double sd = std::sqrt(sq[static_cast<size_t>(i)] / static_cast<double>(n) - mu * mu);
    CHECK(stds[static_cast<size_t>(i)] == doctest::Approx(sd).epsilon(1e-3));
  }
}
