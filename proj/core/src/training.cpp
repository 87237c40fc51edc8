#include "irisloc/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "irisloc/error.hpp"

namespace irisloc {

namespace fs = std::filesystem;

TrainConfig TrainConfig::iln_desk() {
  TrainConfig c;
  c.model = {0.2f, 0.25f, 22};
  c.weights = LossWeights::iln_default();
  c.augment = AugmentParams::iln_defaults();
  return c;
}

TrainConfig TrainConfig::iln_paper() {
  TrainConfig c = iln_desk();
  c.batch_size = 128;
  c.total_iters = 100000;
  c.checkpoint_every = 10000;
  return c;
}

TrainConfig TrainConfig::prn_desk() {
  TrainConfig c;
  c.model = {0.2f, 0.25f, 3};
  c.weights = LossWeights::prn_default();
  c.augment = AugmentParams::prn_defaults();
  return c;
}

TrainConfig TrainConfig::ellipse_desk() {
  TrainConfig c;
  c.model = {0.2f, 0.25f, 25};
  c.weights = LossWeights::ellipse_default();
  c.augment = AugmentParams::ellipse_defaults();
  return c;
}

double lr_at(const TrainConfig& cfg, int iter) {
  const int switch_at = static_cast<int>(0.9 * cfg.total_iters);
  return iter < switch_at ? cfg.lr : cfg.lr_after;
}

void sgd_step(NetworkParams& params, double lr, double weight_decay) {
  for (auto& [name, t] : params.named()) {
    Tensor& p = const_cast<Tensor&>(t);
    if (!p.has_grad())
      throw NumericError("sgd_step: parameter '" + name + "' has no gradient; run backward first");
    auto w = p.mutable_data();
    auto g = p.grad();
    const float flr = static_cast<float>(lr);
    const float fwd = static_cast<float>(weight_decay);
    for (size_t i = 0; i < w.size(); ++i) w[i] -= flr * (g[i] + fwd * w[i]);
    p.drop_grad();
  }
}

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t iter_seed(uint64_t seed, int iter, uint64_t stream) {
  return splitmix64(seed ^ splitmix64(static_cast<uint64_t>(iter) * 2 + stream));
}

struct TrainSet {
  std::vector<std::vector<uint8_t>> images;  // 8-bit, full reference size
  std::vector<LandmarkSet> labels;
  int width = 0, height = 0;
};

TrainSet preload_train_split(const Corpus& corpus) {
  if (corpus.train_indices.empty())
    throw IoError("training: corpus has no train split");
  TrainSet set;
  for (size_t idx : corpus.train_indices) {
    Image img = corpus.load_image(idx);
    if (set.width == 0) {
      set.width = img.width();
      set.height = img.height();
    } else if (img.width() != set.width || img.height() != set.height) {
      throw IoError("training: corpus images disagree in size");
    }
    set.images.push_back(image_to_u8(img));
    set.labels.push_back(corpus.entries[idx].landmarks);
  }
  return set;
}

using BatchFiller = std::function<void(int iter, int slot, const Image& img,
                                       const LandmarkSet& labels, std::mt19937_64& rng,
                                       float* input_row, float* target_row)>;

TrainResult run_training(const TrainConfig& cfg, const Corpus& corpus,
                         NetworkParams start, int first_iter, int input_w, int input_h,
                         const BatchFiller& fill) {
  if (cfg.batch_size <= 0) throw ShapeError("training: batch size must be positive");
  if (static_cast<int>(cfg.weights.w.size()) != cfg.model.d)
    throw ShapeError("training: loss weight length does not match model output length");
  pin_single_thread_blas();

  const TrainSet set = preload_train_split(corpus);
  TrainResult result;
  result.params = std::move(start);

  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

  const int d = cfg.model.d;
  const int64_t in_numel = static_cast<int64_t>(cfg.batch_size) * input_w * input_h;
  std::vector<float> input_buf(static_cast<size_t>(in_numel));
  std::vector<float> target_buf(static_cast<size_t>(cfg.batch_size) * d);

  std::ofstream live_log;
  if (!cfg.out_dir.empty()) {
    live_log.open(fs::path(cfg.out_dir) / "train_log.csv",
                  first_iter == 0 ? std::ios::trunc : std::ios::app);
    if (first_iter == 0) live_log << "iter,lr,loss,wall_ms\n";
  }

  const auto t0 = std::chrono::steady_clock::now();
  for (int iter = first_iter; iter < cfg.total_iters; ++iter) {
    std::mt19937_64 pick_rng(iter_seed(cfg.seed, iter, 0));
    std::mt19937_64 aug_rng(iter_seed(cfg.seed, iter, 1));

    for (int b = 0; b < cfg.batch_size; ++b) {
      const size_t pick = std::uniform_int_distribution<size_t>(0, set.images.size() - 1)(pick_rng);
      const Image img = image_from_u8(set.images[pick], set.width, set.height);
      fill(iter, b, img, set.labels[pick], aug_rng,
           input_buf.data() + static_cast<int64_t>(b) * input_w * input_h,
           target_buf.data() + static_cast<int64_t>(b) * d);
    }

    GradientTape tape;
    Tensor input = Tensor::from_data({cfg.batch_size, 1, input_h, input_w}, input_buf);
    Tensor target = Tensor::from_data({cfg.batch_size, d}, target_buf);
    Tensor out = network_forward(result.params, input, &tape);
    Tensor loss = weighted_l1_loss(out, target, cfg.weights, &tape);
    const double loss_v = loss.scalar();
    if (!std::isfinite(loss_v))
      throw NumericError("training: non-finite loss at iteration " + std::to_string(iter));
    tape.backward(loss);
    sgd_step(result.params, lr_at(cfg, iter), cfg.weight_decay);

    const double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (cfg.log_every > 0 && ((iter + 1) % cfg.log_every == 0 || iter + 1 == cfg.total_iters)) {
      result.log.push_back({iter + 1, lr_at(cfg, iter), loss_v, wall});
      if (live_log.is_open()) {
        live_log << iter + 1 << "," << lr_at(cfg, iter) << "," << loss_v << "," << wall << "\n";
        live_log.flush();
      }
    }
    result.final_loss = loss_v;

    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
        ((iter + 1) % cfg.checkpoint_every == 0 || iter + 1 == cfg.total_iters)) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_%06d.ilnw", iter + 1);
      save_weights(result.params, (fs::path(cfg.out_dir) / name).string());
    }
  }

  if (!cfg.out_dir.empty())
    save_weights(result.params, (fs::path(cfg.out_dir) / "final.ilnw").string());
  return result;
}

}  // namespace

TrainResult train_iln_from(const TrainConfig& cfg, const Corpus& corpus,
                           NetworkParams start, int first_iter) {
  if (cfg.model.d != 22 && cfg.model.d != 25)
    throw ShapeError("train_iln: model output length must be 22 or 25");
  const bool ellipse_mode = cfg.model.d == 25;
  if (ellipse_mode && !cfg.augment.anisotropic)
    throw ShapeError("train_iln: the ellipse head needs anisotropic augmentation");
  const NormStats stats = ellipse_mode ? NormStats::ellipse() : NormStats::iln();
  const int w = cfg.model.input_width(), h = cfg.model.input_height();

  BatchFiller fill = [&, stats, ellipse_mode, w, h](int, int, const Image& img,
                                                    const LandmarkSet& labels,
                                                    std::mt19937_64& rng, float* input_row,
                                                    float* target_row) {
    std::vector<double> raw;
    Image net_img;
    if (ellipse_mode) {
      auto [aug_img, el] = augment_ellipse(img, labels, cfg.augment, rng);
      net_img = std::move(aug_img);
      const EllipseTarget k = encode_ellipse(el);
      raw.assign(k.values.begin(), k.values.end());
    } else {
      auto [aug_img, aug_labels] = augment(img, labels, cfg.augment, rng);
      net_img = std::move(aug_img);
      const TargetVector k = encode_landmarks(aug_labels);
      raw.assign(k.values.begin(), k.values.end());
    }
    const std::vector<double> norm = normalize_targets(raw, stats);
    for (size_t i = 0; i < norm.size(); ++i) target_row[i] = static_cast<float>(norm[i]);
    const Image resized = resize_bilinear(net_img, w, h);
    std::copy(resized.data(), resized.data() + resized.size(), input_row);
  };
  return run_training(cfg, corpus, std::move(start), first_iter, w, h, fill);
}

TrainResult train_iln(const TrainConfig& cfg, const Corpus& corpus) {
  return train_iln_from(cfg, corpus, init_network(cfg.model, cfg.seed), 0);
}

TrainResult train_prn_from(const TrainConfig& cfg, const Corpus& corpus,
                           std::array<double, 3> iln_error_std,
                           NetworkParams start, int first_iter) {
  if (cfg.model.d != 3) throw ShapeError("train_prn: model output length must be 3");
  if (cfg.augment.allow_shift)
    throw ShapeError("train_prn: PRN augmentation must not shift; ROI jitter covers it");

  BatchFiller fill = [&, iln_error_std](int, int, const Image& img, const LandmarkSet& labels,
                                        std::mt19937_64& rng, float* input_row,
                                        float* target_row) {
    auto [aug_img, aug_labels] = augment(img, labels, cfg.augment, rng);
    const PrnSample sample = prn_crop_sample(aug_img, aug_labels, iln_error_std, rng);
    for (int i = 0; i < 3; ++i) target_row[i] = static_cast<float>(sample.target[static_cast<size_t>(i)]);
    std::copy(sample.roi.data(), sample.roi.data() + sample.roi.size(), input_row);
  };
  return run_training(cfg, corpus, std::move(start), first_iter, 128, 128, fill);
}

TrainResult train_prn(const TrainConfig& cfg, const Corpus& corpus,
                      std::array<double, 3> iln_error_std) {
  return train_prn_from(cfg, corpus, iln_error_std, init_network(cfg.model, cfg.seed), 0);
}

std::array<double, 3> measure_iln_error_std(const NetworkParams& iln, const Corpus& corpus,
                                            bool use_train_split) {
  const auto& indices = use_train_split ? corpus.train_indices : corpus.test_indices;
  if (indices.empty()) throw IoError("measure_iln_error_std: split is empty");
  std::array<double, 3> mean{}, sq{};
  for (size_t idx : indices) {
    const Image img = corpus.load_image(idx);
    const TargetVector pred = iln_forward(img, iln);
    const LandmarkSet lm = decode_landmarks(pred);
    const Circle& gt = corpus.entries[idx].landmarks.iris;
    const double err[3] = {lm.iris.x - gt.x, lm.iris.y - gt.y, lm.iris.r - gt.r};
    for (int i = 0; i < 3; ++i) {
      mean[static_cast<size_t>(i)] += err[i];
      sq[static_cast<size_t>(i)] += err[i] * err[i];
    }
  }
  const double n = static_cast<double>(indices.size());
  std::array<double, 3> std_out{};
  for (int i = 0; i < 3; ++i) {
    const double mu = mean[static_cast<size_t>(i)] / n;
    std_out[static_cast<size_t>(i)] = std::sqrt(std::max(0.0, sq[static_cast<size_t>(i)] / n - mu * mu));
  }
  return std_out;
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("train log: cannot write " + path);
  out << "iter,lr,loss,wall_ms\n";
  for (const TrainLogRow& r : log)
    out << r.iter << "," << r.lr << "," << r.loss << "," << r.wall_ms << "\n";
}

}  // namespace irisloc
