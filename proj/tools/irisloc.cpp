// irisloc: segmentation-free iris localization pipeline driver.
//
// Subcommands mirror the pipeline stages: synth -> train-iln -> train-prn ->
// infer -> mask / rubbersheet -> eval, plus bench for CPU latency. Every run
// writes a manifest next to its outputs; re-running with the manifest's
// config and seed reproduces them (bitwise for non-timing outputs).

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <thread>

#include "irisloc/error.hpp"
#include "irisloc/evaluation.hpp"
#include "irisloc/manifest.hpp"
#include "irisloc/masking.hpp"
#include "irisloc/nets.hpp"
#include "irisloc/training.hpp"
#include "irisloc/version.hpp"

namespace fs = std::filesystem;
using namespace irisloc;

namespace {

struct CommonOpts {
  uint64_t seed = 1;
  std::string out;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_threads = false) {
  cmd->add_option("--seed", opts.seed, "Deterministic seed for this run");
  cmd->add_option("--out", opts.out, "Output directory")->required();
  if (with_threads)
    cmd->add_option("--threads", opts.threads,
                    "Worker threads for batch stages (ignored inside bench's timed region)")
        ->check(CLI::PositiveNumber);
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

RunManifest base_manifest(const std::string& command, uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.tool_version = kVersion;
  m.seed = seed;
  return m;
}

void finish_manifest(RunManifest& m, const std::string& out_dir) {
  fs::create_directories(out_dir);
  m.write((fs::path(out_dir) / ("manifest_" + m.command + ".json")).string());
}

ModelConfig config_from_flags(double scale, double width, int d) {
  return {static_cast<float>(scale), static_cast<float>(width), d};
}

// Shared inference record production. Refines the pupil through PRN when a
// PRN model is given; averages ILN target vectors when ensemble members are
// given. Timing is only recorded when record_timing is set, keeping the
// default output bitwise reproducible.
struct InferEngine {
  NetworkParams iln;
  std::vector<NetworkParams> ensemble_members;
  std::optional<NetworkParams> prn;
  bool record_timing = false;

  AnnotationRecord run(const Image& reference, const std::string& image_name, char eye) const {
    const auto t0 = std::chrono::steady_clock::now();
    AnnotationRecord rec;
    rec.image = image_name;
    rec.eye = eye;
    if (iln.config.d == 25) {
      const EllipseTarget k = iln_forward_ellipse(reference, iln);
      const EllipseLandmarks el = decode_ellipse(k);
      rec.ellipse = el;
      // Circle approximations keep the common schema: same centers, mean axis.
      rec.landmarks.pupil = {el.pupil.x, el.pupil.y, (el.pupil.a + el.pupil.b) / 2};
      rec.landmarks.iris = {el.iris.x, el.iris.y, (el.iris.a + el.iris.b) / 2};
      rec.landmarks.eyelid = el.eyelid;
    } else {
      std::vector<TargetVector> outputs{iln_forward(reference, iln)};
      for (const NetworkParams& member : ensemble_members)
        outputs.push_back(iln_forward(reference, member));
      rec.landmarks = decode_landmarks(ensemble_predict(outputs));
      if (prn) {
        const RoiFrame roi = make_roi(rec.landmarks.iris);
        const Image roi_img = crop_roi_image(reference, roi);
        rec.landmarks.pupil = prn_forward(roi_img, *prn, roi);
      }
    }
    if (record_timing)
      rec.infer_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }
};

std::vector<size_t> split_indices(const Corpus& corpus, const std::string& split) {
  if (split == "train") return corpus.train_indices;
  if (split == "test") return corpus.test_indices;
  std::vector<size_t> all(corpus.entries.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

// ---------------------------------------------------------------------------

int cmd_synth(const CommonOpts& opts, int count, int train_count) {
  synth_corpus(opts.out, count, train_count, opts.seed);
  RunManifest m = base_manifest("synth", opts.seed);
  m.config["count"] = std::to_string(count);
  m.config["train_count"] = std::to_string(train_count);
  m.outputs = {"images/", "annotations.jsonl", "split.txt", "corpus.json"};
  finish_manifest(m, opts.out);
  std::cout << "synth: wrote " << count << " scenes (" << train_count << " train) to "
            << opts.out << "\n";
  return 0;
}

int cmd_train_iln(const CommonOpts& opts, const std::string& corpus_dir, double scale,
                  double width, int iters, int batch, double circle_weight, bool ellipse,
                  int checkpoint_every, double lr, double weight_decay) {
  const Corpus corpus = load_corpus(corpus_dir);
  TrainConfig cfg = ellipse ? TrainConfig::ellipse_desk() : TrainConfig::iln_desk();
  cfg.model = config_from_flags(scale, width, ellipse ? 25 : 22);
  cfg.total_iters = iters;
  cfg.batch_size = batch;
  cfg.seed = opts.seed;
  cfg.checkpoint_every = checkpoint_every;
  cfg.out_dir = opts.out;
  cfg.lr = lr;
  cfg.lr_after = lr / 10;
  cfg.weight_decay = weight_decay;
  for (size_t i = 0; i < (ellipse ? 9u : 6u); ++i)
    cfg.weights.w[i] = static_cast<float>(circle_weight);

  const TrainResult result = train_iln(cfg, corpus);

  RunManifest m = base_manifest(ellipse ? "train-ellipse" : "train-iln", opts.seed);
  m.config["scale"] = std::to_string(scale);
  m.config["width"] = std::to_string(width);
  m.config["iters"] = std::to_string(iters);
  m.config["batch"] = std::to_string(batch);
  m.config["circle_weight"] = std::to_string(circle_weight);
  m.config["lr"] = std::to_string(lr);
  m.config["weight_decay"] = std::to_string(weight_decay);
  m.inputs = {corpus_dir};
  m.outputs = {"final.ilnw", "train_log.csv"};
  m.weights_hash = hex64(file_fnv1a((fs::path(opts.out) / "final.ilnw").string()));
  finish_manifest(m, opts.out);
  std::cout << "train: final loss " << result.final_loss << ", weights in " << opts.out << "\n";
  return 0;
}

int cmd_train_prn(const CommonOpts& opts, const std::string& corpus_dir, double width,
                  int iters, int batch, const std::string& iln_weights,
                  std::vector<double> jitter, int checkpoint_every) {
  const Corpus corpus = load_corpus(corpus_dir);
  std::array<double, 3> sigma{0, 0, 0};
  if (!iln_weights.empty()) {
    const NetworkParams iln = load_weights(iln_weights);
    sigma = measure_iln_error_std(iln, corpus, true);
    std::cout << "train-prn: measured ILN iris error std (" << sigma[0] << ", " << sigma[1]
              << ", " << sigma[2] << ")\n";
  } else if (jitter.size() == 3) {
    sigma = {jitter[0], jitter[1], jitter[2]};
  } else {
    throw CLI::ValidationError("train-prn", "provide --iln-weights or --jitter sx,sy,sr");
  }

  TrainConfig cfg = TrainConfig::prn_desk();
  cfg.model.m = static_cast<float>(width);
  cfg.total_iters = iters;
  cfg.batch_size = batch;
  cfg.seed = opts.seed;
  cfg.checkpoint_every = checkpoint_every;
  cfg.out_dir = opts.out;

  const TrainResult result = train_prn(cfg, corpus, sigma);

  RunManifest m = base_manifest("train-prn", opts.seed);
  m.config["width"] = std::to_string(width);
  m.config["iters"] = std::to_string(iters);
  m.config["batch"] = std::to_string(batch);
  m.config["jitter"] = std::to_string(sigma[0]) + "," + std::to_string(sigma[1]) + "," +
                       std::to_string(sigma[2]);
  m.inputs = {corpus_dir};
  if (!iln_weights.empty()) m.inputs.push_back(iln_weights);
  m.outputs = {"final.ilnw", "train_log.csv"};
  m.weights_hash = hex64(file_fnv1a((fs::path(opts.out) / "final.ilnw").string()));
  finish_manifest(m, opts.out);
  std::cout << "train-prn: final loss " << result.final_loss << ", weights in " << opts.out << "\n";
  return 0;
}

int cmd_infer(const CommonOpts& opts, const std::string& weights,
              const std::string& prn_weights, const std::vector<std::string>& ensemble,
              const std::string& corpus_dir, const std::string& split,
              const std::string& single_image, bool record_timing) {
  InferEngine engine;
  engine.iln = load_weights(weights);
  engine.record_timing = record_timing;
  for (const std::string& path : ensemble) {
    NetworkParams member = load_weights(path);
    if (member.config.d != engine.iln.config.d)
      throw IoError("infer: ensemble member output length differs from the primary model");
    engine.ensemble_members.push_back(std::move(member));
  }
  if (!prn_weights.empty()) engine.prn = load_weights(prn_weights);

  struct Job {
    std::string name;
    std::string path;
    char eye;
  };
  std::vector<Job> jobs;
  fs::path images_root;
  if (!corpus_dir.empty()) {
    const Corpus corpus = load_corpus(corpus_dir);
    images_root = corpus_dir;
    for (size_t idx : split_indices(corpus, split)) {
      const CorpusEntry& e = corpus.entries[idx];
      jobs.push_back({e.image_path, (fs::path(corpus_dir) / e.image_path).string(), e.eye});
    }
  } else if (!single_image.empty()) {
    jobs.push_back({fs::path(single_image).filename().string(), single_image, 'L'});
  } else {
    throw CLI::ValidationError("infer", "provide --corpus or --image");
  }

  std::vector<AnnotationRecord> records(jobs.size());
  auto worker = [&](size_t begin, size_t step) {
    for (size_t i = begin; i < jobs.size(); i += step) {
      const Image raw = load_pgm(jobs[i].path);
      const Image reference =
          (raw.width() == 640 && raw.height() == 480) ? raw : aspect_correct(raw).image;
      records[i] = engine.run(reference, jobs[i].name, jobs[i].eye);
    }
  };
  if (opts.threads <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < opts.threads; ++t)
      pool.emplace_back(worker, static_cast<size_t>(t), static_cast<size_t>(opts.threads));
    for (std::thread& t : pool) t.join();
  }

  fs::create_directories(opts.out);
  const std::string pred_path = (fs::path(opts.out) / "predictions.jsonl").string();
  const std::string tmp_path = pred_path + ".tmp";
  write_annotation_jsonl(tmp_path, records);
  fs::rename(tmp_path, pred_path);  // per-image results land atomically

  RunManifest m = base_manifest("infer", opts.seed);
  m.config["split"] = split;
  m.config["threads"] = std::to_string(opts.threads);
  m.config["ensemble_size"] = std::to_string(1 + ensemble.size());
  m.config["prn"] = prn_weights.empty() ? "no" : "yes";
  m.inputs = {weights};
  if (!prn_weights.empty()) m.inputs.push_back(prn_weights);
  for (const auto& e : ensemble) m.inputs.push_back(e);
  if (!corpus_dir.empty()) m.inputs.push_back(corpus_dir);
  if (!single_image.empty()) m.inputs.push_back(single_image);
  m.outputs = {"predictions.jsonl"};
  m.weights_hash = hex64(file_fnv1a(weights));
  finish_manifest(m, opts.out);
  std::cout << "infer: wrote " << records.size() << " predictions to " << pred_path << "\n";
  return 0;
}

int cmd_mask(const CommonOpts& opts, const std::string& records_path,
             const std::string& images_root) {
  const auto records = read_annotation_jsonl(records_path);
  const fs::path root = images_root.empty() ? fs::path(records_path).parent_path()
                                            : fs::path(images_root);
  fs::create_directories(opts.out);
  for (const AnnotationRecord& rec : records) {
    const Image img = load_pgm((root / rec.image).string());
    const std::string stem = fs::path(rec.image).stem().string();
    const EyelidMaskResult lid = eyelid_mask(rec.landmarks.eyelid, img.width(), img.height());
    const IrisMaskResult usable = iqr_anomaly_mask(img, rec.landmarks.iris, lid.mask);
    save_mask_pgm(lid.mask, (fs::path(opts.out) / (stem + "_eyelid.pgm")).string());
    save_mask_pgm(usable.usable, (fs::path(opts.out) / (stem + "_usable.pgm")).string());
  }
  RunManifest m = base_manifest("mask", opts.seed);
  m.inputs = {records_path, root.string()};
  m.outputs = {"*_eyelid.pgm", "*_usable.pgm"};
  finish_manifest(m, opts.out);
  std::cout << "mask: wrote masks for " << records.size() << " records to " << opts.out << "\n";
  return 0;
}

int cmd_rubbersheet(const CommonOpts& opts, const std::string& records_path,
                    const std::string& images_root, int n_theta, int n_rho) {
  const auto records = read_annotation_jsonl(records_path);
  const fs::path root = images_root.empty() ? fs::path(records_path).parent_path()
                                            : fs::path(images_root);
  fs::create_directories(opts.out);
  for (const AnnotationRecord& rec : records) {
    const Image img = load_pgm((root / rec.image).string());
    const Image sheet = rubber_sheet(img, rec.landmarks.pupil, rec.landmarks.iris, n_theta, n_rho);
    const std::string stem = fs::path(rec.image).stem().string();
    save_pgm(sheet, (fs::path(opts.out) / (stem + "_sheet.pgm")).string());
  }
  RunManifest m = base_manifest("rubbersheet", opts.seed);
  m.config["ntheta"] = std::to_string(n_theta);
  m.config["nrho"] = std::to_string(n_rho);
  m.inputs = {records_path, root.string()};
  m.outputs = {"*_sheet.pgm"};
  finish_manifest(m, opts.out);
  std::cout << "rubbersheet: wrote " << records.size() << " sheets to " << opts.out << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& pred_path, const std::string& truth_path,
             const std::string& label, std::vector<double> thresholds) {
  const auto preds = read_annotation_jsonl(pred_path);
  const auto truths = read_annotation_jsonl(truth_path);
  std::map<std::string, const AnnotationRecord*> truth_by_image;
  for (const AnnotationRecord& t : truths) truth_by_image[t.image] = &t;

  std::vector<EvalRecord> records;
  for (const AnnotationRecord& p : preds) {
    const auto it = truth_by_image.find(p.image);
    if (it == truth_by_image.end())
      throw IoError("eval: no ground truth for " + p.image);
    records.push_back(make_eval_record(fs::path(p.image).stem().string(), p.landmarks,
                                       it->second->landmarks, p.infer_ms.value_or(0.0)));
  }
  if (records.empty()) throw IoError("eval: no prediction records");

  fs::create_directories(opts.out);
  const EvalSummary summary = summarize(records);
  write_records_csv((fs::path(opts.out) / "records.csv").string(), records);
  write_summary_csv((fs::path(opts.out) / "summary.csv").string(), summary);
  const std::vector<CedSeries> series{
      {label + " pupil", ced_curve(pupil_errors(records), thresholds)},
      {label + " iris", ced_curve(iris_errors(records), thresholds)}};
  write_ced_csv((fs::path(opts.out) / "ced.csv").string(), thresholds, series);
  write_ced_svg((fs::path(opts.out) / "ced.svg").string(), thresholds, series);

  RunManifest m = base_manifest("eval", opts.seed);
  m.inputs = {pred_path, truth_path};
  m.outputs = {"records.csv", "summary.csv", "ced.csv", "ced.svg"};
  finish_manifest(m, opts.out);
  std::cout << "eval: " << records.size() << " records, mean pupil nHd " << summary.mean_pupil_nhd
            << ", mean iris nHd " << summary.mean_iris_nhd << "\n";
  return 0;
}

int cmd_bench(const CommonOpts& opts, const std::string& weights, const std::string& prn_weights,
              const std::string& image_path, int warmup, int reps) {
  const NetworkParams iln = load_weights(weights);
  std::optional<NetworkParams> prn;
  if (!prn_weights.empty()) prn = load_weights(prn_weights);

  std::vector<Image> images;
  if (!image_path.empty()) {
    const Image raw = load_pgm(image_path);
    images.push_back((raw.width() == 640 && raw.height() == 480) ? raw
                                                                 : aspect_correct(raw).image);
  } else {
    // A rendered scene stands in when no image is given; decode time is
    // outside the timed region either way.
    auto [img, lm] = render_scene(EyeScene::sample(opts.seed));
    images.push_back(std::move(img));
  }

  const LatencyStats iln_stats = bench_latency(
      [&](const Image& img) { (void)iln_forward(img, iln); }, images, warmup, reps);
  std::optional<LatencyStats> combo_stats;
  if (prn) {
    combo_stats = bench_latency(
        [&](const Image& img) {
          TargetVector k = iln_forward(img, iln);
          LandmarkSet lm = decode_landmarks(k);
          const RoiFrame roi = make_roi(lm.iris);
          lm.pupil = prn_forward(crop_roi_image(img, roi), *prn, roi);
        },
        images, warmup, reps);
  }

  fs::create_directories(opts.out);
  {
    std::ofstream csv(fs::path(opts.out) / "latency.csv");
    csv << "model,mean_ms,p95_ms,reps\n";
    csv << "iln," << iln_stats.mean_ms << "," << iln_stats.p95_ms << "," << iln_stats.reps << "\n";
    if (combo_stats)
      csv << "iln+prn," << combo_stats->mean_ms << "," << combo_stats->p95_ms << ","
          << combo_stats->reps << "\n";
  }
  RunManifest m = base_manifest("bench", opts.seed);
  m.config["warmup"] = std::to_string(warmup);
  m.config["reps"] = std::to_string(reps);
  m.config["timed_region"] = "forward pass including resize, excluding image decode";
  m.inputs = {weights};
  if (!prn_weights.empty()) m.inputs.push_back(prn_weights);
  m.outputs = {"latency.csv"};
  m.weights_hash = hex64(file_fnv1a(weights));
  finish_manifest(m, opts.out);

  std::cout << "bench: iln mean " << iln_stats.mean_ms << " ms, p95 " << iln_stats.p95_ms
            << " ms\n";
  if (combo_stats)
    std::cout << "bench: iln+prn mean " << combo_stats->mean_ms << " ms, p95 "
              << combo_stats->p95_ms << " ms\n";
  return 0;
}

int error_exit(int code, const std::string& type, const std::string& message) {
  std::cerr << "{\"error\":{\"code\":" << code << ",\"type\":\"" << type << "\",\"message\":\""
            << message << "\"}}\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation-free iris localization toolkit"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Plain key=value config file; flags override it");
  app.fallthrough();  // --config and --version may follow the subcommand
  app.require_subcommand(1);

  // synth
  CommonOpts synth_opts;
  int synth_count = 2400, synth_train = 2000;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic eye corpus");
  add_common(synth, synth_opts);
  synth->add_option("--count", synth_count, "Total scene count")->check(CLI::PositiveNumber);
  synth->add_option("--train-count", synth_train, "Scenes assigned to the train split");

  // train-iln
  CommonOpts tiln_opts;
  std::string tiln_corpus;
  double tiln_scale = 0.2, tiln_width = 0.25, tiln_circle_weight = 3.0;
  double tiln_lr = 0.001, tiln_wd = 1e-5;
  int tiln_iters = 5000, tiln_batch = 32, tiln_ckpt = 1000;
  bool tiln_ellipse = false;
  CLI::App* tiln = app.add_subcommand("train-iln", "Train the iris localization network");
  add_common(tiln, tiln_opts);
  tiln->add_option("--corpus", tiln_corpus, "Corpus directory")->required();
  tiln->add_option("--scale", tiln_scale, "Input scale s (input is 640s x 480s)");
  tiln->add_option("--width", tiln_width, "Channel width multiplier m");
  tiln->add_option("--iters", tiln_iters, "Training iterations");
  tiln->add_option("--batch", tiln_batch, "Batch size");
  tiln->add_option("--circle-weight", tiln_circle_weight,
                   "Loss weight on the circle elements (eyelid points stay at 1.0)");
  tiln->add_option("--checkpoint-every", tiln_ckpt, "Checkpoint cadence in iterations");
  tiln->add_flag("--ellipse", tiln_ellipse,
                 "Train the d=25 ellipse head on anisotropic affine labels");
  tiln->add_option("--lr", tiln_lr, "Learning rate (drops 10x at 90% of iters)");
  tiln->add_option("--weight-decay", tiln_wd, "L2 weight decay");

  // train-prn
  CommonOpts tprn_opts;
  std::string tprn_corpus, tprn_iln_weights;
  double tprn_width = 0.25;
  int tprn_iters = 5000, tprn_batch = 32, tprn_ckpt = 1000;
  std::vector<double> tprn_jitter;
  CLI::App* tprn = app.add_subcommand("train-prn", "Train the pupil refinement network");
  add_common(tprn, tprn_opts);
  tprn->add_option("--corpus", tprn_corpus, "Corpus directory")->required();
  tprn->add_option("--width", tprn_width, "Channel width multiplier m (shared with ILN)");
  tprn->add_option("--iters", tprn_iters, "Training iterations");
  tprn->add_option("--batch", tprn_batch, "Batch size");
  tprn->add_option("--iln-weights", tprn_iln_weights,
                   "ILN weights used to measure the ROI jitter std");
  tprn->add_option("--jitter", tprn_jitter, "Explicit jitter std sx,sy,sr")->expected(3);
  tprn->add_option("--checkpoint-every", tprn_ckpt, "Checkpoint cadence in iterations");

  // infer
  CommonOpts infer_opts;
  std::string infer_weights, infer_prn, infer_corpus, infer_split = "test", infer_image;
  std::vector<std::string> infer_ensemble;
  bool infer_timing = false;
  CLI::App* infer = app.add_subcommand("infer", "Run localization on images");
  add_common(infer, infer_opts, /*with_threads=*/true);
  infer->add_option("--weights", infer_weights, "ILN weights file")->required();
  infer->add_option("--prn-weights", infer_prn, "PRN weights file for pupil refinement");
  infer->add_option("--ensemble", infer_ensemble, "Additional ILN weights to average with");
  infer->add_option("--corpus", infer_corpus, "Corpus directory to read images from");
  infer->add_option("--split", infer_split, "Corpus split: train|test|all")
      ->check(CLI::IsMember({"train", "test", "all"}));
  infer->add_option("--image", infer_image, "Single PGM image instead of a corpus");
  infer->add_flag("--record-timing", infer_timing,
                  "Record per-image wall time (makes output non-reproducible)");

  // mask
  CommonOpts mask_opts;
  std::string mask_records, mask_images_root;
  CLI::App* mask = app.add_subcommand("mask", "Write eyelid and usable-iris masks");
  add_common(mask, mask_opts);
  mask->add_option("--records", mask_records, "Predictions or annotations JSONL")->required();
  mask->add_option("--images-root", mask_images_root,
                   "Directory image paths are relative to (default: the JSONL's directory)");

  // rubbersheet
  CommonOpts rs_opts;
  std::string rs_records, rs_images_root;
  int rs_ntheta = 256, rs_nrho = 64;
  CLI::App* rs = app.add_subcommand("rubbersheet", "Unwrap the pupil-iris annulus");
  add_common(rs, rs_opts);
  rs->add_option("--records", rs_records, "Predictions or annotations JSONL")->required();
  rs->add_option("--images-root", rs_images_root, "Directory image paths are relative to");
  rs->add_option("--ntheta", rs_ntheta, "Angular samples")->check(CLI::PositiveNumber);
  rs->add_option("--nrho", rs_nrho, "Radial samples")->check(CLI::PositiveNumber);

  // eval
  CommonOpts eval_opts;
  std::string eval_pred, eval_truth, eval_label = "model";
  std::vector<double> eval_thresholds{0.0025, 0.005, 0.0075, 0.01, 0.015,
                                      0.02,   0.03,  0.05,   0.075, 0.1};
  CLI::App* evalc = app.add_subcommand("eval", "Score predictions against ground truth");
  add_common(evalc, eval_opts);
  evalc->add_option("--pred", eval_pred, "Predictions JSONL")->required();
  evalc->add_option("--truth", eval_truth, "Ground-truth annotations JSONL")->required();
  evalc->add_option("--label", eval_label, "Series label for the CED plot");
  evalc->add_option("--thresholds", eval_thresholds, "CED thresholds, ascending");

  // bench
  CommonOpts bench_opts;
  std::string bench_weights, bench_prn, bench_image;
  int bench_warmup = 5, bench_reps = 30;
  CLI::App* bench = app.add_subcommand("bench", "Single-thread CPU latency benchmark");
  add_common(bench, bench_opts);
  bench->add_option("--weights", bench_weights, "ILN weights file")->required();
  bench->add_option("--prn-weights", bench_prn, "PRN weights for the combined pipeline");
  bench->add_option("--image", bench_image, "PGM image (default: a rendered scene)");
  bench->add_option("--warmup", bench_warmup, "Untimed warmup calls");
  bench->add_option("--reps", bench_reps, "Timed repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return error_exit(2, "bad_arguments", e.what());
  }

  try {
    if (*synth) return cmd_synth(synth_opts, synth_count, synth_train);
    if (*tiln)
      return cmd_train_iln(tiln_opts, tiln_corpus, tiln_scale, tiln_width, tiln_iters, tiln_batch,
                           tiln_circle_weight, tiln_ellipse, tiln_ckpt, tiln_lr, tiln_wd);
    if (*tprn)
      return cmd_train_prn(tprn_opts, tprn_corpus, tprn_width, tprn_iters, tprn_batch,
                           tprn_iln_weights, tprn_jitter, tprn_ckpt);
    if (*infer)
      return cmd_infer(infer_opts, infer_weights, infer_prn, infer_ensemble, infer_corpus,
                       infer_split, infer_image, infer_timing);
    if (*mask) return cmd_mask(mask_opts, mask_records, mask_images_root);
    if (*rs) return cmd_rubbersheet(rs_opts, rs_records, rs_images_root, rs_ntheta, rs_nrho);
    if (*evalc) return cmd_eval(eval_opts, eval_pred, eval_truth, eval_label, eval_thresholds);
    if (*bench)
      return cmd_bench(bench_opts, bench_weights, bench_prn, bench_image, bench_warmup, bench_reps);
  } catch (const CLI::ValidationError& e) {
    return error_exit(2, "bad_arguments", e.what());
  } catch (const ShapeError& e) {
    return error_exit(2, "bad_arguments", e.what());
  } catch (const NumericError& e) {
    return error_exit(4, "numeric_failure", e.what());
  } catch (const IoError& e) {
    return error_exit(3, "bad_input", e.what());
  } catch (const AugmentError& e) {
    return error_exit(3, "bad_input", e.what());
  } catch (const std::exception& e) {
    return error_exit(3, "bad_input", e.what());
  }
  return 0;
}
