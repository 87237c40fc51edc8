#include "irisloc/traindata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "irisloc/error.hpp"

namespace irisloc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double normal(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

// Quadratic y(x) through three points (Lagrange, collapsed to coefficients).
std::array<double, 3> parabola_through(Point a, Point b, Point c) {
  const double d0 = (a.x - b.x) * (a.x - c.x);
  const double d1 = (b.x - a.x) * (b.x - c.x);
  const double d2 = (c.x - a.x) * (c.x - b.x);
  const double k0 = a.y / d0, k1 = b.y / d1, k2 = c.y / d2;
  return {k0 * b.x * c.x + k1 * a.x * c.x + k2 * a.x * b.x,
          -(k0 * (b.x + c.x) + k1 * (a.x + c.x) + k2 * (a.x + b.x)),
          k0 + k1 + k2};
}

double eval_quadratic(const std::array<double, 3>& c, double x) {
  return c[0] + x * (c[1] + x * c[2]);
}

}  // namespace

double EyeScene::upper_lid_y(double x) const { return eval_quadratic(upper_arc, x); }
double EyeScene::lower_lid_y(double x) const { return eval_quadratic(lower_arc, x); }

EyeScene EyeScene::sample(uint64_t seed) {
  std::mt19937_64 rng(seed);
  EyeScene s;
  s.rng_seed = seed;
  s.iris.x = uniform(rng, 280, 360);
  s.iris.y = uniform(rng, 215, 265);
  s.iris.r = uniform(rng, 90, 140);

  const double pupil_ratio = uniform(rng, 0.25, 0.5);
  const double off_angle = uniform(rng, 0, 2 * std::numbers::pi);
  const double off_dist = uniform(rng, 0, 0.12) * s.iris.r;
  s.pupil = {s.iris.x + off_dist * std::cos(off_angle),
             s.iris.y + off_dist * std::sin(off_angle), pupil_ratio * s.iris.r};

  const double half_width = uniform(rng, 1.4, 1.75) * s.iris.r;
  s.corner_left = {s.iris.x - half_width, s.iris.y + uniform(rng, -0.12, 0.12) * s.iris.r};
  s.corner_right = {s.iris.x + half_width, s.iris.y + uniform(rng, -0.12, 0.12) * s.iris.r};

  const double mid_x = 0.5 * (s.corner_left.x + s.corner_right.x);
  const double open_u = uniform(rng, 0.95, 1.30);
  const double open_l = uniform(rng, 0.95, 1.30);
  s.upper_arc = parabola_through(s.corner_left, {mid_x, s.iris.y - open_u * s.iris.r}, s.corner_right);
  s.lower_arc = parabola_through(s.corner_left, {mid_x, s.iris.y + open_l * s.iris.r}, s.corner_right);

  s.pupil_level = uniform(rng, 0.03, 0.10);
  s.iris_level = uniform(rng, 0.28, 0.42);
  s.sclera_level = uniform(rng, 0.70, 0.88);
  s.skin_level = uniform(rng, 0.48, 0.62);

  const int blobs = static_cast<int>(rng() % 4);
  for (int i = 0; i < blobs; ++i) {
    Blob b;
    const double a = uniform(rng, 0, 2 * std::numbers::pi);
    const double d = uniform(rng, 0, 0.8) * s.iris.r;
    b.center = {s.iris.x + d * std::cos(a), s.iris.y + d * std::sin(a)};
    b.radius = uniform(rng, 3, 12);
    b.level = uniform(rng, 0.9, 1.0);
    s.speculars.push_back(b);
  }

  s.blur_sigma = uniform(rng, 0.5, 2.0);
  s.noise_sigma = uniform(rng, 0.004, 0.025);
  s.eye_side = (rng() & 1) ? 'R' : 'L';

  s.texture_amp = uniform(rng, 0.02, 0.06);
  s.texture_waves = static_cast<int>(std::lround(uniform(rng, 16, 40)));
  s.texture_phase = uniform(rng, 0, 2 * std::numbers::pi);
  s.ring_amp = uniform(rng, 0.01, 0.04);
  s.ring_freq = uniform(rng, 0.2, 0.6);
  return s;
}

LandmarkSet EyeScene::landmarks() const {
  LandmarkSet lm;
  lm.pupil = pupil;
  lm.iris = iris;
  lm.eyelid[0] = corner_left;
  lm.eyelid[1] = corner_right;
  const double span = corner_right.x - corner_left.x;
  for (int i = 0; i < 3; ++i) {
    const double x = corner_left.x + (0.25 + 0.25 * i) * span;
    lm.eyelid[static_cast<size_t>(2 + i)] = {x, upper_lid_y(x)};
    lm.eyelid[static_cast<size_t>(5 + i)] = {x, lower_lid_y(x)};
  }
  return lm;
}

std::pair<Image, LandmarkSet> render_scene(const EyeScene& scene) {
  return render_scene(scene, nullptr);
}

std::pair<Image, LandmarkSet> render_scene(const EyeScene& scene, SceneMasks* masks) {
  std::string why;
  if (!validate_landmarks(scene.landmarks(), &why))
    throw ShapeError("render_scene: invalid scene: " + why);

  constexpr int W = 640, H = 480;
  Image img(W, H);
  if (masks) {
    masks->pupil = BoolRaster(W, H);
    masks->iris_annulus = BoolRaster(W, H);
    masks->sclera = BoolRaster(W, H);
    masks->specular = BoolRaster(W, H);
    masks->aperture = BoolRaster(W, H);
  }

  for (int y = 0; y < H; ++y) {
    float* row = img.row(y);
    for (int x = 0; x < W; ++x) {
      double v;
      const bool horizontally_inside =
          x > scene.corner_left.x && x < scene.corner_right.x;
      const bool aperture = horizontally_inside &&
                            y > scene.upper_lid_y(x) && y < scene.lower_lid_y(x);
      if (!aperture) {
        v = scene.skin_level;
      } else {
        const double dpx = x - scene.pupil.x, dpy = y - scene.pupil.y;
        const double dp = std::sqrt(dpx * dpx + dpy * dpy);
        if (dp <= scene.pupil.r) {
          v = scene.pupil_level;
        } else {
          const double dix = x - scene.iris.x, diy = y - scene.iris.y;
          const double di = std::sqrt(dix * dix + diy * diy);
          if (di <= scene.iris.r) {
            const double theta = std::atan2(diy, dix);
            v = scene.iris_level +
                scene.texture_amp * std::sin(scene.texture_waves * theta + scene.texture_phase) +
                scene.ring_amp * std::sin(di * scene.ring_freq + 1.7 * scene.texture_phase);
            if (masks) masks->iris_annulus.set(x, y, true);
          } else {
            v = scene.sclera_level;
            if (masks) masks->sclera.set(x, y, true);
          }
        }
        if (masks) {
          masks->aperture.set(x, y, true);
          if (dp <= scene.pupil.r) masks->pupil.set(x, y, true);
        }
        // Specular highlights sit on the cornea, over any region.
        for (const EyeScene::Blob& b : scene.speculars) {
          const double dbx = x - b.center.x, dby = y - b.center.y;
          const double db2 = dbx * dbx + dby * dby;
          const double half = b.radius / 2.0;
          const double alpha = std::exp(-0.5 * db2 / (half * half));
          if (alpha > 1e-3) v += alpha * (b.level - v);
          if (masks && alpha > 0.5) masks->specular.set(x, y, true);
        }
      }
      row[x] = static_cast<float>(v);
    }
  }

  if (scene.blur_sigma > 0) img = gaussian_blur(img, scene.blur_sigma);
  if (scene.noise_sigma > 0) {
    std::mt19937_64 noise_rng(scene.rng_seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> dist(0.0, scene.noise_sigma);
    float* p = img.data();
    for (size_t i = 0; i < img.size(); ++i)
      p[i] = static_cast<float>(p[i] + dist(noise_rng));
  }
  float* p = img.data();
  for (size_t i = 0; i < img.size(); ++i) p[i] = std::clamp(p[i], 0.0f, 1.0f);

  return {std::move(img), scene.landmarks()};
}

AspectResult aspect_correct(const Image& input) {
  if (input.empty()) throw ShapeError("aspect_correct: empty image");
  const int w = input.width(), h = input.height();

  Image padded = input;
  if (3 * w < 4 * h) {
    // Narrower than 4:3: replicate right border columns.
    const int pw = static_cast<int>(std::ceil(4.0 * h / 3.0));
    padded = Image(pw, h);
    for (int y = 0; y < h; ++y) {
      const float* src = input.row(y);
      float* dst = padded.row(y);
      std::copy(src, src + w, dst);
      std::fill(dst + w, dst + pw, src[w - 1]);
    }
  } else if (3 * w > 4 * h) {
    // Wider than 4:3: replicate bottom rows.
    const int ph = static_cast<int>(std::ceil(3.0 * w / 4.0));
    padded = Image(w, ph);
    for (int y = 0; y < ph; ++y) {
      const float* src = input.row(std::min(y, h - 1));
      std::copy(src, src + w, padded.row(y));
    }
  }

  AspectResult res;
  const double sx = 640.0 / padded.width();
  const double sy = 480.0 / padded.height();
  if (padded.width() == 640 && padded.height() == 480) {
    res.image = std::move(padded);
    res.to_reference = Affine2::identity();
  } else {
    res.image = resize_bilinear(padded, 640, 480);
    // Same half-pixel-center convention as the resampling itself.
    res.to_reference = {{sx, 0, 0.5 * sx - 0.5, 0, sy, 0.5 * sy - 0.5}};
  }
  return res;
}

AugmentDraw draw_augment(const AugmentParams& params, const Circle& iris,
                         int width, int height, std::mt19937_64& rng) {
  AugmentDraw d;
  auto coin = [&] { return uniform(rng, 0, 1) < params.apply_prob; };

  d.blur_on = coin();
  if (d.blur_on) d.blur_sigma = uniform(rng, params.blur_sigma_min, params.blur_sigma_max);
  d.brightness_on = coin();
  if (d.brightness_on) d.brightness_delta = uniform(rng, -params.brightness, params.brightness);
  d.contrast_on = coin();
  if (d.contrast_on) d.contrast_gain = 1.0 + uniform(rng, -params.contrast, params.contrast);

  const Point center{(width - 1) / 2.0, (height - 1) / 2.0};
  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    const bool scale_on = coin();
    double sx = 1.0, sy = 1.0;
    if (scale_on) {
      sx = uniform(rng, params.scale_min, params.scale_max);
      sy = params.anisotropic ? uniform(rng, params.scale_min, params.scale_max) : sx;
    }
    const bool rot_on = coin();
    const double rot = rot_on ? uniform(rng, -params.rotation_deg, params.rotation_deg) *
                                    std::numbers::pi / 180.0
                              : 0.0;
    const bool shift_on = params.allow_shift && coin();

    Affine2 a = Affine2::scaling(sx, sy, center).then(Affine2::rotation(rot, center));
    if (!scale_on && !rot_on && !shift_on) {
      d.geometric_on = false;
      d.geometric = Affine2::identity();
      return d;
    }

    // Axis extents of the mapped iris: r times the row norms of the linear part.
    const Point ic = a.apply({iris.x, iris.y});
    const double ex = iris.r * std::hypot(a.m[0], a.m[1]);
    const double ey = iris.r * std::hypot(a.m[3], a.m[4]);

    if (shift_on) {
      const double lo_x = -(ic.x - ex), hi_x = (width - 1) - (ic.x + ex);
      const double lo_y = -(ic.y - ey), hi_y = (height - 1) - (ic.y + ey);
      if (lo_x > hi_x || lo_y > hi_y) continue;  // iris cannot fit; redraw
      a = a.then(Affine2::translation(uniform(rng, lo_x, hi_x), uniform(rng, lo_y, hi_y)));
    } else {
      if (ic.x - ex < 0 || ic.x + ex > width - 1 || ic.y - ey < 0 || ic.y + ey > height - 1)
        continue;
    }

    d.geometric_on = true;
    d.geometric = a;
    d.scale_x = sx;
    d.scale_y = sy;
    return d;
  }
  throw AugmentError("draw_augment: no in-frame placement after " +
                     std::to_string(params.max_retries) + " retries");
}

Image apply_photometric(const Image& image, const AugmentDraw& draw) {
  Image out = draw.blur_on ? gaussian_blur(image, draw.blur_sigma) : image;
  if (draw.brightness_on || draw.contrast_on) {
    const float delta = static_cast<float>(draw.brightness_delta);
    const float gain = static_cast<float>(draw.contrast_gain);
    float* p = out.data();
    for (size_t i = 0; i < out.size(); ++i) {
      float v = p[i] + delta;
      v = (v - 0.5f) * gain + 0.5f;
      p[i] = std::clamp(v, 0.0f, 1.0f);
    }
  }
  return out;
}

std::pair<Image, LandmarkSet> apply_geometric(const Image& image, const LandmarkSet& labels,
                                              const AugmentDraw& draw) {
  if (!draw.geometric_on) return {image, labels};
  Image warped = warp_affine(image, draw.geometric, image.width(), image.height());
  return {std::move(warped), landmarks_under_similarity(labels, draw.geometric)};
}

std::pair<Image, LandmarkSet> augment(const Image& image, const LandmarkSet& labels,
                                      const AugmentParams& params, std::mt19937_64& rng) {
  if (params.anisotropic)
    throw ShapeError("augment: anisotropic draws need augment_ellipse");
  AugmentDraw draw = draw_augment(params, labels.iris, image.width(), image.height(), rng);
  Image photo = apply_photometric(image, draw);
  return apply_geometric(photo, labels, draw);
}

std::pair<Image, EllipseLandmarks> augment_ellipse(const Image& image, const LandmarkSet& labels,
                                                   const AugmentParams& params,
                                                   std::mt19937_64& rng) {
  AugmentDraw draw = draw_augment(params, labels.iris, image.width(), image.height(), rng);
  Image photo = apply_photometric(image, draw);

  EllipseLandmarks el;
  if (draw.geometric_on) {
    photo = warp_affine(photo, draw.geometric, image.width(), image.height());
    el.pupil = circle_under_affine(labels.pupil, draw.geometric);
    el.iris = circle_under_affine(labels.iris, draw.geometric);
    for (size_t i = 0; i < labels.eyelid.size(); ++i)
      el.eyelid[i] = draw.geometric.apply(labels.eyelid[i]);
  } else {
    el.pupil = {labels.pupil.x, labels.pupil.y, labels.pupil.r, labels.pupil.r, 0.0};
    el.iris = {labels.iris.x, labels.iris.y, labels.iris.r, labels.iris.r, 0.0};
    el.eyelid = labels.eyelid;
  }
  return {std::move(photo), el};
}

Image crop_roi_image(const Image& image, const RoiFrame& roi) {
  if (!(roi.side > 0)) throw ShapeError("crop_roi_image: invalid roi");
  Image out(roi.out_size, roi.out_size);
  const double scale = roi.scale();
  const double ox = roi.center.x - roi.side / 2.0;
  const double oy = roi.center.y - roi.side / 2.0;
  for (int v = 0; v < roi.out_size; ++v) {
    float* row = out.row(v);
    const double sy = oy + v * scale;
    for (int u = 0; u < roi.out_size; ++u) row[u] = image.sample(ox + u * scale, sy);
  }
  return out;
}

PrnSample prn_crop_sample(const Image& image, const LandmarkSet& labels,
                          std::array<double, 3> iln_error_std, std::mt19937_64& rng) {
  for (double s : iln_error_std)
    if (s < 0 || !std::isfinite(s)) throw ShapeError("prn_crop_sample: bad error std");
  Circle jittered = labels.iris;
  jittered.x += normal(rng, iln_error_std[0]);
  jittered.y += normal(rng, iln_error_std[1]);
  jittered.r = std::max(8.0, jittered.r + normal(rng, iln_error_std[2]));

  PrnSample sample;
  sample.frame = make_roi(jittered);
  sample.roi = crop_roi_image(image, sample.frame);
  sample.target = to_roi_coords(labels.pupil, sample.frame);
  return sample;
}

// ---------------------------------------------------------------------------
// Corpus

Image Corpus::load_image(size_t index) const {
  const CorpusEntry& e = entries.at(index);
  fs::path p(e.image_path);
  if (p.is_relative()) p = fs::path(dir) / p;
  return load_pgm(p.string());
}

Corpus synth_corpus(const std::string& dir, int count, int train_count, uint64_t seed) {
  if (count <= 0 || train_count < 0 || train_count > count)
    throw ShapeError("synth_corpus: bad counts");
  fs::create_directories(fs::path(dir) / "images");

  std::mt19937_64 rng(seed);
  std::vector<uint64_t> scene_seeds(static_cast<size_t>(count));
  for (uint64_t& s : scene_seeds) s = rng();

  Corpus corpus;
  corpus.dir = dir;
  corpus.seed = seed;
  std::vector<AnnotationRecord> annotations;
  std::ofstream split(fs::path(dir) / "split.txt");
  if (!split) throw IoError("synth_corpus: cannot write split file");

  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%05d", i);
    const EyeScene scene = EyeScene::sample(scene_seeds[static_cast<size_t>(i)]);
    auto [img, lm] = render_scene(scene);
    const std::string rel = std::string("images/") + id + ".pgm";
    save_pgm(img, (fs::path(dir) / rel).string());

    AnnotationRecord rec;
    rec.image = rel;
    rec.landmarks = lm;
    rec.eye = scene.eye_side;
    annotations.push_back(rec);

    const bool train = i < train_count;
    split << id << " " << (train ? "train" : "test") << "\n";
    CorpusEntry entry{id, rel, lm, scene.eye_side, train};
    corpus.entries.push_back(entry);
    (train ? corpus.train_indices : corpus.test_indices).push_back(static_cast<size_t>(i));
  }
  write_annotation_jsonl((fs::path(dir) / "annotations.jsonl").string(), annotations);

  json meta;
  meta["seed"] = seed;
  meta["count"] = count;
  meta["train_count"] = train_count;
  meta["scene_seeds"] = scene_seeds;
  std::ofstream mf(fs::path(dir) / "corpus.json");
  mf << meta.dump(2) << "\n";
  if (!mf) throw IoError("synth_corpus: cannot write corpus.json");
  return corpus;
}

Corpus load_corpus(const std::string& dir) {
  Corpus corpus;
  corpus.dir = dir;
  const auto annotations = read_annotation_jsonl((fs::path(dir) / "annotations.jsonl").string());

  std::ifstream split(fs::path(dir) / "split.txt");
  if (!split) throw IoError("load_corpus: missing split.txt in " + dir);
  std::vector<std::pair<std::string, bool>> split_rows;
  std::string id, tag;
  while (split >> id >> tag) {
    if (tag != "train" && tag != "test")
      throw IoError("load_corpus: bad split tag '" + tag + "' for " + id);
    split_rows.emplace_back(id, tag == "train");
  }
  if (split_rows.size() != annotations.size())
    throw IoError("load_corpus: split.txt rows do not match annotations");

  std::ifstream meta(fs::path(dir) / "corpus.json");
  if (meta) {
    json j = json::parse(meta, nullptr, false);
    if (!j.is_discarded() && j.contains("seed")) corpus.seed = j["seed"].get<uint64_t>();
  }

  for (size_t i = 0; i < annotations.size(); ++i) {
    const AnnotationRecord& rec = annotations[i];
    std::string stem = fs::path(rec.image).stem().string();
    if (stem != split_rows[i].first)
      throw IoError("load_corpus: split/annotation order mismatch at " + stem);
    std::string why;
    if (!validate_landmarks(rec.landmarks, &why))
      throw IoError("load_corpus: invalid ground truth for " + stem + ": " + why);
    CorpusEntry entry{stem, rec.image, rec.landmarks, rec.eye, split_rows[i].second};
    corpus.entries.push_back(entry);
    (entry.train ? corpus.train_indices : corpus.test_indices).push_back(i);
  }
  return corpus;
}

uint64_t corpus_fingerprint(const Corpus& corpus) {
  uint64_t h = 14695981039346656037ull;
  auto mix_bytes = [&h](const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const CorpusEntry& e : corpus.entries) {
    mix_bytes(e.id.data(), e.id.size());
    const auto k = encode_landmarks(e.landmarks);
    mix_bytes(k.values.data(), sizeof(k.values));
    const unsigned char t = e.train ? 1 : 0;
    mix_bytes(&t, 1);
  }
  return h;
}

}  // namespace irisloc
