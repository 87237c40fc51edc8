#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "irisloc/codec.hpp"
#include "irisloc/geometry.hpp"
#include "irisloc/image.hpp"
#include "irisloc/masking.hpp"

namespace irisloc {

/// Parameter record for one synthetic NIR-style eye; the image and the exact
/// labels both render deterministically from it.
struct EyeScene {
  uint64_t rng_seed = 0;
  Circle iris;
  Circle pupil;
  Point corner_left;   // P1
  Point corner_right;  // P2
  // Quadratic lid arcs y(x) = c[0] + c[1]*x + c[2]*x^2 through both corners.
  std::array<double, 3> upper_arc{};
  std::array<double, 3> lower_arc{};
  double pupil_level = 0.05;
  double iris_level = 0.35;
  double sclera_level = 0.8;
  double skin_level = 0.55;
  struct Blob {
    Point center;
    double radius = 0;
    double level = 1.0;
  };
  std::vector<Blob> speculars;
  double blur_sigma = 1.0;
  double noise_sigma = 0.01;
  char eye_side = 'L';
  // Iris fiber texture: angular and radial sinusoids.
  double texture_amp = 0.04;
  int texture_waves = 24;
  double texture_phase = 0.0;
  double ring_amp = 0.02;
  double ring_freq = 0.35;

  /// Draws a random scene; all invariants hold by construction.
  static EyeScene sample(uint64_t seed);

  double upper_lid_y(double x) const;
  double lower_lid_y(double x) const;

  /// Exact generating landmarks: corners plus three points per arc at
  /// 25/50/75% of the horizontal corner span.
  LandmarkSet landmarks() const;
};

/// Region maps for oracle-style tests: which generator region each pixel
/// belongs to, before blur and noise.
struct SceneMasks {
  BoolRaster pupil;
  BoolRaster iris_annulus;  // iris minus pupil, inside the lid aperture
  BoolRaster sclera;
  BoolRaster specular;      // blob alpha > 0.5
  BoolRaster aperture;      // between the lids
};

/// Renders 640x480 grayscale plus exact labels.
std::pair<Image, LandmarkSet> render_scene(const EyeScene& scene);
std::pair<Image, LandmarkSet> render_scene(const EyeScene& scene, SceneMasks* masks);

/// Pads to a 4:3 aspect by replicating the short side's border (right columns
/// when too tall, bottom rows when too wide), then resizes to 640x480.
/// `to_reference` transports labels from input coordinates into the output.
struct AspectResult {
  Image image;
  Affine2 to_reference;
};
AspectResult aspect_correct(const Image& input);

/// Augmentation ranges; each component fires independently with probability
/// one half. Blur sigma is in original-size pixels and is applied before any
/// resampling; geometric order is scale, rotate, shift about the image center.
struct AugmentParams {
  double blur_sigma_min = 1.0, blur_sigma_max = 25.0;
  double brightness = 0.2;
  double contrast = 0.2;
  double scale_min = 0.3, scale_max = 2.0;
  double rotation_deg = 20.0;
  bool allow_shift = true;       // PRN training disables shifting
  bool anisotropic = false;      // ellipse mode: x/y scales drawn independently
  double apply_prob = 0.5;
  int max_retries = 20;

  static AugmentParams iln_defaults() { return {}; }
  static AugmentParams prn_defaults() {
    AugmentParams p;
    p.allow_shift = false;
    return p;
  }
  static AugmentParams ellipse_defaults() {
    AugmentParams p;
    p.anisotropic = true;
    return p;
  }
};

/// One concrete parameter draw.
struct AugmentDraw {
  bool blur_on = false;
  double blur_sigma = 0.0;
  bool brightness_on = false;
  double brightness_delta = 0.0;
  bool contrast_on = false;
  double contrast_gain = 1.0;
  bool geometric_on = false;  // any of scale / rotate / shift fired
  Affine2 geometric;          // source -> destination coordinates
  double scale_x = 1.0, scale_y = 1.0;
};

/// Draws parameters so that the mapped iris circle stays fully inside the
/// frame (shift is sampled uniformly over the admissible range); retries the
/// whole geometric draw when no placement exists, then throws AugmentError.
AugmentDraw draw_augment(const AugmentParams& params, const Circle& iris,
                         int width, int height, std::mt19937_64& rng);

/// Applies photometric parts only; labels are untouched by construction.
Image apply_photometric(const Image& image, const AugmentDraw& draw);

/// Applies the geometric map to the image (border replicate) and transports
/// circle-preserving labels. Requires an isotropic draw.
std::pair<Image, LandmarkSet> apply_geometric(const Image& image, const LandmarkSet& labels,
                                              const AugmentDraw& draw);

/// Full label-consistent augmentation: blur, brightness, contrast, then the
/// geometric similarity.
std::pair<Image, LandmarkSet> augment(const Image& image, const LandmarkSet& labels,
                                      const AugmentParams& params, std::mt19937_64& rng);

/// Ellipse-mode augmentation: the affine may be anisotropic, labels become
/// ellipses via circle_under_affine.
std::pair<Image, EllipseLandmarks> augment_ellipse(const Image& image, const LandmarkSet& labels,
                                                   const AugmentParams& params, std::mt19937_64& rng);

/// PRN training sample: jitters the ground-truth iris circle by the measured
/// ILN error std (x, y, r), crops 1.2x the jittered circle, resizes to
/// 128x128 and returns the PRN-normalized pupil target.
struct PrnSample {
  Image roi;
  std::array<double, 3> target;
  RoiFrame frame;
};
PrnSample prn_crop_sample(const Image& image, const LandmarkSet& labels,
                          std::array<double, 3> iln_error_std, std::mt19937_64& rng);

/// Crops roi.side pixels around roi.center (border replicate) and resizes to
/// roi.out_size; sampling uses the same affine as the label transform.
Image crop_roi_image(const Image& image, const RoiFrame& roi);

// --------------------------------------------------------------------------
// Corpus on disk: images/scene_%05d.pgm + annotations.jsonl + split.txt +
// corpus.json (seed list), mirroring an 80/20 train-test split.

struct CorpusEntry {
  std::string id;
  std::string image_path;  // absolute or corpus-relative
  LandmarkSet landmarks;
  char eye = 'L';
  bool train = true;
};

struct Corpus {
  std::string dir;
  uint64_t seed = 0;
  std::vector<CorpusEntry> entries;
  std::vector<size_t> train_indices;
  std::vector<size_t> test_indices;

  Image load_image(size_t index) const;
};

/// Generates `count` scenes (the first train_count are the training split),
/// writes images, annotations, split file and corpus metadata.
Corpus synth_corpus(const std::string& dir, int count, int train_count, uint64_t seed);

/// Loads a corpus directory written by synth_corpus, or any directory with
/// the same annotations.jsonl + split.txt layout (hand-annotated data).
Corpus load_corpus(const std::string& dir);

/// Content hash over annotations and the split, for cache keys.
uint64_t corpus_fingerprint(const Corpus& corpus);

}  // namespace irisloc
