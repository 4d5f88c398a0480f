#pragma once

#include <utility>

#include "image.hpp"
#include "rng.hpp"

namespace boneage {

/// Per-sample augmentation policy. Degenerate defaults (probabilities 0,
/// ranges collapsed to the identity) make augment() a no-op.
struct AugmentSpec {
  double flip_h = 0.0;                              // probability
  double flip_v = 0.0;                              // probability
  double max_shift = 0.0;                           // fraction of side, [0,0.5]
  double max_rotate = 0.0;                          // degrees, [0,180]
  std::pair<double, double> zoom_range{1.0, 1.0};   // scale multipliers
  std::pair<double, double> brightness_range{1.0, 1.0};

  bool operator==(const AugmentSpec&) const = default;
};

/// ConfigError when probabilities leave [0,1], a range has lo > hi,
/// max_shift leaves [0,0.5], max_rotate leaves [0,180], zoom reaches 0,
/// or brightness goes negative.
void validate(const AugmentSpec& spec);

/// One concrete draw from an AugmentSpec. Exposed so tests can force exact
/// transforms (e.g. a 90-degree rotation) without going through sampling.
struct Transform {
  bool flip_h = false;
  bool flip_v = false;
  double shift_x = 0.0;  // pixels
  double shift_y = 0.0;  // pixels
  double rotate_deg = 0.0;
  double zoom = 1.0;
  double brightness = 1.0;
};

/// Draws each field in the fixed order flip_h, flip_v, shift, rotate, zoom,
/// brightness, one uniform variate per field (two for shift).
Transform sample_transform(const AugmentSpec& spec, int width, int height,
                           Rng& rng);

/// Applies flips as index permutations, then shift/rotate/zoom as a single
/// inverse-mapped nearest-neighbor warp about the image center (out-of-frame
/// pixels become 0), then the brightness multiplier clamped to [0,1].
GrayImage apply_transform(const GrayImage& image, const Transform& t);

/// sample_transform followed by apply_transform.
GrayImage augment(const GrayImage& image, const AugmentSpec& spec, Rng& rng);

}  // namespace boneage
