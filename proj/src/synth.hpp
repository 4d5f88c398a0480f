#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "annotations.hpp"
#include "image.hpp"

namespace boneage {

/// Recipe for a synthetic dataset: bright elliptical blobs on a dark noisy
/// background, where the target age is an exact affine function of the blob
/// count. Learning the count is easy for a small conv net, which makes the
/// end-to-end pipeline testable with known ground truth.
struct SynthSpec {
  int count = 1;            // images
  int image_size = 64;      // square frames
  int k_min = 1;            // blobs per image, inclusive range
  int k_max = 5;
  double age_a = 24.0;      // target = age_a * k + age_b, months
  double age_b = 12.0;
  double noise_sd = 0.02;   // Gaussian pixel noise, clamped to [0,1]
  std::uint64_t seed = 0;

  bool operator==(const SynthSpec&) const = default;
};

/// ConfigError unless count >= 1, image_size >= 16, 0 <= k_min <= k_max,
/// noise_sd >= 0, and every reachable target lies in [0,300] months.
void validate(const SynthSpec& spec);

struct SynthResult {
  Dataset dataset;               // one polygon annotation per image
  std::vector<GrayImage> images; // parallel to dataset.images
};

/// Deterministic given the seed; image i depends only on (seed, i), so any
/// parallel split over images reproduces the serial output. Blobs never
/// overlap (enforced by rejection sampling with a guaranteed gap), so a
/// threshold-and-count-components oracle recovers k exactly. Each image gets
/// a convex polygon covering all of its blobs with margin, and cohorts
/// alternate male/female.
SynthResult generate(const SynthSpec& spec);

}  // namespace boneage
