#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"
#include "model.hpp"

namespace boneage {

/// Activation-space saliency grid. Values lie in [0,1] and the maximum is
/// exactly 1 unless the map is identically zero.
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major
  bool operator==(const Heatmap&) const = default;
};

/// Number of conv activations addressable by layer_index below.
int conv_layer_count(const ModelSpec& spec);

/// Gradient-weighted activation map over conv layer layer_index (flat index
/// across blocks): per-channel weights are the spatial means of
/// d(prediction)/d(activation), the map is ReLU of the weighted channel sum,
/// max-normalized. The raw regression output is differentiated; there is no
/// class score. Inference mode throughout (dropout inactive). Invalid
/// layer_index is a ConfigError.
Heatmap grad_cam(const Model& model, const GrayImage& image, int layer_index);

/// Mean of grad_cam maps over `samples` copies of the image perturbed by
/// seeded Gaussian pixel noise (clamped to [0,1]), renormalized. With
/// samples=1 and noise_sd=0 the result equals grad_cam exactly.
Heatmap smooth_grad_cam(const Model& model, const GrayImage& image,
                        int layer_index, int samples, double noise_sd,
                        std::uint64_t seed);

/// The map upsampled (nearest) to the image frame, and the overlay
/// 0.5*image + 0.5*map, both as binary PGM bytes.
struct HeatmapExport {
  std::string map_pgm;
  std::string overlay_pgm;
};
HeatmapExport export_heatmap(const Heatmap& map, const GrayImage& image);

}  // namespace boneage
