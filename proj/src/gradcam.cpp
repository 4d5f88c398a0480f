#include "gradcam.hpp"

#include <algorithm>

#include "error.hpp"
#include "rng.hpp"

namespace boneage {

int conv_layer_count(const ModelSpec& spec) {
  int count = 0;
  for (const ConvBlockSpec& block : spec.blocks) {
    count += block.layers;
  }
  return count;
}

Heatmap grad_cam(const Model& model, const GrayImage& image, int layer_index) {
  const int layers = conv_layer_count(model.spec);
  if (layer_index < 0 || layer_index >= layers) {
    fail(ErrorKind::Config, "layer index " + std::to_string(layer_index) +
                                " is out of range (model has " +
                                std::to_string(layers) + " conv layers)");
  }
  ForwardCache cache;
  forward(model, image, Mode::Infer, nullptr, &cache);
  std::vector<Tensor> activation_grads;
  backward(model, cache, 1.0, &activation_grads);

  const Tensor& act = cache.conv_acts[layer_index];
  const Tensor& grad = activation_grads[layer_index];
  const int h = act.shape[0], w = act.shape[1], c = act.shape[2];

  std::vector<double> weights(c, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        weights[ch] += grad.at3(y, x, ch);
      }
    }
  }
  const double inv_area = 1.0 / (static_cast<double>(h) * w);
  for (double& v : weights) {
    v *= inv_area;
  }

  Heatmap map;
  map.width = w;
  map.height = h;
  map.values.assign(static_cast<std::size_t>(w) * h, 0.0);
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        acc += weights[ch] * act.at3(y, x, ch);
      }
      const double v = std::max(0.0, acc);
      map.values[static_cast<std::size_t>(y) * w + x] = v;
      peak = std::max(peak, v);
    }
  }
  if (peak > 0.0) {
    for (double& v : map.values) {
      v /= peak;
    }
  }
  return map;
}

Heatmap smooth_grad_cam(const Model& model, const GrayImage& image,
                        int layer_index, int samples, double noise_sd,
                        std::uint64_t seed) {
  if (samples < 1) {
    fail(ErrorKind::Config, "smoothing needs at least one sample");
  }
  if (noise_sd < 0.0) {
    fail(ErrorKind::Config, "noise_sd must be >= 0");
  }
  Heatmap mean;
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, {kStreamNoise, static_cast<std::uint64_t>(s)}));
    GrayImage perturbed = image;
    for (double& v : perturbed.data) {
      v = std::clamp(v + noise_sd * rng.normal(), 0.0, 1.0);
    }
    Heatmap map = grad_cam(model, perturbed, layer_index);
    if (s == 0) {
      mean = std::move(map);
    } else {
      for (std::size_t i = 0; i < mean.values.size(); ++i) {
        mean.values[i] += map.values[i];
      }
    }
  }
  double peak = 0.0;
  for (double& v : mean.values) {
    v /= samples;
    peak = std::max(peak, v);
  }
  if (peak > 0.0) {
    for (double& v : mean.values) {
      v /= peak;
    }
  }
  return mean;
}

HeatmapExport export_heatmap(const Heatmap& map, const GrayImage& image) {
  GrayImage grid;
  grid.width = map.width;
  grid.height = map.height;
  grid.data = map.values;
  GrayImage up = resize(grid, image.width, image.height, ResizeMode::Nearest);

  GrayImage overlay(image.width, image.height);
  for (std::size_t i = 0; i < overlay.data.size(); ++i) {
    overlay.data[i] = 0.5 * image.data[i] + 0.5 * up.data[i];
  }
  return {encode_pgm(up), encode_pgm(overlay)};
}

}  // namespace boneage
