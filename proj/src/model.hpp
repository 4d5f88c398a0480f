#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"
#include "layers.hpp"
#include "tensor.hpp"

namespace boneage {

/// One stage of the backbone: `layers` convolutions (3x3, padding 1, the
/// given stride) each followed by ReLU, then an optional 2x2/stride-2 max
/// pool. Pooling is what the classic geometry uses; the stride-2 profile
/// turns it off because striding already halves the extent.
struct ConvBlockSpec {
  int filters = 8;
  int layers = 1;
  int stride = 1;
  bool pool = true;
  bool operator==(const ConvBlockSpec&) const = default;
};

enum class HeadKind { RidgeLayer, PlainLinear };

const char* head_kind_name(HeadKind head);
HeadKind head_kind_from_name(const std::string& name);

struct ModelSpec {
  int input_h = 64;
  int input_w = 64;
  int input_c = 1;
  std::vector<ConvBlockSpec> blocks;
  int dense_width = 1024;
  double dropout_rate = 0.5;
  HeadKind head = HeadKind::RidgeLayer;
  bool operator==(const ModelSpec&) const = default;
};

/// ConfigError unless: >= 1 block, strides in {1,2}, dropout in [0,1),
/// positive extents/filters/layers/width, and spatial extents stay >= 1
/// through every block (even at each pooling point).
void validate(const ModelSpec& spec);

/// Spatial extent after one 3x3 pad-1 convolution.
inline int conv_out_extent(int in, int stride) {
  return (in - 1) / stride + 1;
}

/// (height, width) entering GAP, and the channel count there.
struct BackboneShape {
  int h = 0;
  int w = 0;
  int channels = 0;
};
BackboneShape backbone_output_shape(const ModelSpec& spec);

/// All trainable parameters. Declaration order (per block, per conv layer:
/// kernels then bias; then dense W, dense b, head w, head b) is the order
/// used by init, the optimizer view, and the checkpoint byte layout.
struct ConvLayerParams {
  Tensor kernels;             // (3, 3, in, out)
  std::vector<double> bias;   // out
};

struct ParamSet {
  std::vector<std::vector<ConvLayerParams>> blocks;
  Tensor dense_w;             // (dense_width, channels at GAP)
  std::vector<double> dense_b;
  std::vector<double> head_w; // dense_width
  double head_b = 0.0;
};

/// Zero-filled parameters with the shapes the spec implies.
ParamSet zero_params(const ModelSpec& spec);

/// Mutable pointers to every scalar parameter, in declaration order.
std::vector<double*> param_view(ParamSet& params);

std::size_t parameter_count(const ModelSpec& spec);

struct Model {
  ModelSpec spec;
  ParamSet params;
};

/// Kaiming-uniform fan-in weights (limit sqrt(6/fan_in)), zero biases,
/// drawn in declaration order from the seed's init stream.
Model init_model(const ModelSpec& spec, std::uint64_t seed);

enum class Mode { Train, Infer };

/// Everything forward() computed, enough to drive backward() and the
/// activation-map explanations.
struct ForwardCache {
  std::vector<Tensor> conv_inputs;    // per conv layer, its input
  std::vector<Tensor> conv_preacts;   // per conv layer, pre-ReLU output
  std::vector<Tensor> conv_acts;      // per conv layer, post-ReLU output
  std::vector<std::vector<int>> pool_argmax;  // per pooled block
  std::vector<double> gap_out;
  std::vector<double> dense_pre;
  std::vector<double> dense_act;
  std::vector<double> dropout_mask;
  std::vector<double> dropout_out;
  double prediction = 0.0;
};

/// Replicates the grayscale image across the spec's input channels and runs
/// blocks -> GAP -> dense -> ReLU -> dropout -> linear head. Train mode
/// needs an rng for dropout when the rate is positive; infer mode never
/// draws. The cache pointer may be null when only the prediction is needed.
double forward(const Model& model, const GrayImage& image, Mode mode,
               Rng* dropout_rng, ForwardCache* cache);

/// Parameter gradients for d(loss)/d(prediction) = upstream. When
/// activation_grads is non-null it receives d(loss)/d(post-ReLU activation)
/// for every conv layer, aligned with cache.conv_acts.
ParamSet backward(const Model& model, const ForwardCache& cache,
                  double upstream, std::vector<Tensor>* activation_grads);

/// Canonical JSON for the architecture (sorted keys, shortest floats).
std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

/// Checkpoint bytes: magic "RGN1", u32 little-endian length of the spec
/// JSON, the JSON itself, then every parameter as a 64-bit little-endian
/// float in declaration order. load rejects wrong magic, malformed specs,
/// and any byte-count mismatch.
std::string save_model(const Model& model);
Model load_model(const std::string& bytes);

}  // namespace boneage
