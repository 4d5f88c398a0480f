#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <json.hpp>

#include "error.hpp"
#include "io_util.hpp"

namespace boneage {

using nlohmann::json;

const char* head_kind_name(HeadKind head) {
  return head == HeadKind::RidgeLayer ? "ridge_layer" : "plain_linear";
}

HeadKind head_kind_from_name(const std::string& name) {
  if (name == "ridge_layer") return HeadKind::RidgeLayer;
  if (name == "plain_linear") return HeadKind::PlainLinear;
  fail(ErrorKind::Parse, "unknown head kind '" + name +
                             "' (expected ridge_layer or plain_linear)");
}

void validate(const ModelSpec& spec) {
  if (spec.input_h < 1 || spec.input_w < 1 || spec.input_c < 1) {
    fail(ErrorKind::Config, "model input extents must be >= 1");
  }
  if (spec.blocks.empty()) {
    fail(ErrorKind::Config, "model needs at least one conv block");
  }
  if (spec.dense_width < 1) {
    fail(ErrorKind::Config, "dense_width must be >= 1");
  }
  if (spec.dropout_rate < 0.0 || spec.dropout_rate >= 1.0) {
    fail(ErrorKind::Config, "dropout_rate must lie in [0,1)");
  }
  int h = spec.input_h, w = spec.input_w;
  for (const ConvBlockSpec& block : spec.blocks) {
    if (block.filters < 1 || block.layers < 1) {
      fail(ErrorKind::Config, "block filters and layers must be >= 1");
    }
    if (block.stride != 1 && block.stride != 2) {
      fail(ErrorKind::Config, "conv stride must be 1 or 2");
    }
    for (int l = 0; l < block.layers; ++l) {
      h = conv_out_extent(h, block.stride);
      w = conv_out_extent(w, block.stride);
    }
    if (block.pool) {
      if (h % 2 != 0 || w % 2 != 0) {
        fail(ErrorKind::Config,
             "pooling needs even spatial extents; got " + std::to_string(h) +
                 "x" + std::to_string(w));
      }
      h /= 2;
      w /= 2;
    }
    if (h < 1 || w < 1) {
      fail(ErrorKind::Config, "spatial extent collapsed below 1");
    }
  }
}

BackboneShape backbone_output_shape(const ModelSpec& spec) {
  int h = spec.input_h, w = spec.input_w;
  for (const ConvBlockSpec& block : spec.blocks) {
    for (int l = 0; l < block.layers; ++l) {
      h = conv_out_extent(h, block.stride);
      w = conv_out_extent(w, block.stride);
    }
    if (block.pool) {
      h /= 2;
      w /= 2;
    }
  }
  return {h, w, spec.blocks.back().filters};
}

ParamSet zero_params(const ModelSpec& spec) {
  ParamSet params;
  int cin = spec.input_c;
  for (const ConvBlockSpec& block : spec.blocks) {
    std::vector<ConvLayerParams> layers;
    for (int l = 0; l < block.layers; ++l) {
      ConvLayerParams layer;
      layer.kernels = Tensor({3, 3, cin, block.filters});
      layer.bias.assign(block.filters, 0.0);
      layers.push_back(std::move(layer));
      cin = block.filters;
    }
    params.blocks.push_back(std::move(layers));
  }
  const int gap_channels = spec.blocks.back().filters;
  params.dense_w = Tensor({spec.dense_width, gap_channels});
  params.dense_b.assign(spec.dense_width, 0.0);
  params.head_w.assign(spec.dense_width, 0.0);
  params.head_b = 0.0;
  return params;
}

namespace {

template <typename ParamSetRef, typename Fn>
void walk_params(ParamSetRef& params, Fn fn) {
  for (auto& block : params.blocks) {
    for (auto& layer : block) {
      for (auto& v : layer.kernels.data) fn(v);
      for (auto& v : layer.bias) fn(v);
    }
  }
  for (auto& v : params.dense_w.data) fn(v);
  for (auto& v : params.dense_b) fn(v);
  for (auto& v : params.head_w) fn(v);
  fn(params.head_b);
}

}  // namespace

std::vector<double*> param_view(ParamSet& params) {
  std::vector<double*> view;
  walk_params(params, [&](double& v) { view.push_back(&v); });
  return view;
}

std::size_t parameter_count(const ModelSpec& spec) {
  std::size_t count = 0;
  int cin = spec.input_c;
  for (const ConvBlockSpec& block : spec.blocks) {
    for (int l = 0; l < block.layers; ++l) {
      count += 9ull * cin * block.filters + block.filters;
      cin = block.filters;
    }
  }
  const std::size_t gap_channels = spec.blocks.back().filters;
  count += static_cast<std::size_t>(spec.dense_width) * gap_channels;
  count += spec.dense_width;         // dense bias
  count += spec.dense_width;         // head weights
  count += 1;                        // head bias
  return count;
}

Model init_model(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  Model model{spec, zero_params(spec)};
  Rng rng(derive_seed(seed, {kStreamInit}));
  auto fill_uniform = [&](std::vector<double>& data, int fan_in) {
    const double limit = std::sqrt(6.0 / fan_in);
    for (double& v : data) {
      v = rng.uniform(-limit, limit);
    }
  };
  int cin = spec.input_c;
  for (auto& block : model.params.blocks) {
    for (auto& layer : block) {
      fill_uniform(layer.kernels.data, 9 * cin);
      cin = layer.kernels.shape[3];
    }
  }
  fill_uniform(model.params.dense_w.data, model.params.dense_w.shape[1]);
  fill_uniform(model.params.head_w, spec.dense_width);
  return model;
}

double forward(const Model& model, const GrayImage& image, Mode mode,
               Rng* dropout_rng, ForwardCache* cache) {
  const ModelSpec& spec = model.spec;
  if (image.width != spec.input_w || image.height != spec.input_h) {
    fail(ErrorKind::Shape,
         "image does not match the model input " + std::to_string(spec.input_w) +
             "x" + std::to_string(spec.input_h));
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};

  Tensor x({spec.input_h, spec.input_w, spec.input_c});
  for (int y = 0; y < spec.input_h; ++y) {
    for (int xx = 0; xx < spec.input_w; ++xx) {
      for (int ch = 0; ch < spec.input_c; ++ch) {
        x.at3(y, xx, ch) = image.at(xx, y);
      }
    }
  }

  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const ConvBlockSpec& block = spec.blocks[b];
    for (int l = 0; l < block.layers; ++l) {
      const ConvLayerParams& layer = model.params.blocks[b][l];
      c.conv_inputs.push_back(x);
      Tensor pre = conv2d(x, layer.kernels, layer.bias, block.stride, 1);
      c.conv_preacts.push_back(pre);
      x = relu(pre);
      c.conv_acts.push_back(x);
    }
    if (block.pool) {
      std::vector<int> argmax;
      x = maxpool2(x, argmax);
      c.pool_argmax.push_back(std::move(argmax));
    }
  }

  c.gap_out = gap(x);
  c.dense_pre = dense(c.gap_out, model.params.dense_w, model.params.dense_b);
  c.dense_act = c.dense_pre;
  for (double& v : c.dense_act) {
    v = std::max(0.0, v);
  }

  const bool draws = mode == Mode::Train && spec.dropout_rate > 0.0;
  if (draws && dropout_rng == nullptr) {
    fail(ErrorKind::Config,
         "train-mode forward needs an rng while dropout is active");
  }
  Rng unused(0);
  c.dropout_out = dropout(
      c.dense_act, spec.dropout_rate,
      mode == Mode::Train ? DropoutMode::Train : DropoutMode::Infer,
      draws ? *dropout_rng : unused, c.dropout_mask);

  double pred = model.params.head_b;
  for (std::size_t i = 0; i < c.dropout_out.size(); ++i) {
    pred += model.params.head_w[i] * c.dropout_out[i];
  }
  c.prediction = pred;
  return pred;
}

ParamSet backward(const Model& model, const ForwardCache& cache,
                  double upstream, std::vector<Tensor>* activation_grads) {
  const ModelSpec& spec = model.spec;
  ParamSet g = zero_params(spec);
  if (activation_grads) {
    activation_grads->assign(cache.conv_acts.size(), Tensor{});
  }

  const std::size_t n = cache.dropout_out.size();
  g.head_b = upstream;
  std::vector<double> g_dense_act(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.head_w[i] = cache.dropout_out[i] * upstream;
    g_dense_act[i] =
        model.params.head_w[i] * upstream * cache.dropout_mask[i];
  }
  std::vector<double> g_dense_pre(n);
  for (std::size_t i = 0; i < n; ++i) {
    g_dense_pre[i] = cache.dense_pre[i] > 0.0 ? g_dense_act[i] : 0.0;
  }

  std::vector<double> g_gap;
  dense_backward(cache.gap_out, model.params.dense_w, g_dense_pre, g_gap,
                 g.dense_w, g.dense_b);

  const BackboneShape bs = backbone_output_shape(spec);
  Tensor gt = gap_backward(g_gap, {bs.h, bs.w, bs.channels});

  int conv_idx = static_cast<int>(cache.conv_acts.size()) - 1;
  int pool_idx = static_cast<int>(cache.pool_argmax.size()) - 1;
  for (int b = static_cast<int>(spec.blocks.size()) - 1; b >= 0; --b) {
    const ConvBlockSpec& block = spec.blocks[b];
    if (block.pool) {
      gt = maxpool2_backward(gt, cache.pool_argmax[pool_idx--],
                             cache.conv_acts[conv_idx].shape);
    }
    for (int l = block.layers - 1; l >= 0; --l, --conv_idx) {
      if (activation_grads) {
        (*activation_grads)[conv_idx] = gt;
      }
      Tensor g_pre = relu_backward(cache.conv_preacts[conv_idx], gt);
      Tensor g_input;
      conv2d_backward(cache.conv_inputs[conv_idx],
                      model.params.blocks[b][l].kernels, block.stride, 1,
                      g_pre, g_input, g.blocks[b][l].kernels,
                      g.blocks[b][l].bias);
      gt = std::move(g_input);
    }
  }
  return g;
}

namespace {

json require_key(const json& j, const char* key) {
  if (!j.contains(key)) {
    fail(ErrorKind::Parse, std::string("model spec is missing '") + key + "'");
  }
  return j.at(key);
}

ModelSpec spec_from_json_impl(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("model spec is not valid JSON: ") +
                               e.what());
  }
  if (!j.is_object()) {
    fail(ErrorKind::Parse, "model spec must be a JSON object");
  }
  static const std::vector<std::string> known{
      "blocks", "dense_width", "dropout_rate", "head", "input"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      fail(ErrorKind::Parse, "unknown model spec key '" + it.key() + "'");
    }
  }
  ModelSpec spec;
  json input = require_key(j, "input");
  if (!input.is_array() || input.size() != 3) {
    fail(ErrorKind::Parse, "'input' must be [height, width, channels]");
  }
  spec.input_h = input.at(0).get<int>();
  spec.input_w = input.at(1).get<int>();
  spec.input_c = input.at(2).get<int>();
  json blocks = require_key(j, "blocks");
  if (!blocks.is_array() || blocks.empty()) {
    fail(ErrorKind::Parse, "'blocks' must be a nonempty array");
  }
  spec.blocks.clear();
  for (const json& jb : blocks) {
    if (!jb.is_object()) {
      fail(ErrorKind::Parse, "each block must be an object");
    }
    ConvBlockSpec block;
    block.filters = require_key(jb, "filters").get<int>();
    block.layers = jb.value("layers", 1);
    block.stride = jb.value("stride", 1);
    block.pool = jb.value("pool", true);
    spec.blocks.push_back(block);
  }
  spec.dense_width = j.value("dense_width", 1024);
  spec.dropout_rate = j.value("dropout_rate", 0.5);
  spec.head = head_kind_from_name(j.value("head", "ridge_layer"));
  return spec;
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) {
  json j;
  j["input"] = {spec.input_h, spec.input_w, spec.input_c};
  json blocks = json::array();
  for (const ConvBlockSpec& block : spec.blocks) {
    json jb;
    jb["filters"] = block.filters;
    jb["layers"] = block.layers;
    jb["stride"] = block.stride;
    jb["pool"] = block.pool;
    blocks.push_back(jb);
  }
  j["blocks"] = blocks;
  j["dense_width"] = spec.dense_width;
  j["dropout_rate"] = spec.dropout_rate;
  j["head"] = head_kind_name(spec.head);
  return j.dump();
}

ModelSpec spec_from_json(const std::string& text) {
  try {
    return spec_from_json_impl(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed model spec: ") + e.what());
  }
}

std::string save_model(const Model& model) {
  std::string out = "RGN1";
  const std::string spec_json = spec_to_json(model.spec);
  append_u32_le(out, static_cast<std::uint32_t>(spec_json.size()));
  out += spec_json;
  walk_params(model.params, [&](const double& v) { append_f64_le(out, v); });
  return out;
}

Model load_model(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "RGN1") != 0) {
    fail(ErrorKind::Parse, "not a model checkpoint (missing RGN1 magic)");
  }
  const std::uint32_t spec_len = read_u32_le(bytes, 4);
  if (bytes.size() < 8ull + spec_len) {
    fail(ErrorKind::Parse, "checkpoint truncated inside the spec block");
  }
  ModelSpec spec = spec_from_json(bytes.substr(8, spec_len));
  validate(spec);
  const std::size_t expected = parameter_count(spec);
  const std::size_t payload = bytes.size() - 8 - spec_len;
  if (payload != expected * 8) {
    fail(ErrorKind::Parse,
         "checkpoint parameter payload does not match the spec (" +
             std::to_string(payload) + " bytes for " +
             std::to_string(expected) + " parameters)");
  }
  Model model{spec, zero_params(spec)};
  std::size_t offset = 8 + spec_len;
  walk_params(model.params, [&](double& v) {
    v = read_f64_le(bytes, offset);
    offset += 8;
  });
  return model;
}

}  // namespace boneage
