#include "boneage.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "annotations.hpp"
#include "commands.hpp"
#include "error.hpp"
#include "gradcam.hpp"
#include "image.hpp"
#include "io_util.hpp"
#include "model.hpp"
#include "ridge.hpp"
#include "tensor.hpp"

struct ba_dataset {
  boneage::Dataset value;
};

struct ba_model {
  boneage::Model value;
};

namespace {

thread_local std::string t_last_error;

ba_status map_kind(boneage::ErrorKind kind) {
  using boneage::ErrorKind;
  switch (kind) {
    case ErrorKind::Parse: return BA_E_PARSE;
    case ErrorKind::Referential: return BA_E_REFERENCE;
    case ErrorKind::Geometry: return BA_E_GEOMETRY;
    case ErrorKind::UnsupportedShape: return BA_E_UNSUPPORTED;
    case ErrorKind::Shape: return BA_E_SHAPE;
    case ErrorKind::Config: return BA_E_CONFIG;
    case ErrorKind::Singular: return BA_E_SINGULAR;
    case ErrorKind::Domain: return BA_E_DOMAIN;
    case ErrorKind::Io: return BA_E_IO;
  }
  return BA_E_INTERNAL;
}

// Runs fn, translating exceptions into status codes and the thread-local
// message. Every exported fallible function funnels through here so no
// exception ever crosses the C boundary.
template <typename Fn>
ba_status guarded(Fn&& fn) {
  t_last_error.clear();
  try {
    return fn();
  } catch (const boneage::Error& e) {
    t_last_error = e.what();
    return map_kind(e.kind());
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return BA_E_INTERNAL;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return BA_E_INTERNAL;
  } catch (...) {
    t_last_error = "unexpected failure";
    return BA_E_INTERNAL;
  }
}

ba_status argument_error(const char* message) {
  t_last_error = message;
  return BA_E_ARGUMENT;
}

char* copy_text(const std::string& text) {
  char* out = new char[text.size() + 1];
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

boneage::GrayImage image_from(const double* pixels, int width, int height) {
  boneage::GrayImage image(width, height);
  std::copy(pixels, pixels + image.data.size(), image.data.begin());
  return image;
}

// Images are resampled to the checkpoint's native frame, same as the
// command-line evaluate path, so callers may hand over any extent.
boneage::GrayImage fit_frame(const boneage::ModelSpec& spec,
                             const double* pixels, int width, int height) {
  boneage::GrayImage image = image_from(pixels, width, height);
  if (width == spec.input_w && height == spec.input_h) {
    return image;
  }
  return boneage::resize(image, spec.input_w, spec.input_h,
                         boneage::ResizeMode::Bilinear);
}

int resolve_layer(const boneage::ModelSpec& spec, int layer) {
  int count = boneage::conv_layer_count(spec);
  return layer == -1 ? count - 1 : layer;
}

}  // namespace

extern "C" {

const char* ba_last_error(void) { return t_last_error.c_str(); }

const char* ba_version(void) { return "0.1.0"; }

void ba_text_free(char* text) { delete[] text; }

int ba_run(int argc, const char* const* argv) {
  return boneage::run_cli(argc, argv);
}

ba_status ba_dataset_parse_coco(const char* json_text, ba_dataset** out) {
  if (json_text == nullptr || out == nullptr) {
    return argument_error("ba_dataset_parse_coco: null argument");
  }
  *out = nullptr;
  return guarded([&] {
    auto ds = std::make_unique<ba_dataset>();
    ds->value = boneage::parse_coco(json_text);
    *out = ds.release();
    return BA_OK;
  });
}

ba_status ba_dataset_parse_via(const char* json_text, ba_dataset** out) {
  if (json_text == nullptr || out == nullptr) {
    return argument_error("ba_dataset_parse_via: null argument");
  }
  *out = nullptr;
  return guarded([&] {
    auto ds = std::make_unique<ba_dataset>();
    ds->value = boneage::parse_via(json_text);
    *out = ds.release();
    return BA_OK;
  });
}

ba_status ba_dataset_to_coco(const ba_dataset* ds, char** out_text) {
  if (ds == nullptr || out_text == nullptr) {
    return argument_error("ba_dataset_to_coco: null argument");
  }
  *out_text = nullptr;
  return guarded([&] {
    *out_text = copy_text(boneage::to_coco(ds->value));
    return BA_OK;
  });
}

int ba_dataset_image_count(const ba_dataset* ds) {
  return ds == nullptr ? -1 : static_cast<int>(ds->value.images.size());
}

int ba_dataset_annotation_count(const ba_dataset* ds) {
  return ds == nullptr ? -1 : static_cast<int>(ds->value.annotations.size());
}

void ba_dataset_free(ba_dataset* ds) { delete ds; }

ba_status ba_model_load(const char* path, ba_model** out) {
  if (path == nullptr || out == nullptr) {
    return argument_error("ba_model_load: null argument");
  }
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<ba_model>();
    m->value = boneage::load_model(boneage::read_file(path));
    *out = m.release();
    return BA_OK;
  });
}

ba_status ba_model_save(const ba_model* m, const char* path) {
  if (m == nullptr || path == nullptr) {
    return argument_error("ba_model_save: null argument");
  }
  return guarded([&] {
    boneage::write_file_atomic(path, boneage::save_model(m->value));
    return BA_OK;
  });
}

int ba_model_input_width(const ba_model* m) {
  return m == nullptr ? -1 : m->value.spec.input_w;
}

int ba_model_input_height(const ba_model* m) {
  return m == nullptr ? -1 : m->value.spec.input_h;
}

int64_t ba_model_parameter_count(const ba_model* m) {
  return m == nullptr ? -1
                      : static_cast<int64_t>(
                            boneage::parameter_count(m->value.spec));
}

ba_status ba_model_predict(const ba_model* m, const double* pixels, int width,
                           int height, double* out_months) {
  if (m == nullptr || pixels == nullptr || out_months == nullptr) {
    return argument_error("ba_model_predict: null argument");
  }
  if (width < 1 || height < 1) {
    return argument_error("ba_model_predict: extents must be >= 1");
  }
  return guarded([&] {
    boneage::GrayImage image = fit_frame(m->value.spec, pixels, width, height);
    *out_months = boneage::forward(m->value, image, boneage::Mode::Infer,
                                   nullptr, nullptr);
    return BA_OK;
  });
}

int ba_model_layer_count(const ba_model* m) {
  return m == nullptr ? -1 : boneage::conv_layer_count(m->value.spec);
}

ba_status ba_model_heatmap_extent(const ba_model* m, int layer, int* out_width,
                                  int* out_height) {
  if (m == nullptr || out_width == nullptr || out_height == nullptr) {
    return argument_error("ba_model_heatmap_extent: null argument");
  }
  return guarded([&] {
    const boneage::ModelSpec& spec = m->value.spec;
    int target = resolve_layer(spec, layer);
    int h = spec.input_h;
    int w = spec.input_w;
    int index = 0;
    for (const boneage::ConvBlockSpec& block : spec.blocks) {
      for (int l = 0; l < block.layers; ++l) {
        h = boneage::conv_out_extent(h, block.stride);
        w = boneage::conv_out_extent(w, block.stride);
        if (index == target) {
          *out_width = w;
          *out_height = h;
          return BA_OK;
        }
        ++index;
      }
      if (block.pool) {
        h /= 2;
        w /= 2;
      }
    }
    boneage::fail(boneage::ErrorKind::Config,
                  "heatmap layer index out of range");
  });
}

ba_status ba_model_heatmap(const ba_model* m, const double* pixels, int width,
                           int height, int layer, int samples, double noise_sd,
                           uint64_t seed, double* out_values) {
  if (m == nullptr || pixels == nullptr || out_values == nullptr) {
    return argument_error("ba_model_heatmap: null argument");
  }
  if (width < 1 || height < 1) {
    return argument_error("ba_model_heatmap: extents must be >= 1");
  }
  return guarded([&] {
    const boneage::ModelSpec& spec = m->value.spec;
    boneage::GrayImage image = fit_frame(spec, pixels, width, height);
    boneage::Heatmap map = boneage::smooth_grad_cam(
        m->value, image, resolve_layer(spec, layer), samples, noise_sd, seed);
    std::copy(map.values.begin(), map.values.end(), out_values);
    return BA_OK;
  });
}

void ba_model_free(ba_model* m) { delete m; }

ba_status ba_ridge_fit(const double* x, const double* y, int n, int p,
                       double lambda, int standardize, double* out_beta) {
  if (x == nullptr || y == nullptr || out_beta == nullptr) {
    return argument_error("ba_ridge_fit: null argument");
  }
  if (n < 1 || p < 1) {
    return argument_error("ba_ridge_fit: extents must be >= 1");
  }
  return guarded([&] {
    boneage::RidgeProblem problem;
    problem.x = boneage::Tensor({n, p});
    std::copy(x, x + problem.x.numel(), problem.x.data.begin());
    problem.y.assign(y, y + n);
    problem.lambda = lambda;
    boneage::RidgeSolution solution =
        boneage::fit_closed_form(problem, standardize != 0);
    std::copy(solution.beta.begin(), solution.beta.end(), out_beta);
    return BA_OK;
  });
}

ba_status ba_ridge_cv(const double* x, const double* y, int n, int p,
                      const double* grid, int grid_len, int folds,
                      uint64_t seed, double* out_best_lambda,
                      double* out_mean_mse) {
  if (x == nullptr || y == nullptr || grid == nullptr ||
      out_best_lambda == nullptr) {
    return argument_error("ba_ridge_cv: null argument");
  }
  if (n < 1 || p < 1 || grid_len < 1) {
    return argument_error("ba_ridge_cv: extents must be >= 1");
  }
  return guarded([&] {
    boneage::Tensor design({n, p});
    std::copy(x, x + design.numel(), design.data.begin());
    std::vector<double> response(y, y + n);
    std::vector<double> candidates(grid, grid + grid_len);
    boneage::CvResult result = boneage::cross_validate_lambda(
        design, response, candidates, folds, seed);
    *out_best_lambda = result.best_lambda;
    if (out_mean_mse != nullptr) {
      std::copy(result.mean_mse.begin(), result.mean_mse.end(), out_mean_mse);
    }
    return BA_OK;
  });
}

}  // extern "C"
