#pragma once

#include <cstdint>
#include <vector>

namespace boneage {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates plus the step counter. Sized lazily on the
/// first step; a later size change is a ShapeError.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

/// Standard bias-corrected Adam update, applied in place through the
/// parameter pointers. grads must align with params elementwise.
void adam_step(const std::vector<double*>& params,
               const std::vector<double>& grads, AdamState& state, double lr,
               const AdamConfig& config);

struct PlateauConfig {
  double factor = 0.8;
  int patience = 3;
  double min_delta = 0.0;
};

struct PlateauState {
  double best = 0.0;
  bool has_best = false;
  int counter = 0;
};

/// Reduce-on-plateau rule: a validation loss >= best - min_delta counts
/// toward the plateau; an improvement resets the counter and updates best.
/// When the counter reaches patience the returned lr is lr*factor and the
/// counter resets. ConfigError unless factor is in (0,1) and patience >= 1.
double plateau_step(PlateauState& state, double val_loss, double lr,
                    const PlateauConfig& config);

}  // namespace boneage
