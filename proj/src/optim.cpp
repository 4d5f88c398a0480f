#include "optim.hpp"

#include <cmath>

#include "error.hpp"

namespace boneage {

void adam_step(const std::vector<double*>& params,
               const std::vector<double>& grads, AdamState& state, double lr,
               const AdamConfig& config) {
  if (params.size() != grads.size()) {
    fail(ErrorKind::Shape, "adam parameter/gradient length mismatch");
  }
  if (state.step == 0 && state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    fail(ErrorKind::Shape, "adam state does not match parameter count");
  }
  state.step += 1;
  const double b1t = 1.0 - std::pow(config.beta1, state.step);
  const double b2t = 1.0 - std::pow(config.beta2, state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / b1t;
    const double v_hat = state.v[i] / b2t;
    *params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

double plateau_step(PlateauState& state, double val_loss, double lr,
                    const PlateauConfig& config) {
  if (config.factor <= 0.0 || config.factor >= 1.0) {
    fail(ErrorKind::Config, "plateau factor must lie in (0,1)");
  }
  if (config.patience < 1) {
    fail(ErrorKind::Config, "plateau patience must be >= 1");
  }
  if (!state.has_best || val_loss < state.best - config.min_delta) {
    state.best = val_loss;
    state.has_best = true;
    state.counter = 0;
    return lr;
  }
  state.counter += 1;
  if (state.counter >= config.patience) {
    state.counter = 0;
    return lr * config.factor;
  }
  return lr;
}

}  // namespace boneage
