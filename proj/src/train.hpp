#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "augment.hpp"
#include "image.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "ridge.hpp"

namespace boneage {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 8;
  double lr = 1e-3;
  AdamConfig adam;
  PlateauConfig plateau;
  double lambda = 0.0;  // head L2 penalty; active for ridge_layer heads
  std::uint64_t seed = 0;
  AugmentSpec augment;
  int workers = 1;
};

/// ConfigError on out-of-range fields. lr = 0 is allowed (a no-op trainer
/// is the cheapest determinism check); negative values are not.
void validate(const TrainConfig& config);

struct EpochStats {
  int epoch = 0;  // 1-based; 0 marks the untrained baseline
  double train_mse = 0.0;
  double val_mse = 0.0;
  double train_mae = 0.0;
  double val_mae = 0.0;
  double lr = 0.0;  // rate the epoch's updates used
};

struct TrainResult {
  Model model;
  EpochStats initial;               // infer-mode metrics before any update
  std::vector<EpochStats> history;  // one row per epoch
};

/// Minibatch training with Adam and the reduce-on-plateau schedule keyed to
/// validation MSE. Each epoch reshuffles the training order; augmentation
/// and dropout draw from per-(epoch, sample) streams, so results are
/// identical for any worker count. Ridge-layer heads add the 2*lambda*w
/// penalty gradient to the head weights (never the bias). Train-set metrics
/// in the history are measured in inference mode at epoch end.
TrainResult train(Model model, const std::vector<GrayImage>& train_images,
                  const std::vector<double>& train_targets,
                  const std::vector<GrayImage>& val_images,
                  const std::vector<double>& val_targets,
                  const TrainConfig& config);

/// CSV: epoch,train_mse,val_mse,train_mae,val_mae,lr with one row per epoch.
std::string history_to_csv(const std::vector<EpochStats>& history);

/// Inference-mode predictions, in input order.
std::vector<double> predict(const Model& model,
                            const std::vector<GrayImage>& images, int workers);

/// Post-ReLU dense activations with dropout inactive: the feature vector
/// the closed-form ridge head consumes.
std::vector<double> extract_features(const Model& model,
                                     const GrayImage& image);

/// Rows of extract_features, with an optional trailing intercept column of
/// ones.
Tensor feature_matrix(const Model& model, const std::vector<GrayImage>& images,
                      int workers, bool add_intercept);

/// Two-stage ridge head: fits beta on (features, intercept) at the given
/// lambda via the closed-form solver and overwrites head weights and bias,
/// so the checkpoint carries the fitted head.
void fit_head_closed_form(Model& model, const std::vector<GrayImage>& images,
                          const std::vector<double>& targets, double lambda,
                          int workers);

}  // namespace boneage
