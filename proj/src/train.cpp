#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "error.hpp"
#include "io_util.hpp"
#include "layers.hpp"
#include "rng.hpp"

namespace boneage {

void validate(const TrainConfig& config) {
  if (config.epochs < 0) {
    fail(ErrorKind::Config, "epochs must be >= 0");
  }
  if (config.batch_size < 1) {
    fail(ErrorKind::Config, "batch_size must be >= 1");
  }
  if (config.lr < 0.0 || !std::isfinite(config.lr)) {
    fail(ErrorKind::Config, "lr must be finite and >= 0");
  }
  if (config.lambda < 0.0) {
    fail(ErrorKind::Config, "lambda must be >= 0");
  }
  if (config.adam.beta1 < 0.0 || config.adam.beta1 >= 1.0 ||
      config.adam.beta2 < 0.0 || config.adam.beta2 >= 1.0 ||
      config.adam.eps <= 0.0) {
    fail(ErrorKind::Config, "adam needs betas in [0,1) and eps > 0");
  }
  if (config.plateau.factor <= 0.0 || config.plateau.factor >= 1.0) {
    fail(ErrorKind::Config, "plateau factor must lie in (0,1)");
  }
  if (config.plateau.patience < 1) {
    fail(ErrorKind::Config, "plateau patience must be >= 1");
  }
  if (config.plateau.min_delta < 0.0) {
    fail(ErrorKind::Config, "plateau min_delta must be >= 0");
  }
  if (config.workers < 1) {
    fail(ErrorKind::Config, "workers must be >= 1");
  }
  validate(config.augment);
}

namespace {

struct EvalStats {
  double mse = 0.0;
  double mae = 0.0;
};

EvalStats evaluate_split(const Model& model,
                         const std::vector<GrayImage>& images,
                         const std::vector<double>& targets, int workers) {
  std::vector<double> preds(images.size());
  parallel_for(images.size(), workers, [&](std::size_t i) {
    preds[i] = forward(model, images[i], Mode::Infer, nullptr, nullptr);
  });
  EvalStats stats;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const double d = preds[i] - targets[i];
    stats.mse += d * d;
    stats.mae += std::abs(d);
  }
  stats.mse /= static_cast<double>(images.size());
  stats.mae /= static_cast<double>(images.size());
  return stats;
}

std::vector<double> flatten(ParamSet& grads) {
  std::vector<double> flat;
  for (double* p : param_view(grads)) {
    flat.push_back(*p);
  }
  return flat;
}

}  // namespace

TrainResult train(Model model, const std::vector<GrayImage>& train_images,
                  const std::vector<double>& train_targets,
                  const std::vector<GrayImage>& val_images,
                  const std::vector<double>& val_targets,
                  const TrainConfig& config) {
  validate(config);
  validate(model.spec);
  if (train_images.empty() || train_images.size() != train_targets.size()) {
    fail(ErrorKind::Config, "training set is empty or misaligned");
  }
  if (val_images.empty() || val_images.size() != val_targets.size()) {
    fail(ErrorKind::Config, "validation set is empty or misaligned");
  }

  const std::size_t n = train_images.size();
  TrainResult result{std::move(model), {}, {}};

  const EvalStats tr0 =
      evaluate_split(result.model, train_images, train_targets, config.workers);
  const EvalStats va0 =
      evaluate_split(result.model, val_images, val_targets, config.workers);
  result.initial = {0, tr0.mse, va0.mse, tr0.mae, va0.mae, config.lr};

  AdamState adam_state;
  PlateauState plateau_state;
  double lr = config.lr;
  const bool penalized =
      result.model.spec.head == HeadKind::RidgeLayer && config.lambda > 0.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(
        config.seed, {kStreamShuffle, static_cast<std::uint64_t>(epoch)}));
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, shuffle_rng);

    for (std::size_t batch_start = 0; batch_start < n;
         batch_start += config.batch_size) {
      const std::size_t batch_end =
          std::min(n, batch_start + static_cast<std::size_t>(config.batch_size));
      const std::size_t batch = batch_end - batch_start;

      // Per-sample gradients land in their own slots; the reduction below
      // runs in sample order, so the sum is identical for any worker count.
      std::vector<ParamSet> slots(batch);
      parallel_for(batch, config.workers, [&](std::size_t s) {
        const std::size_t idx = order[batch_start + s];
        Rng augment_rng(derive_seed(
            config.seed, {kStreamAugment, static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(idx)}));
        Rng dropout_rng(derive_seed(
            config.seed, {kStreamDropout, static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(idx)}));
        const GrayImage view =
            augment(train_images[idx], config.augment, augment_rng);
        ForwardCache cache;
        const double pred =
            forward(result.model, view, Mode::Train, &dropout_rng, &cache);
        const double upstream =
            2.0 * (pred - train_targets[idx]) / static_cast<double>(batch);
        slots[s] = backward(result.model, cache, upstream, nullptr);
      });

      ParamSet batch_grads = std::move(slots[0]);
      std::vector<double*> acc_view = param_view(batch_grads);
      for (std::size_t s = 1; s < batch; ++s) {
        std::vector<double*> slot_view = param_view(slots[s]);
        for (std::size_t i = 0; i < acc_view.size(); ++i) {
          *acc_view[i] += *slot_view[i];
        }
      }
      if (penalized) {
        for (std::size_t i = 0; i < batch_grads.head_w.size(); ++i) {
          batch_grads.head_w[i] +=
              2.0 * config.lambda * result.model.params.head_w[i];
        }
      }

      std::vector<double*> params = param_view(result.model.params);
      adam_step(params, flatten(batch_grads), adam_state, lr, config.adam);
    }

    const EvalStats tr = evaluate_split(result.model, train_images,
                                        train_targets, config.workers);
    const EvalStats va =
        evaluate_split(result.model, val_images, val_targets, config.workers);
    result.history.push_back({epoch, tr.mse, va.mse, tr.mae, va.mae, lr});
    lr = plateau_step(plateau_state, va.mse, lr, config.plateau);
  }
  return result;
}

std::string history_to_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_mse,val_mse,train_mae,val_mae,lr\n";
  for (const EpochStats& row : history) {
    out += std::to_string(row.epoch);
    out += ',';
    out += format_double(row.train_mse);
    out += ',';
    out += format_double(row.val_mse);
    out += ',';
    out += format_double(row.train_mae);
    out += ',';
    out += format_double(row.val_mae);
    out += ',';
    out += format_double(row.lr);
    out += '\n';
  }
  return out;
}

std::vector<double> predict(const Model& model,
                            const std::vector<GrayImage>& images,
                            int workers) {
  std::vector<double> preds(images.size());
  parallel_for(images.size(), workers, [&](std::size_t i) {
    preds[i] = forward(model, images[i], Mode::Infer, nullptr, nullptr);
  });
  return preds;
}

std::vector<double> extract_features(const Model& model,
                                     const GrayImage& image) {
  ForwardCache cache;
  forward(model, image, Mode::Infer, nullptr, &cache);
  return cache.dense_act;
}

Tensor feature_matrix(const Model& model, const std::vector<GrayImage>& images,
                      int workers, bool add_intercept) {
  if (images.empty()) {
    fail(ErrorKind::Config, "feature extraction needs at least one image");
  }
  const int d = model.spec.dense_width;
  const int p = add_intercept ? d + 1 : d;
  Tensor x({static_cast<int>(images.size()), p});
  parallel_for(images.size(), workers, [&](std::size_t i) {
    const std::vector<double> features = extract_features(model, images[i]);
    double* row = x.data.data() + i * static_cast<std::size_t>(p);
    std::copy(features.begin(), features.end(), row);
    if (add_intercept) {
      row[d] = 1.0;
    }
  });
  return x;
}

void fit_head_closed_form(Model& model, const std::vector<GrayImage>& images,
                          const std::vector<double>& targets, double lambda,
                          int workers) {
  if (images.size() != targets.size() || images.empty()) {
    fail(ErrorKind::Config, "head fit needs aligned nonempty images/targets");
  }
  RidgeProblem problem;
  problem.x = feature_matrix(model, images, workers, true);
  problem.y = targets;
  problem.lambda = lambda;
  const RidgeSolution solution = fit_closed_form(problem);
  const int d = model.spec.dense_width;
  model.params.head_w.assign(solution.beta.begin(), solution.beta.begin() + d);
  model.params.head_b = solution.beta[d];
}

}  // namespace boneage
