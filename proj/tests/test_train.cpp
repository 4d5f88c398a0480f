#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "model.hpp"
#include "ridge.hpp"
#include "rng.hpp"
#include "synth.hpp"
#include "train.hpp"

using namespace boneage;

namespace {

ModelSpec tiny_spec(int extent) {
  ModelSpec spec;
  spec.input_h = extent;
  spec.input_w = extent;
  spec.input_c = 1;
  spec.blocks = {{4, 1, 1, true}, {8, 1, 2, false}};
  spec.dense_width = 8;
  spec.dropout_rate = 0.1;
  spec.head = HeadKind::RidgeLayer;
  return spec;
}

struct Split {
  std::vector<GrayImage> train_images, val_images;
  std::vector<double> train_targets, val_targets;
};

// Blob-count images whose target is a small affine function of the count,
// so a few epochs are enough to see the loss move.
Split blob_split(int train_n, int val_n, int extent, std::uint64_t seed) {
  SynthSpec spec;
  spec.count = train_n + val_n;
  spec.image_size = extent;
  spec.k_min = 1;
  spec.k_max = 2;
  spec.age_a = 2.0;
  spec.age_b = 1.0;
  spec.noise_sd = 0.01;
  spec.seed = seed;
  SynthResult synth = generate(spec);

  Split split;
  for (int i = 0; i < train_n + val_n; ++i) {
    const double target = *synth.dataset.images[i].target_age;
    if (i < train_n) {
      split.train_images.push_back(synth.images[i]);
      split.train_targets.push_back(target);
    } else {
      split.val_images.push_back(synth.images[i]);
      split.val_targets.push_back(target);
    }
  }
  return split;
}

TrainConfig quick_config(int epochs, double lr, std::uint64_t seed) {
  TrainConfig config;
  config.epochs = epochs;
  config.batch_size = 4;
  config.lr = lr;
  config.seed = seed;
  config.augment.flip_h = 0.5;
  config.augment.max_shift = 0.05;
  config.augment.brightness_range = {0.95, 1.05};
  return config;
}

bool same_params(Model& a, Model& b) {
  std::vector<double*> va = param_view(a.params);
  std::vector<double*> vb = param_view(b.params);
  if (va.size() != vb.size()) {
    return false;
  }
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (*va[i] != *vb[i]) {
      return false;
    }
  }
  return true;
}

bool same_history(const TrainResult& a, const TrainResult& b) {
  if (a.history.size() != b.history.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    const EpochStats &x = a.history[i], &y = b.history[i];
    if (x.epoch != y.epoch || x.train_mse != y.train_mse ||
        x.val_mse != y.val_mse || x.train_mae != y.train_mae ||
        x.val_mae != y.val_mae || x.lr != y.lr) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig good = quick_config(1, 0.0, 0);
  validate(good);  // lr = 0 is allowed

  auto expect_config_error = [](TrainConfig config) {
    try {
      validate(config);
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
    }
  };
  TrainConfig bad = good;
  bad.epochs = -1;  // 0 is allowed: measure the baseline, update nothing
  expect_config_error(bad);
  bad = good;
  bad.batch_size = 0;
  expect_config_error(bad);
  bad = good;
  bad.lr = -1e-3;
  expect_config_error(bad);
  bad = good;
  bad.lambda = -1.0;
  expect_config_error(bad);
  bad = good;
  bad.workers = 0;
  expect_config_error(bad);
  bad = good;
  bad.augment.flip_h = 1.5;
  expect_config_error(bad);
}

TEST_CASE("zero learning rate trains to exactly the initial weights") {
  Split split = blob_split(8, 4, 24, 801);
  Model initial = init_model(tiny_spec(24), 5);
  Model copy = initial;
  TrainResult result =
      train(std::move(copy), split.train_images, split.train_targets,
            split.val_images, split.val_targets, quick_config(3, 0.0, 21));
  CHECK(same_params(result.model, initial));
  CHECK(result.history.size() == 3);
  CHECK(result.initial.epoch == 0);
  // no updates: every epoch reports the untrained metrics
  for (const EpochStats& row : result.history) {
    CHECK(row.train_mse == result.initial.train_mse);
    CHECK(row.val_mse == result.initial.val_mse);
  }
}

TEST_CASE("the same seed reproduces training bit for bit") {
  Split split = blob_split(10, 4, 24, 802);
  TrainConfig config = quick_config(3, 0.01, 77);

  TrainResult a = train(init_model(tiny_spec(24), 6), split.train_images,
                        split.train_targets, split.val_images,
                        split.val_targets, config);
  TrainResult b = train(init_model(tiny_spec(24), 6), split.train_images,
                        split.train_targets, split.val_images,
                        split.val_targets, config);
  CHECK(same_history(a, b));
  CHECK(same_params(a.model, b.model));
  CHECK(save_model(a.model) == save_model(b.model));

  TrainConfig other = config;
  other.seed = 78;
  TrainResult c = train(init_model(tiny_spec(24), 6), split.train_images,
                        split.train_targets, split.val_images,
                        split.val_targets, other);
  CHECK_FALSE(same_history(a, c));
}

TEST_CASE("worker count never changes the result") {
  Split split = blob_split(10, 4, 24, 803);
  TrainConfig config = quick_config(2, 0.01, 33);

  config.workers = 1;
  TrainResult serial = train(init_model(tiny_spec(24), 7), split.train_images,
                             split.train_targets, split.val_images,
                             split.val_targets, config);
  config.workers = 3;
  TrainResult parallel =
      train(init_model(tiny_spec(24), 7), split.train_images,
            split.train_targets, split.val_images, split.val_targets, config);
  CHECK(same_history(serial, parallel));
  CHECK(save_model(serial.model) == save_model(parallel.model));

  CHECK(predict(serial.model, split.val_images, 1) ==
        predict(serial.model, split.val_images, 3));
}

TEST_CASE("a short run learns the blob-count rule") {
  Split split = blob_split(24, 8, 24, 804);
  TrainConfig config = quick_config(12, 0.02, 55);
  config.augment = AugmentSpec{};  // isolate optimization from augmentation
  TrainResult result =
      train(init_model(tiny_spec(24), 8), split.train_images,
            split.train_targets, split.val_images, split.val_targets, config);
  CHECK(result.history.back().train_mse < result.initial.train_mse);
  CHECK(result.history.back().train_mse < 0.5 * result.initial.train_mse);
}

TEST_CASE("the head penalty shrinks head weights and spares the bias") {
  Split split = blob_split(12, 4, 24, 805);
  TrainConfig free_config = quick_config(4, 0.02, 91);
  TrainConfig pinned_config = free_config;
  pinned_config.lambda = 1000.0;

  TrainResult free_run =
      train(init_model(tiny_spec(24), 9), split.train_images,
            split.train_targets, split.val_images, split.val_targets,
            free_config);
  TrainResult pinned_run =
      train(init_model(tiny_spec(24), 9), split.train_images,
            split.train_targets, split.val_images, split.val_targets,
            pinned_config);

  auto norm = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) {
      acc += x * x;
    }
    return std::sqrt(acc);
  };
  CHECK(norm(pinned_run.model.params.head_w) <
        norm(free_run.model.params.head_w));
  // both biases still moved off the shared start; the penalty is weights-only
  CHECK(pinned_run.model.params.head_b != 0.0);
}

TEST_CASE("training requires data and matching lengths") {
  Split split = blob_split(6, 2, 24, 806);
  TrainConfig config = quick_config(1, 0.01, 1);
  CHECK_THROWS_AS(train(init_model(tiny_spec(24), 10), {}, {},
                        split.val_images, split.val_targets, config),
                  Error);
  std::vector<double> short_targets(split.train_images.size() - 1, 1.0);
  CHECK_THROWS_AS(train(init_model(tiny_spec(24), 10), split.train_images,
                        short_targets, split.val_images, split.val_targets,
                        config),
                  Error);
}

TEST_CASE("history CSV layout") {
  Split split = blob_split(6, 2, 24, 807);
  TrainResult result =
      train(init_model(tiny_spec(24), 11), split.train_images,
            split.train_targets, split.val_images, split.val_targets,
            quick_config(3, 0.005, 13));
  std::string csv = history_to_csv(result.history);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "epoch,train_mse,val_mse,train_mae,val_mae,lr");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    const std::size_t comma = line.find(',');
    CHECK(std::atoi(line.substr(0, comma).c_str()) == rows);
    // six comma-separated cells per row
    int cells = 1;
    for (char ch : line) {
      cells += ch == ',' ? 1 : 0;
    }
    CHECK(cells == 6);
  }
  CHECK(rows == 3);

  // lr column reflects the rate the epoch used
  CHECK(result.history[0].lr == 0.005);
}

TEST_CASE("predict matches single-image forwards") {
  Split split = blob_split(5, 0, 24, 808);
  Model model = init_model(tiny_spec(24), 12);
  std::vector<double> batch = predict(model, split.train_images, 2);
  REQUIRE(batch.size() == split.train_images.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch[i] == forward(model, split.train_images[i], Mode::Infer,
                              nullptr, nullptr));
  }
}

TEST_CASE("extracted features are the post-ReLU dense activations") {
  Split split = blob_split(3, 0, 24, 809);
  ModelSpec spec = tiny_spec(24);
  spec.dropout_rate = 0.5;  // inference mode must ignore it
  Model model = init_model(spec, 13);
  for (const GrayImage& image : split.train_images) {
    ForwardCache cache;
    forward(model, image, Mode::Infer, nullptr, &cache);
    CHECK(extract_features(model, image) == cache.dense_act);
  }
}

TEST_CASE("feature matrix stacks rows and can append an intercept") {
  Split split = blob_split(4, 0, 24, 810);
  Model model = init_model(tiny_spec(24), 14);
  const int width = model.spec.dense_width;

  Tensor plain = feature_matrix(model, split.train_images, 2, false);
  REQUIRE(plain.shape == std::vector<int>{4, width});
  Tensor with_ones = feature_matrix(model, split.train_images, 2, true);
  REQUIRE(with_ones.shape == std::vector<int>{4, width + 1});

  for (int i = 0; i < 4; ++i) {
    std::vector<double> row = extract_features(model, split.train_images[i]);
    for (int j = 0; j < width; ++j) {
      CHECK(plain.data[static_cast<std::size_t>(i) * width + j] == row[j]);
      CHECK(with_ones.data[static_cast<std::size_t>(i) * (width + 1) + j] ==
            row[j]);
    }
    CHECK(with_ones.data[static_cast<std::size_t>(i) * (width + 1) + width] ==
          1.0);
  }
}

TEST_CASE("the closed-form head matches a direct ridge fit") {
  Split split = blob_split(12, 0, 24, 811);
  Model model = init_model(tiny_spec(24), 15);
  const double lambda = 0.5;

  RidgeProblem problem;
  problem.x = feature_matrix(model, split.train_images, 1, true);
  problem.y = split.train_targets;
  problem.lambda = lambda;
  RidgeSolution direct = fit_closed_form(problem);

  fit_head_closed_form(model, split.train_images, split.train_targets, lambda,
                       1);
  const int width = model.spec.dense_width;
  for (int j = 0; j < width; ++j) {
    CHECK(model.params.head_w[j] == direct.beta[j]);
  }
  CHECK(model.params.head_b == direct.beta[width]);

  // predictions flow through the fitted head
  std::vector<double> preds = predict(model, split.train_images, 1);
  for (int i = 0; i < 12; ++i) {
    double expected = direct.beta[width];
    for (int j = 0; j < width; ++j) {
      expected += problem.x.data[static_cast<std::size_t>(i) * (width + 1) +
                                 j] *
                  direct.beta[j];
    }
    CHECK(preds[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}
