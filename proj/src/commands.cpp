#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "annotations.hpp"
#include "augment.hpp"
#include "error.hpp"
#include "gradcam.hpp"
#include "image.hpp"
#include "io_util.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "ridge.hpp"
#include "rng.hpp"
#include "synth.hpp"
#include "train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace boneage {

namespace {

// ---- config plumbing -------------------------------------------------------

json parse_config_file(const fs::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse,
         "config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) {
    fail(ErrorKind::Config, "config " + path.string() + " must be an object");
  }
  return j;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return it.key() == k;
        }) == allowed.end()) {
      fail(ErrorKind::Config,
           "unknown key '" + it.key() + "' in " + where);
    }
  }
}

json require_key(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    fail(ErrorKind::Config, where + " is missing required key '" + key + "'");
  }
  return j.at(key);
}

std::uint64_t require_seed(const json& config) {
  const json s = require_key(config, "seed", "config");
  if (!s.is_number_unsigned()) {
    fail(ErrorKind::Config, "'seed' must be a non-negative integer");
  }
  return s.get<std::uint64_t>();
}

std::pair<double, double> range_from(const json& j, const char* key,
                                     std::pair<double, double> fallback,
                                     const std::string& where) {
  if (!j.contains(key)) {
    return fallback;
  }
  const json r = j.at(key);
  if (!r.is_array() || r.size() != 2) {
    fail(ErrorKind::Config,
         where + "." + key + " must be a [lo, hi] pair");
  }
  return {r.at(0).get<double>(), r.at(1).get<double>()};
}

AugmentSpec augment_from_json(const json& j) {
  check_keys(j, {"flip_h", "flip_v", "max_shift", "max_rotate", "zoom",
                 "brightness"},
             "train.augment");
  AugmentSpec spec;
  spec.flip_h = j.value("flip_h", spec.flip_h);
  spec.flip_v = j.value("flip_v", spec.flip_v);
  spec.max_shift = j.value("max_shift", spec.max_shift);
  spec.max_rotate = j.value("max_rotate", spec.max_rotate);
  spec.zoom_range = range_from(j, "zoom", spec.zoom_range, "train.augment");
  spec.brightness_range =
      range_from(j, "brightness", spec.brightness_range, "train.augment");
  validate(spec);
  return spec;
}

TrainConfig train_config_from_json(const json& j, std::uint64_t seed) {
  check_keys(j, {"epochs", "batch_size", "lr", "adam", "plateau", "lambda",
                 "augment", "workers"},
             "train section");
  TrainConfig config;
  config.epochs = j.value("epochs", config.epochs);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.lr = j.value("lr", config.lr);
  config.lambda = j.value("lambda", config.lambda);
  config.workers = j.value("workers", config.workers);
  config.seed = seed;
  if (j.contains("adam")) {
    const json a = j.at("adam");
    check_keys(a, {"beta1", "beta2", "eps"}, "train.adam");
    config.adam.beta1 = a.value("beta1", config.adam.beta1);
    config.adam.beta2 = a.value("beta2", config.adam.beta2);
    config.adam.eps = a.value("eps", config.adam.eps);
  }
  if (j.contains("plateau")) {
    const json p = j.at("plateau");
    check_keys(p, {"factor", "patience", "min_delta"}, "train.plateau");
    config.plateau.factor = p.value("factor", config.plateau.factor);
    config.plateau.patience = p.value("patience", config.plateau.patience);
    config.plateau.min_delta = p.value("min_delta", config.plateau.min_delta);
  }
  if (j.contains("augment")) {
    config.augment = augment_from_json(j.at("augment"));
  }
  validate(config);
  return config;
}

// ---- dataset directory I/O -------------------------------------------------

struct LoadedDataset {
  Dataset meta;
  std::vector<GrayImage> images;  // aligned with meta.images
};

LoadedDataset load_dataset_dir(const fs::path& dir) {
  LoadedDataset loaded;
  loaded.meta = parse_coco(read_file(dir / "coco.json"));
  const fs::path sidecar = dir / "labels.csv";
  if (fs::exists(sidecar)) {
    apply_sidecar(loaded.meta, read_file(sidecar));
  }
  loaded.images.reserve(loaded.meta.images.size());
  for (const ImageRecord& record : loaded.meta.images) {
    loaded.images.push_back(decode_pgm(read_file(dir / record.file_name)));
  }
  return loaded;
}

/// Bilinear-fit every image to the model's input frame.
void fit_to_model(std::vector<GrayImage>& images, const ModelSpec& spec) {
  for (GrayImage& image : images) {
    if (image.width != spec.input_w || image.height != spec.input_h) {
      image = resize(image, spec.input_w, spec.input_h, ResizeMode::Bilinear);
    }
  }
}

std::vector<double> require_targets(const Dataset& meta) {
  std::vector<double> targets;
  targets.reserve(meta.images.size());
  for (const ImageRecord& record : meta.images) {
    if (!record.target_age) {
      fail(ErrorKind::Domain,
           record.file_name +
               " has no age label (labels.csv row missing or incomplete)");
    }
    targets.push_back(*record.target_age);
  }
  return targets;
}

std::string stem_of(const std::string& file_name) {
  const std::size_t dot = file_name.rfind('.');
  return dot == std::string::npos ? file_name : file_name.substr(0, dot);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    fail(ErrorKind::Io,
         "could not create directory " + dir.string() + ": " + ec.message());
  }
}

// ---- subcommands -----------------------------------------------------------

void cmd_gen_data(const json& config) {
  check_keys(config, {"out_dir", "seed", "synth"}, "gen-data config");
  const fs::path out_dir =
      require_key(config, "out_dir", "gen-data config").get<std::string>();
  SynthSpec spec;
  spec.seed = require_seed(config);
  const json s = require_key(config, "synth", "gen-data config");
  check_keys(s, {"count", "image_size", "k_min", "k_max", "age_a", "age_b",
                 "noise_sd"},
             "synth section");
  spec.count = s.value("count", spec.count);
  spec.image_size = s.value("image_size", spec.image_size);
  spec.k_min = s.value("k_min", spec.k_min);
  spec.k_max = s.value("k_max", spec.k_max);
  spec.age_a = s.value("age_a", spec.age_a);
  spec.age_b = s.value("age_b", spec.age_b);
  spec.noise_sd = s.value("noise_sd", spec.noise_sd);

  const SynthResult result = generate(spec);
  ensure_dir(out_dir);
  for (std::size_t i = 0; i < result.images.size(); ++i) {
    write_file_atomic(out_dir / result.dataset.images[i].file_name,
                      encode_pgm(result.images[i]));
  }
  write_file_atomic(out_dir / "coco.json", to_coco(result.dataset));
  write_file_atomic(out_dir / "labels.csv", to_sidecar(result.dataset));
  std::cout << "wrote " << result.images.size() << " images to "
            << out_dir.string() << "\n";
}

void cmd_segment(const json& config) {
  check_keys(config, {"dataset_dir", "out_dir", "background", "seed"},
             "segment config");
  const fs::path dataset_dir =
      require_key(config, "dataset_dir", "segment config").get<std::string>();
  const fs::path out_dir =
      require_key(config, "out_dir", "segment config").get<std::string>();
  const double background = config.value("background", 0.0);
  require_seed(config);

  const LoadedDataset loaded = load_dataset_dir(dataset_dir);
  std::map<std::int64_t, std::vector<const Annotation*>> by_image;
  for (const Annotation& annotation : loaded.meta.annotations) {
    by_image[annotation.image_id].push_back(&annotation);
  }

  ensure_dir(out_dir);
  for (std::size_t i = 0; i < loaded.meta.images.size(); ++i) {
    const ImageRecord& record = loaded.meta.images[i];
    const Mask mask = rasterize_union(by_image[record.id], record.width,
                                      record.height);
    const GrayImage masked = apply_mask(loaded.images[i], mask, background);
    write_file_atomic(out_dir / record.file_name, encode_pgm(masked));
    write_file_atomic(out_dir / (stem_of(record.file_name) + ".mask.pgm"),
                      encode_pgm(mask));
  }
  write_file_atomic(out_dir / "coco.json", to_coco(loaded.meta));
  write_file_atomic(out_dir / "labels.csv", to_sidecar(loaded.meta));
  std::cout << "segmented " << loaded.meta.images.size() << " images into "
            << out_dir.string() << "\n";
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

Split split_dataset(std::size_t n, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    fail(ErrorKind::Config, "val_fraction must lie strictly in (0,1)");
  }
  if (n < 2) {
    fail(ErrorKind::Config, "need at least 2 samples to split");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  Rng rng(derive_seed(seed, {kStreamSplit}));
  shuffle(order, rng);
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  Split split;
  split.val.assign(order.begin(), order.begin() + n_val);
  split.train.assign(order.begin() + n_val, order.end());
  return split;
}

void cmd_train(const json& config, int workers_override) {
  check_keys(config,
             {"dataset_dir", "out_dir", "model", "train", "ridge_mode",
              "val_fraction", "seed"},
             "train config");
  const fs::path dataset_dir =
      require_key(config, "dataset_dir", "train config").get<std::string>();
  const fs::path out_dir =
      require_key(config, "out_dir", "train config").get<std::string>();
  const std::uint64_t seed = require_seed(config);
  const ModelSpec spec =
      spec_from_json(require_key(config, "model", "train config").dump());
  validate(spec);
  TrainConfig train_config = train_config_from_json(
      config.contains("train") ? config.at("train") : json::object(), seed);
  if (workers_override > 0) {
    train_config.workers = workers_override;
  }
  const std::string ridge_mode = config.value("ridge_mode", "end_to_end");
  if (ridge_mode != "end_to_end" && ridge_mode != "two_stage") {
    fail(ErrorKind::Config,
         "ridge_mode must be end_to_end or two_stage, got '" + ridge_mode +
             "'");
  }
  if (ridge_mode == "two_stage" && spec.head != HeadKind::RidgeLayer) {
    fail(ErrorKind::Config, "two_stage fitting needs the ridge_layer head");
  }
  const double val_fraction = config.value("val_fraction", 0.2);

  LoadedDataset loaded = load_dataset_dir(dataset_dir);
  const std::vector<double> targets = require_targets(loaded.meta);
  fit_to_model(loaded.images, spec);

  const Split split = split_dataset(loaded.images.size(), val_fraction, seed);
  auto gather_images = [&](const std::vector<std::size_t>& idx) {
    std::vector<GrayImage> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
      out.push_back(loaded.images[i]);
    }
    return out;
  };
  auto gather_targets = [&](const std::vector<std::size_t>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
      out.push_back(targets[i]);
    }
    return out;
  };
  const std::vector<GrayImage> train_images = gather_images(split.train);
  const std::vector<double> train_targets = gather_targets(split.train);
  const std::vector<GrayImage> val_images = gather_images(split.val);
  const std::vector<double> val_targets = gather_targets(split.val);

  TrainConfig effective = train_config;
  if (ridge_mode == "two_stage") {
    effective.lambda = 0.0;  // penalty enters through the closed-form refit
  }
  TrainResult result = train(init_model(spec, seed), train_images,
                             train_targets, val_images, val_targets, effective);
  if (ridge_mode == "two_stage") {
    fit_head_closed_form(result.model, train_images, train_targets,
                         train_config.lambda, train_config.workers);
  }

  ensure_dir(out_dir);
  write_file_atomic(out_dir / "checkpoint.rgn", save_model(result.model));
  write_file_atomic(out_dir / "history.csv", history_to_csv(result.history));
  const double final_val_mae =
      result.history.empty() ? result.initial.val_mae
                             : result.history.back().val_mae;
  std::cout << "trained " << train_config.epochs << " epochs (" << ridge_mode
            << "); final val MAE " << format_double(final_val_mae) << "\n";
}

void cmd_cv_lambda(const json& config, int workers_override) {
  check_keys(config,
             {"out_dir", "seed", "folds", "grid", "features_csv", "checkpoint",
              "dataset_dir", "workers"},
             "cv-lambda config");
  const fs::path out_dir =
      require_key(config, "out_dir", "cv-lambda config").get<std::string>();
  const std::uint64_t seed = require_seed(config);
  const int folds = config.value("folds", 5);
  const json grid_json = require_key(config, "grid", "cv-lambda config");
  if (!grid_json.is_array() || grid_json.empty()) {
    fail(ErrorKind::Config, "'grid' must be a nonempty array of lambdas");
  }
  std::vector<double> grid;
  for (const json& g : grid_json) {
    grid.push_back(g.get<double>());
  }
  int workers = config.value("workers", 1);
  if (workers_override > 0) {
    workers = workers_override;
  }

  // Feature source: a ready-made CSV, or a checkpoint applied to a dataset.
  Tensor features;
  std::vector<double> targets;
  std::string extracted_csv;
  if (config.contains("features_csv")) {
    if (config.contains("checkpoint") || config.contains("dataset_dir")) {
      fail(ErrorKind::Config,
           "give either features_csv or checkpoint+dataset_dir, not both");
    }
    features_from_csv(
        read_file(fs::path(config.at("features_csv").get<std::string>())),
        features, targets);
  } else {
    const fs::path checkpoint =
        require_key(config, "checkpoint", "cv-lambda config")
            .get<std::string>();
    const fs::path dataset_dir =
        require_key(config, "dataset_dir", "cv-lambda config")
            .get<std::string>();
    const Model model = load_model(read_file(checkpoint));
    LoadedDataset loaded = load_dataset_dir(dataset_dir);
    targets = require_targets(loaded.meta);
    fit_to_model(loaded.images, model.spec);
    features = feature_matrix(model, loaded.images, workers, false);
    extracted_csv = features_to_csv(features, targets);
  }

  // The fitted head always carries an intercept, so the CV design gets the
  // same trailing column of ones.
  const int n = features.shape[0], p = features.shape[1];
  Tensor design({n, p + 1});
  for (int i = 0; i < n; ++i) {
    std::copy_n(features.data.data() + static_cast<std::size_t>(i) * p, p,
                design.data.data() + static_cast<std::size_t>(i) * (p + 1));
    design.data[static_cast<std::size_t>(i) * (p + 1) + p] = 1.0;
  }

  const CvResult result =
      cross_validate_lambda(design, targets, grid, folds, seed);

  ensure_dir(out_dir);
  json report;
  report["best_lambda"] = result.best_lambda;
  report["folds"] = folds;
  report["grid"] = grid;
  report["mean_mse"] = result.mean_mse;
  write_file_atomic(out_dir / "cv_lambda.json", report.dump(2) + "\n");
  std::string csv = "lambda,mean_mse\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv += format_double(grid[i]);
    csv += ',';
    csv += format_double(result.mean_mse[i]);
    csv += '\n';
  }
  write_file_atomic(out_dir / "cv_lambda.csv", csv);
  if (!extracted_csv.empty()) {
    write_file_atomic(out_dir / "features.csv", extracted_csv);
  }
  std::cout << "best lambda " << format_double(result.best_lambda) << " over "
            << folds << " folds\n";
}

void cmd_evaluate(const json& config, int workers_override) {
  check_keys(config,
             {"checkpoint", "dataset_dir", "out_dir", "seed", "workers"},
             "evaluate config");
  const fs::path checkpoint =
      require_key(config, "checkpoint", "evaluate config").get<std::string>();
  const fs::path dataset_dir =
      require_key(config, "dataset_dir", "evaluate config").get<std::string>();
  const fs::path out_dir =
      require_key(config, "out_dir", "evaluate config").get<std::string>();
  require_seed(config);
  int workers = config.value("workers", 1);
  if (workers_override > 0) {
    workers = workers_override;
  }

  const Model model = load_model(read_file(checkpoint));
  LoadedDataset loaded = load_dataset_dir(dataset_dir);
  const std::vector<double> targets = require_targets(loaded.meta);
  fit_to_model(loaded.images, model.spec);

  const std::vector<double> preds = predict(model, loaded.images, workers);
  std::vector<Cohort> cohorts;
  cohorts.reserve(loaded.meta.images.size());
  for (const ImageRecord& record : loaded.meta.images) {
    cohorts.push_back(record.cohort);
  }

  const MetricsReport report = compute_metrics(targets, preds, cohorts);
  ensure_dir(out_dir);
  write_file_atomic(out_dir / "metrics.json", report_to_json(report));
  write_file_atomic(out_dir / "metrics.txt", report_to_text(report));
  write_file_atomic(out_dir / "scatter.csv",
                    scatter_csv(targets, preds, cohorts));
  char line[160];
  std::snprintf(line, sizeof(line),
                "evaluated %d predictions: mae %.6f rmse %.6f\n",
                report.overall.n, report.overall.mae, report.overall.rmse);
  std::cout << line;
}

void cmd_explain(const json& config, int workers_override) {
  check_keys(config,
             {"checkpoint", "dataset_dir", "out_dir", "seed", "images",
              "layer", "samples", "noise_sd", "workers"},
             "explain config");
  const fs::path checkpoint =
      require_key(config, "checkpoint", "explain config").get<std::string>();
  const fs::path dataset_dir =
      require_key(config, "dataset_dir", "explain config").get<std::string>();
  const fs::path out_dir =
      require_key(config, "out_dir", "explain config").get<std::string>();
  const std::uint64_t seed = require_seed(config);
  const int samples = config.value("samples", 1);
  const double noise_sd = config.value("noise_sd", 0.0);
  (void)workers_override;  // per-image maps are cheap; kept serial

  const Model model = load_model(read_file(checkpoint));
  int layer = config.value("layer", -1);
  if (layer < 0) {
    layer = conv_layer_count(model.spec) - 1;
  }

  LoadedDataset loaded = load_dataset_dir(dataset_dir);
  fit_to_model(loaded.images, model.spec);

  std::vector<std::size_t> selected;
  if (config.contains("images")) {
    const json names = config.at("images");
    if (!names.is_array() || names.empty()) {
      fail(ErrorKind::Config, "'images' must be a nonempty array of names");
    }
    for (const json& jn : names) {
      const std::string name = jn.get<std::string>();
      bool found = false;
      for (std::size_t i = 0; i < loaded.meta.images.size(); ++i) {
        if (loaded.meta.images[i].file_name == name) {
          selected.push_back(i);
          found = true;
          break;
        }
      }
      if (!found) {
        fail(ErrorKind::Referential,
             "'" + name + "' is not in the dataset");
      }
    }
  } else {
    for (std::size_t i = 0; i < loaded.meta.images.size(); ++i) {
      selected.push_back(i);
    }
  }

  const bool smoothed = samples > 1 || noise_sd > 0.0;
  const char* method = smoothed ? "grad-cam-smooth" : "grad-cam";
  ensure_dir(out_dir);
  for (std::size_t i : selected) {
    const GrayImage& image = loaded.images[i];
    const std::uint64_t image_seed =
        derive_seed(seed, {kStreamImage, static_cast<std::uint64_t>(i)});
    const Heatmap map =
        smooth_grad_cam(model, image, layer, samples, noise_sd, image_seed);
    const HeatmapExport exported = export_heatmap(map, image);
    const std::string stem = stem_of(loaded.meta.images[i].file_name);
    write_file_atomic(out_dir / (stem + "_cam.pgm"), exported.map_pgm);
    write_file_atomic(out_dir / (stem + "_overlay.pgm"), exported.overlay_pgm);
    std::cout << stem << ": " << method << " over conv layer " << layer
              << "\n";
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"bone-age regression pipeline"};
  app.name(argc >= 1 ? std::filesystem::path(argv[0]).filename().string()
                     : "boneage");
  app.require_subcommand(1);

  struct SubcommandSpec {
    const char* name;
    const char* description;
  };
  static const SubcommandSpec kCommands[] = {
      {"gen-data", "synthesize a labeled blob dataset"},
      {"segment", "rasterize polygon masks and remove background"},
      {"train", "fit the regression network and write a checkpoint"},
      {"cv-lambda", "cross-validate the ridge penalty"},
      {"evaluate", "compute MAE/RMSE/RMSPE and scatter data"},
      {"explain", "write grad-cam[-smooth] heatmaps"},
  };
  std::map<std::string, std::string> config_paths;
  int workers_override = 0;
  for (const SubcommandSpec& command : kCommands) {
    CLI::App* sub = app.add_subcommand(command.name, command.description);
    sub->add_option("--config", config_paths[command.name],
                    "path to the command's JSON config")
        ->required();
    sub->add_option("--workers", workers_override,
                    "override the config's worker count")
        ->check(CLI::PositiveNumber);
  }

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) {
    args.emplace_back(argv[i]);
  }
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const json config = parse_config_file(config_paths[name]);
    if (name == "gen-data") {
      cmd_gen_data(config);
    } else if (name == "segment") {
      cmd_segment(config);
    } else if (name == "train") {
      cmd_train(config, workers_override);
    } else if (name == "cv-lambda") {
      cmd_cv_lambda(config, workers_override);
    } else if (name == "evaluate") {
      cmd_evaluate(config, workers_override);
    } else {
      cmd_explain(config, workers_override);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << error_kind_name(e.kind()) << ": " << e.what()
              << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace boneage
