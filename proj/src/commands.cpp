// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/commands.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "gtan/errors.hpp"
#include "gtan/parallel.hpp"

namespace gtan::cli {

namespace {

using json = config::json;

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("short write to " + file.string());
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr const char* kLossHeader = "iter,loss,loss_cls,loss_loc,loss_ov,lr,num_fg,num_bg";

std::string loss_row(const training::IterationLog& log) {
  char line[320];
  std::snprintf(line, sizeof(line), "%" PRIu64 ",%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%zu\n",
                log.iteration, log.loss, log.loss_cls, log.loss_loc, log.loss_ov,
                log.learning_rate, log.num_fg, log.num_bg);
  return line;
}

// Existing log rows up to and including `last_step`, header first.
std::string kept_log(const fs::path& file, std::uint64_t last_step) {
  std::string out = std::string(kLossHeader) + "\n";
  if (!fs::exists(file)) return out;
  std::istringstream in(read_text(file));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::uint64_t iter = std::stoull(line.substr(0, line.find(',')));
    if (iter <= last_step) out += line + "\n";
  }
  return out;
}

config::RunConfig run_config_of(const checkpoint::Checkpoint& cp) {
  if (cp.run_config.is_null()) return {};
  return config::run_config_from_json(cp.run_config);
}

void check_dataset_fits(const network::NetworkConfig& net, const data::Dataset& dataset) {
  if (dataset.num_classes != net.num_classes) {
    throw ValidationError("corpus has " + std::to_string(dataset.num_classes) +
                          " classes, the checkpoint expects " + std::to_string(net.num_classes));
  }
  for (const auto& v : dataset.videos) {
    if (v.dim != net.input_dim) {
      throw ValidationError("video " + v.id + " has dimension " + std::to_string(v.dim) +
                            ", the checkpoint expects " + std::to_string(net.input_dim));
    }
  }
}

}  // namespace

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const IoError*>(&error)) return 4;
  if (dynamic_cast<const NumericError*>(&error)) return 3;
  if (dynamic_cast<const ValidationError*>(&error) || dynamic_cast<const DimensionError*>(&error) ||
      dynamic_cast<const GeometryError*>(&error)) {
    return 2;
  }
  return 1;
}

void cmd_synth(const fs::path& spec_file, const fs::path& out_dir, bool overwrite) {
  const auto spec = config::synthetic_spec_from_json(config::read_json_file(spec_file));
  data::save_dataset(data::generate_synthetic(spec), out_dir, overwrite);
}

TrainOutcome train_run(const config::RunConfig& config, const TrainOptions& options,
                       const data::Dataset* dataset) {
  config.validate();
  data::Dataset loaded;
  if (dataset == nullptr) {
    if (config.data.train.empty()) throw ValidationError("config data.train is not set");
    loaded = data::load_dataset(config.data.train);
    dataset = &loaded;
  }
  const auto net_config = config::effective_network(config, *dataset);
  const network::Network net(net_config);

  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw IoError("cannot create " + options.out_dir.string());

  config::RunConfig effective = config;
  effective.network = net_config;
  write_text(options.out_dir / "effective_config.json", config::to_json(effective).dump(2) + "\n");

  training::TrainConfig tc = config.training;
  tc.seed = config::train_seed(config);
  tc.workers = options.workers;
  tc.loss.alpha1 = net_config.alpha1;
  tc.loss.alpha2 = net_config.alpha2;

  network::ParameterStore params;
  training::OptimizerState optimizer;
  training::TrainProgress progress;
  if (options.resume) {
    auto cp = checkpoint::load(*options.resume);
    if (checkpoint::network_digest(cp.network) != checkpoint::network_digest(net_config)) {
      throw ValidationError("checkpoint " + options.resume->string() +
                            " was trained with a different network configuration");
    }
    if (!cp.training) throw ValidationError("checkpoint carries no training state to resume");
    params = std::move(cp.params);
    optimizer = std::move(cp.training->optimizer);
    optimizer.config = tc.sgd;
    progress = cp.training->progress;
  } else {
    params = net.init_parameters(config::init_seed(config));
    optimizer = training::OptimizerState::create(params, tc.sgd);
  }

  const fs::path log_file = options.out_dir / "loss.csv";
  std::string log = options.resume ? kept_log(log_file, optimizer.step)
                                   : std::string(kLossHeader) + "\n";
  write_text(log_file, log);
  std::ofstream log_out(log_file, std::ios::binary | std::ios::app);
  if (!log_out) throw IoError("cannot append to " + log_file.string());

  training::Trainer trainer(net, params, tc, std::move(optimizer), progress);
  TrainOutcome outcome;
  std::vector<std::string> saved;
  const fs::path ckpt_dir = options.out_dir / "checkpoints";
  auto snapshot = [&](const fs::path& file) {
    checkpoint::Checkpoint cp;
    cp.network = net_config;
    cp.run_config = config::to_json(effective);
    cp.params = params.clone();
    cp.training = checkpoint::TrainingState{trainer.optimizer(), trainer.progress()};
    checkpoint::save(file, cp);
  };

  while (trainer.progress().epoch < config.epochs) {
    const auto t0 = std::chrono::steady_clock::now();
    trainer.run_epoch(*dataset, [&](const training::IterationLog& row) {
      log_out << loss_row(row);
      outcome.last_loss = row.loss;
    });
    log_out.flush();
    if (!log_out) throw IoError("short write to " + log_file.string());
    const std::uint64_t epoch = trainer.progress().epoch;
    if (config.checkpoint_every != 0 && epoch % config.checkpoint_every == 0) {
      fs::create_directories(ckpt_dir, ec);
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04" PRIu64 ".gtan", epoch);
      snapshot(ckpt_dir / name);
      saved.push_back(std::string("checkpoints/") + name);
    }
    if (options.progress != nullptr) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char line[160];
      std::snprintf(line, sizeof(line), "epoch %" PRIu64 "/%" PRIu64 "  step %" PRIu64
                    "  loss %.5f  (%.1fs)\n", epoch, config.epochs, trainer.optimizer().step,
                    outcome.last_loss, secs);
      *options.progress << line << std::flush;
    }
  }
  outcome.final_checkpoint = options.out_dir / "final.gtan";
  snapshot(outcome.final_checkpoint);
  outcome.steps = trainer.optimizer().step;
  outcome.skipped_steps = trainer.progress().skipped_steps;

  json manifest = {{"effective_config", "effective_config.json"},
                   {"loss_log", "loss.csv"},
                   {"final_checkpoint", "final.gtan"},
                   {"checkpoints", saved},
                   {"epochs_completed", trainer.progress().epoch},
                   {"steps", outcome.steps},
                   {"skipped_steps", outcome.skipped_steps}};
  write_text(options.out_dir / "manifest.json", manifest.dump(2) + "\n");
  return outcome;
}

TrainOutcome cmd_train(const fs::path& config_file, const TrainOptions& options) {
  return train_run(config::load_run_config(config_file), options);
}

Evaluation evaluate_checkpoint(const checkpoint::Checkpoint& cp, const data::Dataset& dataset,
                               const inference::InferenceConfig& inference,
                               const metrics::EvalConfig& eval, std::size_t workers) {
  check_dataset_fits(cp.network, dataset);
  const network::Network net(cp.network);
  std::vector<std::vector<inference::Detection>> per_video(dataset.videos.size());
  parallel_for(workers, dataset.videos.size(), [&](std::size_t i, std::size_t) {
    per_video[i] = inference::predict(net, cp.params, dataset.videos[i], inference);
  });
  Evaluation result;
  for (std::size_t i = 0; i < per_video.size(); ++i) {
    result.detections[dataset.videos[i].id] = std::move(per_video[i]);
  }
  result.report = metrics::evaluate(result.detections, metrics::ground_truth_of(dataset),
                                    cp.network.num_classes, eval);
  return result;
}

Evaluation cmd_eval(const fs::path& checkpoint_file, const fs::path& dataset_dir,
                    const std::optional<fs::path>& eval_config, const fs::path& out_dir,
                    std::size_t workers) {
  const auto cp = checkpoint::load(checkpoint_file);
  const auto run = run_config_of(cp);
  const auto eval = eval_config ? config::eval_config_from_json(config::read_json_file(*eval_config))
                                : run.eval;
  const auto dataset = data::load_dataset(dataset_dir);
  auto result = evaluate_checkpoint(cp, dataset, run.inference, eval, workers);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());
  write_text(out_dir / "detections.json", inference::detections_to_json(result.detections));
  write_text(out_dir / "report.json", metrics::report_to_json(result.report));
  write_text(out_dir / "curves.csv", metrics::curves_to_csv(result.report));
  return result;
}

std::string cmd_predict(const fs::path& checkpoint_file, const fs::path& features_file) {
  const auto cp = checkpoint::load(checkpoint_file);
  const auto run = run_config_of(cp);
  const auto video = data::load_feature_file(features_file, cp.network.input_dim);
  const network::Network net(cp.network);
  inference::DetectionMap out;
  out[video.id] = inference::predict(net, cp.params, video, run.inference);
  return inference::detections_to_json(out);
}

gradcheck::GradcheckConfig gradcheck_config_from_json(const json& j) {
  gradcheck::GradcheckConfig c;
  if (!j.is_object()) throw ValidationError("gradcheck config must be a JSON object");
  static const std::set<std::string> known = {
      "length", "dim", "num_classes", "anchor_layers", "base_channels", "anchor_channels",
      "seed", "step", "tolerance", "coords_per_tensor", "spread_cells"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ValidationError("unknown key 'gradcheck." + k + "'");
  }
  try {
    c.length = j.value("length", c.length);
    c.dim = j.value("dim", c.dim);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.anchor_layers = j.value("anchor_layers", c.anchor_layers);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.anchor_channels = j.value("anchor_channels", c.anchor_channels);
    c.seed = j.value("seed", c.seed);
    c.step = j.value("step", c.step);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.coords_per_tensor = j.value("coords_per_tensor", c.coords_per_tensor);
    c.spread_cells = j.value("spread_cells", c.spread_cells);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad gradcheck config: ") + e.what());
  }
  return c;
}

gradcheck::GradcheckReport cmd_gradcheck(const std::optional<fs::path>& config_file,
                                         std::ostream& out) {
  const auto cfg = config_file ? gradcheck_config_from_json(config::read_json_file(*config_file))
                               : gradcheck::GradcheckConfig{};
  const auto report = gradcheck::run(cfg);
  char line[200];
  for (const auto& g : report.groups) {
    std::snprintf(line, sizeof(line), "%-38s checked %4zu  skipped %3zu  max_rel_error %.3e  %s\n",
                  g.name.c_str(), g.checked, g.skipped, g.max_error,
                  g.checked > 0 && g.max_error < cfg.tolerance ? "ok" : "FAIL");
    out << line;
  }
  std::snprintf(line, sizeof(line),
                "mixed kernels %zu, foreground %zu, background %zu\nmax relative error %.3e "
                "(gate %.0e): %s\n",
                report.mixed_kernels, report.num_fg, report.num_bg, report.max_error,
                cfg.tolerance, report.passed ? "PASS" : "FAIL");
  out << line;
  return report;
}

}  // namespace gtan::cli
