// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// gtan: synth | train | eval | predict | gradcheck

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "gtan/autodiff.hpp"
#include "gtan/commands.hpp"

namespace {

std::optional<std::filesystem::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian temporal detection head: data, training, evaluation"};
  app.require_subcommand(1);

  std::size_t workers = 1;
  std::string corrupt;
  app.add_option("--workers", workers, "parallel videos; results do not depend on it")
      ->check(CLI::PositiveNumber);
  // test hook: break one backward rule to exercise the gradient gate
  app.add_option("--corrupt-backward", corrupt)->group("");

  std::string spec_file, config_file, out_dir, resume, checkpoint, dataset, eval_config, features;
  bool overwrite = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("spec", spec_file, "generator spec JSON")->required();
  synth->add_option("out", out_dir, "output directory")->required();
  synth->add_flag("--overwrite", overwrite, "replace an existing corpus");

  auto* train = app.add_subcommand("train", "train a model, writing a run directory");
  train->add_option("config", config_file, "run config JSON")->required();
  train->add_option("out", out_dir, "run directory")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");

  auto* eval = app.add_subcommand("eval", "detect and score a corpus");
  eval->add_option("checkpoint", checkpoint)->required();
  eval->add_option("dataset", dataset, "corpus directory")->required();
  eval->add_option("out", out_dir, "report directory")->required();
  eval->add_option("--eval-config", eval_config, "metrics config JSON");

  auto* predict = app.add_subcommand("predict", "detections for one feature file on stdout");
  predict->add_option("checkpoint", checkpoint)->required();
  predict->add_option("features", features, "raw float32 feature file")->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the full pipeline");
  grad->add_option("config", config_file, "gradcheck config JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!corrupt.empty()) gtan::ad::debug::corrupt_backward(corrupt);
    if (*synth) {
      gtan::cli::cmd_synth(spec_file, out_dir, overwrite);
    } else if (*train) {
      gtan::cli::TrainOptions options;
      options.out_dir = out_dir;
      options.workers = workers;
      options.resume = optional_path(resume);
      options.progress = &std::cerr;
      const auto outcome = gtan::cli::cmd_train(config_file, options);
      std::cout << outcome.final_checkpoint.string() << "\n";
    } else if (*eval) {
      const auto result = gtan::cli::cmd_eval(checkpoint, dataset, optional_path(eval_config),
                                              out_dir, workers);
      const auto& r = result.report;
      for (std::size_t i = 0; i < r.map.size(); ++i) {
        std::cout << "mAP@" << r.map_thresholds[i] << " " << r.map[i] << "\n";
      }
      std::cout << "AR " << r.average_recall << "  AUC " << r.auc << "\n";
    } else if (*predict) {
      std::cout << gtan::cli::cmd_predict(checkpoint, features);
    } else if (*grad) {
      const auto report = gtan::cli::cmd_gradcheck(optional_path(config_file), std::cout);
      if (!report.passed) return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "gtan: " << e.what() << "\n";
    return gtan::cli::exit_code_for(e);
  }
  return 0;
}
