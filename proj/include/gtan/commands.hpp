// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// The operations behind the `gtan` subcommands, callable from code.

#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "gtan/checkpoint.hpp"
#include "gtan/config.hpp"
#include "gtan/gradcheck.hpp"
#include "gtan/metrics.hpp"

namespace gtan::cli {

namespace fs = std::filesystem;

// 0 success, 2 validation, 3 numeric, 4 I/O, 1 anything else.
int exit_code_for(const std::exception& error);

void cmd_synth(const fs::path& spec_file, const fs::path& out_dir, bool overwrite);

struct TrainOptions {
  fs::path out_dir;
  std::size_t workers = 1;
  std::optional<fs::path> resume;  // checkpoint to continue from
  std::ostream* progress = nullptr;  // per-epoch status lines
};

struct TrainOutcome {
  fs::path final_checkpoint;
  std::uint64_t steps = 0;
  std::uint64_t skipped_steps = 0;
  double last_loss = 0.0;
};

// Trains on config.data.train (or `dataset` when given) and writes the run
// directory: effective_config.json, loss.csv, checkpoints and manifest.json.
TrainOutcome train_run(const config::RunConfig& config, const TrainOptions& options,
                       const data::Dataset* dataset = nullptr);
TrainOutcome cmd_train(const fs::path& config_file, const TrainOptions& options);

struct Evaluation {
  metrics::DetectionMap detections;
  metrics::EvalReport report;
};

Evaluation evaluate_checkpoint(const checkpoint::Checkpoint& cp, const data::Dataset& dataset,
                               const inference::InferenceConfig& inference,
                               const metrics::EvalConfig& eval, std::size_t workers = 1);

// Writes detections.json, report.json and curves.csv into out_dir. The
// inference and eval settings come from the checkpoint's run config unless
// an eval config file is given.
Evaluation cmd_eval(const fs::path& checkpoint_file, const fs::path& dataset_dir,
                    const std::optional<fs::path>& eval_config, const fs::path& out_dir,
                    std::size_t workers = 1);

// Detections JSON for one raw feature file.
std::string cmd_predict(const fs::path& checkpoint_file, const fs::path& features_file);

gradcheck::GradcheckConfig gradcheck_config_from_json(const config::json& j);

// Prints one line per parameter group and returns the report.
gradcheck::GradcheckReport cmd_gradcheck(const std::optional<fs::path>& config_file,
                                         std::ostream& out);

}  // namespace gtan::cli
