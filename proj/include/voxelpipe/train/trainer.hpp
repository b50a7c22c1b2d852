// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0
//
// The training loop: epochs of seeded-shuffled patch batches, gradient
// accumulation with window averaging, AdamW updates, plateau learning-rate
// decay, EMA shadows, early stopping, and timestamped checkpoints under the
// experiment workspace. Two runs with the same seed, config, and dataset
// produce identical scalar logs and bit-identical checkpoint payloads.

#pragma once

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "voxelpipe/config/registry.hpp"
#include "voxelpipe/config/schema.hpp"
#include "voxelpipe/model/unet.hpp"
#include "voxelpipe/tensor/tape.hpp"

namespace voxelpipe {

// ReduceLROnPlateau: once more than `patience` consecutive observations
// fail to improve (strictly below best - threshold), the rate is multiplied
// by `factor` and the run length resets; inactive before step nb_step
struct PlateauState {
  int64_t nb_step = 0;
  double factor = 0.1;
  int64_t patience = 10;
  double threshold = 1e-4;

  double lr = 1e-3;
  bool has_best = false;
  double best = 0.0;
  int64_t bad = 0;
};

// observes one monitored value and returns the rate now in effect
double plateau_step(PlateauState& st, double metric);

// improvement means metric < best - min_delta (mode min) or
// metric > best + min_delta (mode max); stop once the run of stale
// observations exceeds patience
struct EarlyStopState {
  int64_t patience = 10;
  double min_delta = 0.0;
  bool mode_min = true;

  bool has_best = false;
  double best = 0.0;
  int64_t stale = 0;
};

struct EarlyStopDecision {
  bool improved = false;
  bool stop = false;
};

EarlyStopDecision early_stopping_check(EarlyStopState& st, double metric);

// shadow <- decay * shadow + (1 - decay) * param per element; decay 0
// turns the feature off and callers keep raw parameters
void ema_update(std::vector<Tensor>& shadow,
                const std::vector<Parameter>& params, double decay);

// training metadata stored alongside the tensors; deliberately free of
// wall-clock values so same-seed runs stay bit-identical
struct CheckpointInfo {
  std::string train_name;
  int64_t epoch = 0;
  int64_t step = 0;
  double lr = 0.0;
  double monitored = 0.0;
};

// versioned container: magic, a JSON manifest (tensor names, dtypes,
// shapes, metadata), then raw little-endian payloads in manifest order
void write_checkpoint(const std::filesystem::path& file,
                      const std::vector<Parameter>& params,
                      const CheckpointInfo& info);

struct Checkpoint {
  std::vector<Parameter> params;
  CheckpointInfo info;
};

// CheckpointLoad on any structural problem
Checkpoint read_checkpoint(const std::filesystem::path& file);

// replaces model parameters by name; names, shapes, dtypes, and the
// parameter count must all match (CheckpointLoad otherwise)
void load_parameters(UNetModel& model, const std::vector<Parameter>& params);

// `<dir>/<YYYY_MM_DD_HH_MM_SS>.pt`, bumping whole seconds while the name
// is taken so an existing checkpoint is never overwritten
std::filesystem::path next_checkpoint_path(const std::filesystem::path& dir,
                                           std::time_t now);

// parameter gradients averaged over a gradient-accumulation window
class GradAccumulator {
 public:
  // reads tape.grad of every id; backward must have run on this tape
  void add(const Tape& tape, const std::vector<ValueId>& param_ids);
  // counts a window batch whose gradients are all zero (nothing trained)
  void add_zero(size_t n_params);
  int64_t batches() const { return count_; }
  // mean gradients as f32 tensors shaped like params; resets the window
  std::vector<Tensor> take(const std::vector<Parameter>& params);

 private:
  std::vector<std::vector<double>> sums_;
  int64_t count_ = 0;
};

struct TrainOptions {
  std::filesystem::path workspace_root = ".";
  std::optional<uint64_t> seed;  // overrides manual_seed
  bool verbose = false;
};

struct TrainResult {
  int64_t steps = 0;
  int64_t epochs_run = 0;
  int64_t validations = 0;
  bool early_stopped = false;
  double final_lr = 0.0;
  double best_monitored = 0.0;
  std::filesystem::path snapshot;
  std::vector<std::filesystem::path> checkpoints;  // files present at exit
};

// runs a validated training configuration against the workspace
TrainResult train(const ConfigDocument& cfg, const Registry& reg,
                  const TrainOptions& opts = {});

}  // namespace voxelpipe
