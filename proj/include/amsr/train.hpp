// Copyright 2026 The AMSR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// L1 + Adam training loop with the step-halving learning-rate schedule.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amsr/data.hpp"
#include "amsr/kv_config.hpp"
#include "amsr/model.hpp"

namespace amsr {

struct TrainConfig {
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch = 16;
  int patch = 192;  // HR patch side
  int iters_per_epoch = 1000;
  int epochs = 1000;
  int lr_half_every = 200;
  std::uint64_t seed = 1;
  int scale = 2;
  int checkpoint_every = 10;  // epochs; 0 keeps only last and best
  int log_every = 100;
  bool augment = true;

  void validate() const;
  /// Reads the training keys of a config file; missing keys keep defaults.
  static TrainConfig from_kv(const KvConfig& kv);
  std::string canonical_text() const;

  /// Rough size check used for the long-runtime warning.
  bool full_scale() const;
};

/// lr0 * 2^-floor(epoch / lr_half_every).
double lr_schedule(const TrainConfig& config, int epoch);

struct OptimState {
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
  std::int64_t t = 0;

  static OptimState zeros(const ModelParams<float>& params);
  bool operator==(const OptimState&) const = default;
};

using GradMap = std::map<std::string, std::vector<float>>;

/// One bias-corrected Adam update. Moments are kept in f32; the update
/// arithmetic runs in f64.
void adam_step(ModelParams<float>& params, const GradMap& grads, OptimState& state, double lr,
               const TrainConfig& config);

struct LossRecord {
  int epoch = 0;
  int iter = 0;  // 1-based within the epoch
  double lr = 0.0;
  double loss = 0.0;
};

/// "epoch,iter,lr,loss" with round-trip precision.
std::string format_loss_line(const LossRecord& r);

/// Forward, L1 loss and gradients for one batch.
struct StepResult {
  double loss = 0.0;
  GradMap grads;
};
StepResult loss_and_grads(const ModelConfig& model_config, const ModelParams<float>& params, const Batch& batch);

struct TrainState {
  ModelParams<float> params;
  OptimState opt;
  int next_epoch = 0;
  double best_loss = std::numeric_limits<double>::infinity();
};

/// Training-state sidecar (Adam moments, step, next epoch, best loss) that
/// pairs with a checkpoint for resuming.
void save_train_state(const std::filesystem::path& path, const TrainState& state);
void load_train_state(const std::filesystem::path& path, TrainState& state);

struct TrainHooks {
  std::function<void(const LossRecord&)> on_log;
  /// Called after every optimizer step with the global step count.
  std::function<void(std::int64_t step, double loss)> on_step;
  std::function<void(int epoch, double mean_loss, const TrainState&)> on_epoch_end;
};

struct FitOptions {
  /// When set: loss.csv, checkpoints and the resume sidecar go here.
  std::optional<std::filesystem::path> out_dir;
  /// Stop after this many optimizer steps in total (0 = run all epochs).
  std::int64_t max_steps = 0;
};

struct FitResult {
  TrainState state;
  std::vector<LossRecord> log;
  std::vector<double> step_losses;
};

/// Runs epochs next_epoch .. epochs-1. Aborts with a NumericError carrying
/// the lr, step and recent losses if the loss goes non-finite.
FitResult fit(const ModelConfig& model_config, TrainState state, const BatchSampler& sampler,
              const TrainConfig& config, const TrainHooks& hooks = {}, const FitOptions& options = {});

}  // namespace amsr
