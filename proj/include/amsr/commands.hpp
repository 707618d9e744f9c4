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

// The operations behind each `amsr` subcommand. The CLI, the Python module
// and the acceptance runner all call these.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "amsr/data.hpp"
#include "amsr/gradcheck.hpp"
#include "amsr/report.hpp"
#include "amsr/train.hpp"

namespace amsr {

namespace fs = std::filesystem;

/// Worker count: AMSR_THREADS when set, otherwise the hardware concurrency.
int worker_threads();

struct DegradeResult {
  std::vector<fs::path> written;
  std::vector<std::string> failures;  // one message per unreadable entry
  fs::path manifest;                  // manifest over the written HR copies
};

/// Writes <out>/HR_x<s>/<stem>.png (modcropped) and <out>/LR_x<s>/<stem>_x<s>.png,
/// plus <out>/manifest_x<s>.txt that points at both.
DegradeResult cmd_degrade(const fs::path& manifest, int scale, const fs::path& out_dir);

struct EvalOptions {
  fs::path manifest;
  int scale = 2;
  std::string method = "bicubic";  // or "model"
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> save_dir;  // upscaled images, when set
  int threads = 0;                   // 0 = worker_threads()
};

MetricsReport cmd_eval(const EvalOptions& options);

/// Writes <stem>.json and the text table rendered from it to <stem>.txt.
void write_report(const fs::path& json_path, const MetricsReport& report);

/// Model upscaling of one image: mean-subtract, forward, re-add, round.
ImageU8 upscale_with_model(const Model<float>& model, const ImageU8& lr);

/// Everything a training config file describes.
struct TrainJob {
  ModelConfig model;
  TrainConfig train;
  fs::path train_manifest;
  fs::path out_dir;
  std::int64_t max_steps = 0;
  std::optional<fs::path> heldout_manifest;  // used by ablate
  std::string canonical_text() const;
};

/// Flat key=value file; relative paths resolve against the file's directory.
/// Model keys: channels n_amms n_am nl_reduction so_reduction sf_layers
/// enable_nonlocal enable_second_order enable_multiscale mean_rgb.
/// Data keys: train_manifest heldout_manifest out_dir max_steps.
/// Everything else is a TrainConfig field.
TrainJob load_train_job(const fs::path& config_path);
TrainJob parse_train_job(const std::string& text, const fs::path& base_dir);

/// Runs (or resumes from `resume`, a checkpoint with a .state sidecar) the
/// job. Progress lines go to `log` when non-null.
FitResult cmd_train(const TrainJob& job, const std::optional<fs::path>& resume = {}, std::ostream* log = nullptr);

void cmd_infer(const fs::path& checkpoint, const fs::path& in, const fs::path& out);

/// Trains the four branch-flag variants from the same seed and data stream
/// and evaluates each on the held-out manifest. Writes ablation.json/.txt
/// under the job's out_dir.
AblationReport cmd_ablate(const TrainJob& job, std::ostream* log = nullptr);

/// The four variants in table order.
std::vector<BranchFlags> ablation_variants();

struct GradCheckOutcome {
  GradCheckSuiteResult result;
  std::string summary;  // one line per entry plus the verdict
};
GradCheckOutcome cmd_gradcheck(bool corrupt_conv = false, std::uint64_t seed = 2024);

/// Prints "R G B" with four decimals; optionally writes "mean_rgb=R,G,B".
NormStats cmd_mean(const fs::path& manifest, const std::optional<fs::path>& save = {});
std::string format_mean(const NormStats& stats);

}  // namespace amsr
