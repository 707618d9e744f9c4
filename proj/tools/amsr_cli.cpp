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

// amsr: degrade, eval, train, infer, ablate, gradcheck, mean.
//
// Exit codes: 0 success, 1 usage, 2 I/O, 3 integrity or contract violation.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "amsr/commands.hpp"
#include "amsr/errors.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kIo = 2;
constexpr int kIntegrity = 3;

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-image super-resolution toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", amsr::tool_version());

  // degrade
  std::string manifest, out_dir;
  int scale = 2;
  auto* degrade = app.add_subcommand("degrade", "Write modcropped HR copies and bicubic LR images");
  degrade->add_option("--manifest", manifest, "HR manifest")->required();
  degrade->add_option("--scale", scale, "Scale factor")->check(CLI::IsMember({2, 3, 4}));
  degrade->add_option("--out-dir", out_dir, "Output directory")->required();

  // eval
  amsr::EvalOptions eval_opts;
  std::string checkpoint, report, save_dir;
  auto* eval = app.add_subcommand("eval", "Upscale a dataset and report PSNR/SSIM on luma");
  eval->add_option("--manifest", eval_opts.manifest, "HR manifest")->required();
  eval->add_option("--scale", eval_opts.scale, "Scale factor")->check(CLI::IsMember({2, 3, 4}));
  eval->add_option("--method", eval_opts.method, "bicubic or model")->check(CLI::IsMember({"bicubic", "model"}));
  eval->add_option("--checkpoint", checkpoint, "Checkpoint for --method model");
  eval->add_option("--report", report, "JSON report path; the text table goes next to it");
  eval->add_option("--save-dir", save_dir, "Also write the upscaled images here");

  // train
  std::string config, resume;
  auto* train = app.add_subcommand("train", "Train from a key=value config file");
  train->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("--resume", resume, "Checkpoint to resume from (needs its .state sidecar)");

  // infer
  std::string in_path, out_path;
  auto* infer = app.add_subcommand("infer", "Upscale one PNG with a checkpoint");
  infer->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  infer->add_option("--in", in_path, "Input PNG")->required();
  infer->add_option("--out", out_path, "Output PNG")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Train and compare the four branch-flag variants");
  ablate->add_option("--config", config, "Config file (needs heldout_manifest)")->required()->check(CLI::ExistingFile);

  // gradcheck
  bool corrupt = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every op and the toy model");
  gradcheck->add_flag("--corrupt-conv", corrupt, "Test fixture: break the conv weight gradient first");

  // mean
  std::string save;
  auto* mean = app.add_subcommand("mean", "Per-channel RGB mean over a manifest");
  mean->add_option("--manifest", manifest, "Manifest")->required();
  mean->add_option("--save", save, "Write mean_rgb=R,G,B to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (degrade->parsed()) {
      const auto result = amsr::cmd_degrade(manifest, scale, out_dir);
      for (const auto& f : result.failures) std::cerr << "error: " << f << "\n";
      std::cout << "wrote " << result.written.size() << " files and " << result.manifest.string() << "\n";
      return result.failures.empty() ? 0 : kIo;
    }
    if (eval->parsed()) {
      eval_opts.checkpoint = opt_path(checkpoint);
      eval_opts.save_dir = opt_path(save_dir);
      const amsr::MetricsReport r = amsr::cmd_eval(eval_opts);
      const std::string json = amsr::report_json(r);
      if (!report.empty()) amsr::write_report(report, r);
      std::cout << amsr::render_report_table(json);
      return 0;
    }
    if (train->parsed()) {
      const amsr::TrainJob job = amsr::load_train_job(config);
      const auto result = amsr::cmd_train(job, opt_path(resume), &std::cout);
      std::cout << "finished at step " << result.state.opt.t << "; outputs in " << job.out_dir.string() << "\n";
      return 0;
    }
    if (infer->parsed()) {
      amsr::cmd_infer(checkpoint, in_path, out_path);
      return 0;
    }
    if (ablate->parsed()) {
      const amsr::TrainJob job = amsr::load_train_job(config);
      const amsr::AblationReport r = amsr::cmd_ablate(job, &std::cout);
      std::cout << amsr::render_ablation_table(amsr::ablation_json(r));
      return 0;
    }
    if (gradcheck->parsed()) {
      const auto outcome = amsr::cmd_gradcheck(corrupt);
      std::cout << outcome.summary;
      return outcome.result.passed() ? 0 : kIntegrity;
    }
    if (mean->parsed()) {
      const amsr::NormStats stats = amsr::cmd_mean(manifest, opt_path(save));
      std::cout << amsr::format_mean(stats) << "\n";
      return 0;
    }
  } catch (const amsr::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const amsr::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const amsr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIntegrity;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
