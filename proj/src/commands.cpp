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

#include "amsr/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "amsr/checkpoint.hpp"
#include "amsr/errors.hpp"
#include "amsr/metrics.hpp"
#include "amsr/ops.hpp"

namespace amsr {
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

std::string read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Every index runs;
// the first failure in index order is rethrown afterwards.
template <typename F>
void parallel_for(std::size_t n, int threads, F fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string flags_tag(const BranchFlags& f) {
  std::string s;
  s += f.nonlocal ? "nl" : "";
  s += f.second_order ? (s.empty() ? "so" : "_so") : "";
  s += f.multiscale ? (s.empty() ? "ms" : "_ms") : "";
  return s.empty() ? "none" : s;
}

struct HeldoutImage {
  std::string id;
  ImageU8 hr;
  ImageU8 lr;
};

std::vector<HeldoutImage> load_heldout(const DatasetManifest& manifest, int scale) {
  std::vector<HeldoutImage> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    HeldoutImage h;
    h.id = manifest.entries[i].stem().string();
    h.hr = modcrop(load_png(manifest.entries[i]), scale);
    h.lr = load_or_make_lr(manifest, i, h.hr, scale);
    out.push_back(std::move(h));
  }
  return out;
}

const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys{"channels",         "n_amms",          "n_am",
                                          "nl_reduction",     "so_reduction",    "sf_layers",
                                          "enable_nonlocal",  "enable_second_order", "enable_multiscale",
                                          "mean_rgb"};
  return keys;
}

}  // namespace

int worker_threads() {
  if (const char* env = std::getenv("AMSR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<int>(v);
    std::cerr << "warning: ignoring AMSR_THREADS='" << env << "' (expected an integer in [1, 1024])\n";
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- degrade

DegradeResult cmd_degrade(const fs::path& manifest_path, int scale, const fs::path& out_dir) {
  if (scale < 2 || scale > 4) throw ContractError("degrade: scale must be 2, 3 or 4, got " + std::to_string(scale));
  const DatasetManifest manifest = DatasetManifest::load(manifest_path);
  const std::string s = std::to_string(scale);
  const fs::path hr_dir = out_dir / ("HR_x" + s);
  const fs::path lr_dir = out_dir / ("LR_x" + s);
  fs::create_directories(hr_dir);
  fs::create_directories(lr_dir);

  DegradeResult result;
  std::ostringstream listing;
  listing << "@name " << manifest.name << "\n@lr " << scale << " LR_x" << s << "\n";
  for (const auto& entry : manifest.entries) {
    try {
      const ImageU8 hr = modcrop(load_png(entry), scale);
      const ImageU8 lr = make_lr(hr, scale);
      const fs::path hr_out = hr_dir / (entry.stem().string() + ".png");
      const fs::path lr_out = lr_dir / lr_file_name(entry, scale);
      save_png(hr_out, hr);
      save_png(lr_out, lr);
      result.written.push_back(hr_out);
      result.written.push_back(lr_out);
      listing << "HR_x" << s << "/" << entry.stem().string() << ".png\n";
    } catch (const Error& e) {
      result.failures.push_back(entry.string() + ": " + e.what());
    }
  }
  result.manifest = out_dir / ("manifest_x" + s + ".txt");
  write_text(result.manifest, listing.str());
  return result;
}

// ---------------------------------------------------------------- eval

ImageU8 upscale_with_model(const Model<float>& model, const ImageU8& lr) {
  NormStats stats;
  stats.mean_rgb = model.config().mean_rgb;
  return denormalize(model.forward_full(normalize(lr, stats)), stats);
}

MetricsReport cmd_eval(const EvalOptions& options) {
  if (options.scale < 2 || options.scale > 4) {
    throw ContractError("eval: scale must be 2, 3 or 4, got " + std::to_string(options.scale));
  }
  if (options.method != "bicubic" && options.method != "model") {
    throw ContractError("eval: method must be 'bicubic' or 'model', got '" + options.method + "'");
  }
  const DatasetManifest manifest = DatasetManifest::load(options.manifest);

  std::ostringstream hash_input;
  hash_input << "method=" << options.method << "\nscale=" << options.scale << "\ndataset=" << manifest.name << "\n";
  for (const auto& e : manifest.entries) hash_input << "entry=" << e.filename().string() << "\n";

  std::optional<Model<float>> model;
  if (options.method == "model") {
    if (!options.checkpoint) throw ContractError("eval: method 'model' needs --checkpoint");
    Checkpoint ck = load_checkpoint(*options.checkpoint);
    if (ck.config.scale != options.scale) {
      throw IntegrityError("checkpoint " + options.checkpoint->string() + " is for scale " +
                           std::to_string(ck.config.scale) + " but evaluation asked for scale " +
                           std::to_string(options.scale));
    }
    hash_input << ck.config.canonical_text() << "weights=" << fnv1a_hex(read_bytes(*options.checkpoint)) << "\n";
    model.emplace(ck.config, std::move(ck.params));
  }
  if (options.save_dir) fs::create_directories(*options.save_dir);

  std::vector<MetricRecord> records(manifest.entries.size());
  const int threads = options.threads > 0 ? options.threads : worker_threads();
  parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
    const fs::path& entry = manifest.entries[i];
    const ImageU8 hr = modcrop(load_png(entry), options.scale);
    const ImageU8 lr = load_or_make_lr(manifest, i, hr, options.scale);
    const ImageU8 sr = model ? upscale_with_model(*model, lr) : bicubic_resize(lr, hr.width, hr.height, false);
    if (options.save_dir) {
      save_png(*options.save_dir / (entry.stem().string() + "_x" + std::to_string(options.scale) + "_" +
                                    options.method + ".png"),
               sr);
    }
    records[i] = evaluate_pair(hr, sr, options.scale, entry.stem().string());
  });

  MetricsReport report;
  report.method = options.method;
  report.dataset = manifest.name;
  report.scale = options.scale;
  report.records = std::move(records);
  report.aggregate = aggregate(report.records);
  report.config_hash = fnv1a_hex(hash_input.str());
  return report;
}

void write_report(const fs::path& json_path, const MetricsReport& report) {
  if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
  const std::string text = report_json(report);
  write_text(json_path, text);
  fs::path txt = json_path;
  txt.replace_extension(".txt");
  write_text(txt, render_report_table(text));
}

// ---------------------------------------------------------------- train

std::string TrainJob::canonical_text() const {
  std::ostringstream out;
  out << model.canonical_text() << train.canonical_text() << "max_steps=" << max_steps << "\n"
      << "train_manifest=" << train_manifest.filename().string() << "\n";
  return out.str();
}

TrainJob parse_train_job(const std::string& text, const fs::path& base_dir) {
  const KvConfig kv = KvConfig::parse(text);
  std::set<std::string> known = model_keys();
  for (const char* k : {"lr0", "beta1", "beta2", "eps", "batch", "patch", "iters_per_epoch", "epochs",
                        "lr_half_every", "seed", "scale", "checkpoint_every", "log_every", "augment",
                        "train_manifest", "heldout_manifest", "out_dir", "max_steps"}) {
    known.insert(k);
  }
  kv.reject_unknown(known);

  TrainJob job;
  job.train = TrainConfig::from_kv(kv);
  KvConfig model_kv;
  for (const auto& [k, v] : kv.items()) {
    if (model_keys().count(k) != 0) model_kv.set(k, v);
  }
  model_kv.set("scale", std::to_string(job.train.scale));
  std::ostringstream model_text;
  for (const auto& [k, v] : model_kv.items()) model_text << k << "=" << v << "\n";
  job.model = ModelConfig::from_canonical_text(model_text.str());

  if (!kv.has("train_manifest")) throw ConfigError("field 'train_manifest': required, expected a manifest path");
  job.train_manifest = base_dir / kv.get_string("train_manifest", "");
  job.out_dir = base_dir / kv.get_string("out_dir", "run");
  if (kv.has("heldout_manifest")) job.heldout_manifest = base_dir / kv.get_string("heldout_manifest", "");
  job.max_steps = kv.get_int("max_steps", 0, 0, INT64_MAX);
  return job;
}

TrainJob load_train_job(const fs::path& config_path) {
  return parse_train_job(read_bytes(config_path), config_path.parent_path());
}

FitResult cmd_train(const TrainJob& job, const std::optional<fs::path>& resume, std::ostream* log) {
  job.model.validate();
  job.train.validate();
  if (job.train.full_scale()) {
    std::cerr << "warning: this is a full-length configuration (" << job.train.epochs << " epochs x "
              << job.train.iters_per_epoch << " iterations x batch " << job.train.batch << " at " << job.train.patch
              << "px); expect this to run for days even on a GPU\n";
  }
  const DatasetManifest manifest = DatasetManifest::load(job.train_manifest);
  const std::vector<TrainingImage> images = load_training_set(manifest, job.train.scale);
  NormStats stats;
  stats.mean_rgb = job.model.mean_rgb;
  const BatchSampler sampler(images, job.train.scale, job.train.patch, stats, job.train.seed, job.train.augment);

  TrainState state;
  if (resume) {
    Checkpoint ck = load_checkpoint(*resume, job.model);
    state.params = std::move(ck.params);
    fs::path sidecar = *resume;
    sidecar.replace_extension(".state");
    load_train_state(sidecar, state);
  } else {
    state.params = build_model<float>(job.model, job.train.seed);
    state.opt = OptimState::zeros(state.params);
  }

  fs::create_directories(job.out_dir);
  write_text(job.out_dir / "job.txt", job.canonical_text());

  TrainHooks hooks;
  if (log != nullptr) {
    hooks.on_log = [log](const LossRecord& r) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %d iter %d lr %.3g loss %.6f", r.epoch, r.iter, r.lr, r.loss);
      *log << buf << std::endl;
    };
  }
  FitOptions options;
  options.out_dir = job.out_dir;
  options.max_steps = job.max_steps;
  return fit(job.model, std::move(state), sampler, job.train, hooks, options);
}

// ---------------------------------------------------------------- infer

void cmd_infer(const fs::path& checkpoint, const fs::path& in, const fs::path& out) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const Model<float> model(ck.config, std::move(ck.params));
  const ImageU8 lr = load_png(in);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_png(out, upscale_with_model(model, lr));
}

// ---------------------------------------------------------------- ablate

std::vector<BranchFlags> ablation_variants() {
  return {BranchFlags{true, false, false}, BranchFlags{false, true, false}, BranchFlags{false, false, true},
          BranchFlags{true, true, true}};
}

AblationReport cmd_ablate(const TrainJob& job, std::ostream* log) {
  if (!job.heldout_manifest) throw ConfigError("field 'heldout_manifest': required by ablate");
  const DatasetManifest heldout_manifest = DatasetManifest::load(*job.heldout_manifest);
  const std::vector<HeldoutImage> heldout = load_heldout(heldout_manifest, job.train.scale);

  AblationReport report;
  report.dataset = heldout_manifest.name;
  report.scale = job.train.scale;
  std::string hash_input = job.canonical_text() + "heldout=" + heldout_manifest.name + "\n";
  for (const BranchFlags& flags : ablation_variants()) {
    TrainJob variant = job;
    variant.model.flags = flags;
    variant.out_dir = job.out_dir / ("variant_" + flags_tag(flags));
    if (log != nullptr) *log << "variant " << flags_tag(flags) << std::endl;
    const FitResult fitted = cmd_train(variant, std::nullopt, log);

    const Model<float> model(variant.model, fitted.state.params);
    std::vector<MetricRecord> records(heldout.size());
    parallel_for(heldout.size(), worker_threads(), [&](std::size_t i) {
      records[i] = evaluate_pair(heldout[i].hr, upscale_with_model(model, heldout[i].lr), job.train.scale, heldout[i].id);
    });
    const Aggregate agg = aggregate(records);
    AblationRow row;
    row.flags = flags;
    row.psnr_db = agg.psnr_db;
    row.ssim = agg.ssim;
    row.final_loss = fitted.step_losses.empty() ? 0.0 : fitted.step_losses.back();
    report.rows.push_back(row);
  }
  report.config_hash = fnv1a_hex(hash_input);

  fs::create_directories(job.out_dir);
  const std::string text = ablation_json(report);
  write_text(job.out_dir / "ablation.json", text);
  write_text(job.out_dir / "ablation.txt", render_ablation_table(text));
  return report;
}

// ---------------------------------------------------------------- gradcheck

GradCheckOutcome cmd_gradcheck(bool corrupt_conv, std::uint64_t seed) {
  struct FaultGuard {
    explicit FaultGuard(bool on) { ops::fault::corrupt_conv_backward(on); }
    ~FaultGuard() { ops::fault::corrupt_conv_backward(false); }
  } guard(corrupt_conv);

  GradCheckOutcome out;
  out.result = run_gradcheck_suite(seed);
  std::ostringstream s;
  int passed = 0;
  for (const auto& e : out.result.entries) {
    char line[256];
    std::snprintf(line, sizeof line, "%s  %-40s probes %4lld  skipped %2lld  max rel err %.3e  (tol %.0e)\n",
                  e.passed ? "PASS" : "FAIL", e.name.c_str(), static_cast<long long>(e.probes),
                  static_cast<long long>(e.skipped), e.max_rel_error,
                  e.tolerance);
    s << line;
    passed += e.passed ? 1 : 0;
  }
  if (out.result.passed()) {
    s << "gradcheck: all " << passed << " checks passed\n";
  } else {
    const GradCheckEntry* worst = out.result.worst();
    s << "gradcheck: " << (out.result.entries.size() - static_cast<std::size_t>(passed)) << " of "
      << out.result.entries.size() << " checks failed; worst offender " << worst->name << " (max rel err "
      << worst->max_rel_error << ")\n";
  }
  out.summary = s.str();
  return out;
}

// ---------------------------------------------------------------- mean

std::string format_mean(const NormStats& stats) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.4f %.4f %.4f", stats.mean_rgb[0], stats.mean_rgb[1], stats.mean_rgb[2]);
  return buf;
}

NormStats cmd_mean(const fs::path& manifest, const std::optional<fs::path>& save) {
  const NormStats stats = compute_mean(DatasetManifest::load(manifest));
  if (save) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "mean_rgb=%.17g,%.17g,%.17g\n", stats.mean_rgb[0], stats.mean_rgb[1],
                  stats.mean_rgb[2]);
    write_text(*save, buf);
  }
  return stats;
}

}  // namespace amsr
