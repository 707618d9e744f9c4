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

// Acceptance checks. Prints one line per criterion:
//
//   A2 PASS     155 checks, worst conv2d#1/w 3.1e-09 (tol 1e-05), 1.2 s
//
// Exit status: 0 when every selected criterion passed, 77 when the only
// non-passing ones could not run for lack of data, 1 otherwise.
//
// A1 needs the benchmark images, supplied as manifests through
// AMSR_SET5_MANIFEST, AMSR_SET14_MANIFEST and AMSR_BSD100_MANIFEST.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amsr/checkpoint.hpp"
#include "amsr/commands.hpp"
#include "amsr/errors.hpp"
#include "amsr/gradcheck.hpp"
#include "amsr/ops.hpp"

namespace {

namespace fs = std::filesystem;
using namespace amsr;

enum class Status { kPass, kFail, kNotRun };

struct Verdict {
  Status status = Status::kFail;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

fs::path data_dir() { return AMSR_TEST_DATA_DIR; }

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// ------------------------------------------------------------------ A1

constexpr double kA1PsnrTol = 0.10;
constexpr double kA1SsimTol = 0.005;
constexpr double kA1Seconds = 60.0;

struct BicubicTarget {
  const char* env;
  int scale;
  double psnr;
  double ssim;
};

constexpr BicubicTarget kBicubicTargets[] = {
    {"AMSR_SET5_MANIFEST", 2, 33.66, 0.9299},   {"AMSR_SET5_MANIFEST", 3, 30.39, 0.8682},
    {"AMSR_SET5_MANIFEST", 4, 28.42, 0.8104},   {"AMSR_SET14_MANIFEST", 2, 30.24, 0.8688},
    {"AMSR_BSD100_MANIFEST", 2, 29.56, 0.8431},
};

Verdict check_a1(const fs::path&) {
  std::vector<std::string> parts;
  std::vector<std::string> missing;
  bool ok = true;
  int ran = 0;
  std::map<std::string, double> seconds;
  for (const auto& t : kBicubicTargets) {
    const char* manifest = std::getenv(t.env);
    if (manifest == nullptr || *manifest == '\0') {
      if (missing.empty() || missing.back() != t.env) missing.push_back(t.env);
      continue;
    }
    Stopwatch sw;
    EvalOptions opt;
    opt.manifest = manifest;
    opt.scale = t.scale;
    const MetricsReport r = cmd_eval(opt);
    seconds[t.env] += sw.seconds();
    const double dp = r.aggregate.psnr_db - t.psnr;
    const double ds = r.aggregate.ssim - t.ssim;
    const bool pass = std::abs(dp) <= kA1PsnrTol && std::abs(ds) <= kA1SsimTol;
    ok = ok && pass;
    ++ran;
    parts.push_back(fmt("%s x%d %.2f/%.4f vs %.2f/%.4f%s", r.dataset.c_str(), t.scale, r.aggregate.psnr_db,
                        r.aggregate.ssim, t.psnr, t.ssim, pass ? "" : " OUT OF TOLERANCE"));
  }
  for (const auto& [env, s] : seconds) {
    if (s > kA1Seconds) {
      ok = false;
      parts.push_back(fmt("%s took %.1f s (limit %.0f s)", env.c_str(), s, kA1Seconds));
    }
  }
  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : "; ") + p;
  if (ran == 0) return {Status::kNotRun, "no benchmark manifests supplied (set AMSR_SET5_MANIFEST etc.)"};
  if (!missing.empty()) {
    std::string m;
    for (const auto& e : missing) m += (m.empty() ? "" : ", ") + e;
    detail += "; not supplied: " + m;
  }
  return {ok ? Status::kPass : Status::kFail, detail};
}

// ------------------------------------------------------------------ A2

constexpr double kA2Seconds = 120.0;

Verdict check_a2(const fs::path&) {
  Stopwatch sw;
  const GradCheckOutcome out = cmd_gradcheck(false);
  const double secs = sw.seconds();
  const GradCheckEntry* worst = out.result.worst();
  int failed = 0;
  for (const auto& e : out.result.entries) failed += e.passed ? 0 : 1;
  const bool ok = out.result.passed() && secs < kA2Seconds;
  return {ok ? Status::kPass : Status::kFail,
          fmt("%zu checks, %d failed, worst %s %.2g (tol %.0e), %.1f s", out.result.entries.size(), failed,
              worst->name.c_str(), worst->max_rel_error, worst->tolerance, secs)};
}

// ------------------------------------------------------------------ A3

// Overfit smoke run. Model size (C=16, M=2, G=1, x2), step count and optimizer
// are part of the criterion; patch, batch and learning rate are tuning choices.
constexpr const char* kA3Image = "astronaut_face.png";
constexpr int kA3Steps = 200;
constexpr int kA3Patch = 96;  // the whole 96x96 image
constexpr int kA3Batch = 1;
constexpr double kA3Lr = 5e-3;
constexpr bool kA3Augment = false;
constexpr int kA3Window = 10;  // steps averaged for "initial" and "final" loss
constexpr double kA3LossRatio = 0.5;
constexpr double kA3MarginDb = 0.3;
constexpr double kA3Seconds = 600.0;

Verdict check_a3(const fs::path& work) {
  Stopwatch sw;
  const fs::path image = data_dir() / kA3Image;
  write_file(work / "train.txt", image.string() + "\n");
  const NormStats mean = cmd_mean(work / "train.txt");
  std::ostringstream cfg;
  cfg << "train_manifest = train.txt\nout_dir = run\nscale = 2\n"
      << "channels = 16\nn_am = 2\nn_amms = 1\n"
      << "mean_rgb = " << fmt("%.17g,%.17g,%.17g", mean.mean_rgb[0], mean.mean_rgb[1], mean.mean_rgb[2]) << "\n"
      << "lr0 = " << kA3Lr << "\nbatch = " << kA3Batch << "\npatch = " << kA3Patch << "\n"
      << "iters_per_epoch = " << kA3Steps << "\nepochs = 1\nlog_every = 20\nseed = 1\n"
      << "augment = " << (kA3Augment ? "true" : "false") << "\n";
  write_file(work / "a3.cfg", cfg.str());
  fs::remove_all(work / "run");

  const TrainJob job = load_train_job(work / "a3.cfg");
  const FitResult fitted = cmd_train(job);
  const auto& losses = fitted.step_losses;
  if (losses.size() != static_cast<std::size_t>(kA3Steps)) {
    return {Status::kFail, fmt("expected %d steps, ran %zu", kA3Steps, losses.size())};
  }
  double initial = 0.0, final_loss = 0.0;
  for (int i = 0; i < kA3Window; ++i) {
    initial += losses[static_cast<std::size_t>(i)] / kA3Window;
    final_loss += losses[losses.size() - 1 - static_cast<std::size_t>(i)] / kA3Window;
  }

  const ImageU8 hr = modcrop(load_png(image), 2);
  const ImageU8 lr = make_lr(hr, 2);
  const Checkpoint ck = load_checkpoint(job.out_dir / "last.amsr");
  const Model<float> model(ck.config, ck.params);
  const double model_db = evaluate_pair(hr, upscale_with_model(model, lr), 2).psnr_db;
  const double bicubic_db = evaluate_pair(hr, bicubic_resize(lr, hr.width, hr.height, false), 2).psnr_db;
  const double secs = sw.seconds();

  const bool loss_ok = final_loss < kA3LossRatio * initial;
  const bool psnr_ok = model_db >= bicubic_db + kA3MarginDb;
  const bool time_ok = secs < kA3Seconds;
  return {loss_ok && psnr_ok && time_ok ? Status::kPass : Status::kFail,
          fmt("loss %.3f -> %.3f (ratio %.3f, need < %.1f)%s; PSNR model %.3f vs bicubic %.3f dB (%+.3f, need >= "
              "+%.1f)%s; %.0f s%s",
              initial, final_loss, final_loss / initial, kA3LossRatio, loss_ok ? "" : " FAIL", model_db, bicubic_db,
              model_db - bicubic_db, kA3MarginDb, psnr_ok ? "" : " FAIL", secs, time_ok ? "" : " (over 600 s)")};
}

// ------------------------------------------------------------------ A4

constexpr double kA4Seconds = 2400.0;

Verdict check_a4(const fs::path& work) {
  Stopwatch sw;
  write_file(work / "train.txt", "@name fixtures-train\n" + (data_dir() / "astronaut_face.png").string() + "\n" +
                                     (data_dir() / "chelsea.png").string() + "\n");
  write_file(work / "heldout.txt", "@name fixtures-heldout\n" + (data_dir() / "astronaut_suit.png").string() + "\n" +
                                       (data_dir() / "coffee.png").string() + "\n");
  const NormStats mean = cmd_mean(work / "train.txt");
  write_file(work / "ablate.cfg",
             "train_manifest = train.txt\nheldout_manifest = heldout.txt\nout_dir = ablation\nscale = 2\n"
             "channels = 16\nn_am = 2\nn_amms = 1\nmean_rgb = " +
                 fmt("%.17g,%.17g,%.17g", mean.mean_rgb[0], mean.mean_rgb[1], mean.mean_rgb[2]) +
                 "\nlr0 = 5e-3\nbatch = 4\npatch = 48\niters_per_epoch = 100\nepochs = 1\nlog_every = 50\nseed = 1\n");
  fs::remove_all(work / "ablation");
  const TrainJob job = load_train_job(work / "ablate.cfg");
  const AblationReport report = cmd_ablate(job);
  const std::string table = read_file(job.out_dir / "ablation.txt");
  const double secs = sw.seconds();

  bool ok = report.rows.size() == 4 && !table.empty() && fs::exists(job.out_dir / "ablation.json");
  std::string rows;
  for (const auto& r : report.rows) {
    ok = ok && std::isfinite(r.psnr_db) && std::isfinite(r.final_loss);
    rows += fmt(" [NL %d SO %d MS %d: %.2f dB]", r.flags.nonlocal, r.flags.second_order, r.flags.multiscale, r.psnr_db);
  }
  ok = ok && secs < kA4Seconds;
  return {ok ? Status::kPass : Status::kFail, fmt("%zu variants,%s %.0f s", report.rows.size(), rows.c_str(), secs)};
}

// ------------------------------------------------------------------ A5

using Check = std::pair<std::string, std::function<bool()>>;

ImagePlanar random_plane(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  ImagePlanar img(w, h, 1);
  for (double& v : img.planes[0]) v = u(rng);
  return img;
}

Verdict check_a5(const fs::path&) {
  using D = Tensor<double>;
  std::vector<Check> checks;
  checks.emplace_back("ssim(x,x)=1", [] {
    const ImagePlanar x = random_plane(40, 33, 1);
    return std::abs(ssim(x, x, 2) - 1.0) < 1e-12;
  });
  checks.emplace_back("psnr unit difference 48.1308", [] {
    return std::abs(psnr(ImagePlanar(16, 16, 1, 10.0), ImagePlanar(16, 16, 1, 11.0), 2) - 48.1308) < 1e-4;
  });
  checks.emplace_back("covariance symmetric and PSD", [] {
    std::mt19937_64 rng(3);
    const D cov = ops::covariance_pool(random_tensor({3, 6, 5, 7}, rng));
    for (std::int64_t n = 0; n < 3; ++n) {
      double trace = 0.0;
      for (int i = 0; i < 6; ++i) {
        trace += cov.at(n, 0, i, i);
        for (int j = 0; j < 6; ++j) {
          if (std::abs(cov.at(n, 0, i, j) - cov.at(n, 0, j, i)) > 1e-6) return false;
        }
      }
      // x^T S x >= -1e-6 tr for random directions.
      for (int k = 0; k < 200; ++k) {
        std::vector<double> v(6);
        for (double& e : v) e = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        double q = 0.0;
        for (int i = 0; i < 6; ++i) {
          for (int j = 0; j < 6; ++j) q += v[i] * cov.at(n, 0, i, j) * v[j];
        }
        if (q < -1e-6 * trace) return false;
      }
    }
    return true;
  });
  checks.emplace_back("softmax rows sum to 1", [] {
    std::mt19937_64 rng(4);
    const D s = ops::softmax_rows(random_tensor({2, 2, 9, 13}, rng, -1e3, 1e3));
    for (std::int64_t r = 0; r < 2 * 2 * 9; ++r) {
      double total = 0.0;
      for (std::int64_t j = 0; j < 13; ++j) total += s[r * 13 + j];
      if (std::abs(total - 1.0) > 1e-6) return false;
    }
    return true;
  });
  checks.emplace_back("pixel shuffle bijection", [] {
    std::mt19937_64 rng(5);
    for (int r : {2, 3, 4}) {
      const D x = random_tensor({2, 3 * r * r, 4, 5}, rng);
      if (ops::pixel_unshuffle(ops::pixel_shuffle(x, r), r).to_vector() != x.to_vector()) return false;
    }
    return ops::pixel_shuffle(D(Shape{1, 4, 1, 1}, std::vector<double>{1, 2, 3, 4}), 2).to_vector() ==
           std::vector<double>{1, 2, 3, 4};
  });
  checks.emplace_back("resize linear and constant-preserving", [] {
    const ImagePlanar a = random_plane(11, 9, 6);
    const ImagePlanar b = random_plane(11, 9, 7);
    ImagePlanar mix(11, 9, 1);
    for (std::size_t i = 0; i < mix.planes[0].size(); ++i) mix.planes[0][i] = 0.3 * a.planes[0][i] + 1.7 * b.planes[0][i];
    for (auto [w, h] : {std::pair{5, 4}, std::pair{22, 18}, std::pair{33, 27}}) {
      const ImagePlanar ra = bicubic_resize(a, w, h, true), rb = bicubic_resize(b, w, h, true);
      const ImagePlanar rm = bicubic_resize(mix, w, h, true);
      for (std::size_t i = 0; i < rm.planes[0].size(); ++i) {
        if (std::abs(rm.planes[0][i] - (0.3 * ra.planes[0][i] + 1.7 * rb.planes[0][i])) > 1e-6) return false;
      }
      const ImagePlanar flat = bicubic_resize(ImagePlanar(11, 9, 1, 42.5), w, h, true);
      for (double v : flat.planes[0]) {
        if (std::abs(v - 42.5) > 1e-9) return false;
      }
    }
    return true;
  });
  checks.emplace_back("YCbCr gray ramp within 1", [] {
    ImageU8 ramp(256, 1);
    for (int g = 0; g < 256; ++g) {
      for (int c = 0; c < 3; ++c) ramp.at(g, 0, c) = static_cast<std::uint8_t>(g);
    }
    const ImageU8 back = ycbcr_to_rgb(rgb_to_ycbcr(ramp));
    for (std::size_t i = 0; i < back.pixels.size(); ++i) {
      if (std::abs(int(back.pixels[i]) - int(ramp.pixels[i])) > 1) return false;
    }
    return true;
  });

  std::string failed;
  for (const auto& [name, fn] : checks) {
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      ok = false;
    }
    if (!ok) failed += (failed.empty() ? "" : ", ") + name;
  }
  if (failed.empty()) return {Status::kPass, fmt("%zu invariant groups hold", checks.size())};
  return {Status::kFail, "violated: " + failed};
}

// ------------------------------------------------------------------ A6

Verdict check_a6(const fs::path& work) {
  std::vector<std::string> problems;
  write_file(work / "train.txt", (data_dir() / "astronaut_face.png").string() + "\n" +
                                     (data_dir() / "coffee.png").string() + "\n");
  const std::string cfg =
      "train_manifest = train.txt\nchannels = 16\nn_am = 2\nscale = 2\nlr0 = 1e-3\nbatch = 4\npatch = 32\n"
      "iters_per_epoch = 5\nepochs = 2\ncheckpoint_every = 1\nlog_every = 1\nseed = 7\n";
  std::vector<FitResult> runs;
  for (const char* dir : {"run_a", "run_b"}) {
    fs::remove_all(work / dir);
    write_file(work / (std::string(dir) + ".cfg"), cfg + "out_dir = " + dir + "\n");
    runs.push_back(cmd_train(load_train_job(work / (std::string(dir) + ".cfg"))));
  }
  const auto& la = runs[0].step_losses;
  const auto& lb = runs[1].step_losses;
  if (la.size() < 10 || lb.size() < 10 || !std::equal(la.begin(), la.begin() + 10, lb.begin())) {
    problems.push_back("10-step loss prefixes differ");
  }
  if (read_file(work / "run_a" / "epoch_0001.amsr") != read_file(work / "run_b" / "epoch_0001.amsr") ||
      read_file(work / "run_a" / "epoch_0001.amsr").empty()) {
    problems.push_back("first checkpoints differ");
  }
  if (read_file(work / "run_a" / "loss.csv") != read_file(work / "run_b" / "loss.csv")) {
    problems.push_back("loss logs differ");
  }

  write_file(work / "eval.txt", "@name fixtures\n" + (data_dir() / "chelsea.png").string() + "\n" +
                                    (data_dir() / "astronaut_suit.png").string() + "\n");
  std::vector<DegradeResult> degraded;
  for (const char* dir : {"degrade_a", "degrade_b"}) {
    fs::remove_all(work / dir);
    degraded.push_back(cmd_degrade(work / "eval.txt", 3, work / dir));
  }
  if (degraded[0].written.size() != degraded[1].written.size() || !degraded[0].failures.empty()) {
    problems.push_back("degrade outputs differ in number");
  } else {
    for (std::size_t i = 0; i < degraded[0].written.size(); ++i) {
      if (read_file(degraded[0].written[i]) != read_file(degraded[1].written[i])) {
        problems.push_back("degrade output " + degraded[0].written[i].filename().string() + " differs");
      }
    }
  }

  std::vector<std::string> reports;
  for (const char* name : {"eval_a", "eval_b"}) {
    EvalOptions opt;
    opt.manifest = work / "eval.txt";
    opt.scale = 2;
    opt.method = "model";
    opt.checkpoint = work / "run_a" / "last.amsr";
    opt.save_dir = work / name;
    fs::remove_all(work / name);
    write_report(work / name / "report.json", cmd_eval(opt));
    reports.push_back(read_file(work / name / "report.json") + read_file(work / name / "report.txt"));
    for (const auto& e : fs::directory_iterator(work / name)) {
      if (e.path().extension() == ".png") reports.back() += read_file(e.path());
    }
  }
  if (reports[0] != reports[1]) problems.push_back("eval reports or images differ");

  if (problems.empty()) {
    return {Status::kPass, "train loss prefix, first checkpoint, degrade outputs and eval reports are byte-identical"};
  }
  std::string d;
  for (const auto& p : problems) d += (d.empty() ? "" : "; ") + p;
  return {Status::kFail, d};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string criterion = "all";
  std::string work_dir = (fs::temp_directory_path() / "amsr_acceptance").string();
  app.add_option("--criterion", criterion, "A1..A6 or all")
      ->check(CLI::IsMember({"all", "A1", "A2", "A3", "A4", "A5", "A6"}));
  app.add_option("--work-dir", work_dir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict(const fs::path&)>>> all{
      {"A1", check_a1}, {"A2", check_a2}, {"A3", check_a3}, {"A4", check_a4}, {"A5", check_a5}, {"A6", check_a6}};

  int failed = 0, not_run = 0;
  for (const auto& [id, fn] : all) {
    if (criterion != "all" && criterion != id) continue;
    const fs::path work = fs::path(work_dir) / id;
    fs::create_directories(work);
    Verdict v;
    try {
      v = fn(work);
    } catch (const std::exception& e) {
      v = {Status::kFail, std::string("error: ") + e.what()};
    }
    const char* label = v.status == Status::kPass ? "PASS" : (v.status == Status::kFail ? "FAIL" : "NOT RUN");
    std::printf("%s %-8s %s\n", id.c_str(), label, v.detail.c_str());
    std::fflush(stdout);
    failed += v.status == Status::kFail ? 1 : 0;
    not_run += v.status == Status::kNotRun ? 1 : 0;
  }
  if (failed > 0) return 1;
  return not_run > 0 ? 77 : 0;
}
