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

#include <gtest/gtest.h>

#include <cmath>

#include "amsr/checkpoint.hpp"
#include "amsr/commands.hpp"
#include "amsr/errors.hpp"
#include "amsr/ops.hpp"
#include "test_util.hpp"

namespace amsr {
namespace {

MetricsReport sample_report() {
  MetricsReport r;
  r.method = "bicubic";
  r.dataset = "Set5";
  r.scale = 2;
  r.config_hash = "0123456789abcdef";
  r.records = {{"baby", 35.125, 0.9412, 2, 2}, {"bird", std::numeric_limits<double>::infinity(), 1.0, 2, 2}};
  r.aggregate = aggregate(r.records);
  return r;
}

TEST(Report, JsonRoundTripAndTableAgree) {
  const MetricsReport r = sample_report();
  const std::string json = report_json(r);
  const MetricsReport back = parse_report_json(json);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[0].image_id, "baby");
  EXPECT_DOUBLE_EQ(back.records[0].psnr_db, 35.125);
  EXPECT_TRUE(std::isinf(back.records[1].psnr_db));
  EXPECT_EQ(back.aggregate.excluded_infinite, 1);
  EXPECT_EQ(back.config_hash, r.config_hash);
  EXPECT_EQ(report_json(back), json);

  const std::string table = render_report_table(json);
  EXPECT_NE(table.find("35.1250"), std::string::npos) << table;
  EXPECT_NE(table.find("0.9412"), std::string::npos) << table;
  EXPECT_NE(table.find("inf"), std::string::npos) << table;
  // The published bicubic reference for the matching dataset is shown, labelled.
  EXPECT_NE(table.find("not reproduced"), std::string::npos) << table;
  EXPECT_NE(table.find("33.66"), std::string::npos) << table;
  EXPECT_THROW(parse_report_json("{not json"), FormatError);
}

TEST(Report, PublishedTables) {
  int bicubic = 0;
  for (const auto& row : published_benchmarks()) {
    if (std::string(row.method) == "Bicubic" && row.scale == 2 && std::string(row.dataset) == "Set5") {
      EXPECT_DOUBLE_EQ(row.psnr_db, 33.66);
      EXPECT_DOUBLE_EQ(row.ssim, 0.9299);
      ++bicubic;
    }
  }
  EXPECT_EQ(bicubic, 1);
  ASSERT_EQ(published_ablation().size(), 4u);
  EXPECT_DOUBLE_EQ(published_ablation()[3].psnr_db, 37.23);
}

TEST(Report, AblationTableListsFourRows) {
  AblationReport r;
  r.dataset = "held";
  r.scale = 2;
  for (const auto& f : ablation_variants()) r.rows.push_back({f, 30.0, 0.9, 5.0});
  const std::string table = render_ablation_table(ablation_json(r));
  EXPECT_EQ(ablation_variants().size(), 4u);
  std::size_t count = 0, pos = 0;
  while ((pos = table.find("30.0000", pos)) != std::string::npos) {
    ++count;
    ++pos;
  }
  EXPECT_EQ(count, 4u) << table;
}

TEST(Mean, FormatAndSave) {
  EXPECT_EQ(format_mean(NormStats{{114.444, 111.4605, 103.02}}), "114.4440 111.4605 103.0200");
  test::TempDir dir;
  save_png(dir.path() / "g.png", ImageU8(3, 3, 128));
  test::write_text(dir.path() / "m.txt", "g.png\n");
  const NormStats s = cmd_mean(dir.path() / "m.txt", dir.path() / "mean.txt");
  EXPECT_EQ(s.mean_rgb[1], 128.0);
  EXPECT_NE(test::read_bytes(dir.path() / "mean.txt").find("mean_rgb=128,128,128"), std::string::npos);
  test::write_text(dir.path() / "empty.txt", "# nothing\n");
  EXPECT_THROW(cmd_mean(dir.path() / "empty.txt"), ContractError);
}

TEST(TrainJob, ParsesAndRejects) {
  const TrainJob job = parse_train_job(
      "train_manifest = train.txt\nchannels = 16\nn_am = 2\nscale = 3\npatch = 48\nenable_nonlocal = false\n", "/base");
  EXPECT_EQ(job.train_manifest, std::filesystem::path("/base/train.txt"));
  EXPECT_EQ(job.out_dir, std::filesystem::path("/base/run"));
  EXPECT_EQ(job.model.scale, 3);
  EXPECT_EQ(job.model.channels, 16);
  EXPECT_FALSE(job.model.flags.nonlocal);
  EXPECT_THROW(parse_train_job("channels = 16\n", "/b"), ConfigError);
  EXPECT_THROW(parse_train_job("train_manifest = t\nchanels = 16\n", "/b"), ConfigError);
  EXPECT_THROW(parse_train_job("train_manifest = t\nchannels = -4\n", "/b"), ConfigError);
}

TEST(Commands, DegradeEvalAndInferAreRepeatable) {
  test::TempDir dir;
  const auto data = test::data_dir();
  test::write_text(dir.path() / "m.txt", "@name Fixtures\n" + (data / "coffee.png").string() + "\n" +
                                             (data / "chelsea.png").string() + "\n");
  const DegradeResult d1 = cmd_degrade(dir.path() / "m.txt", 3, dir.path() / "a");
  const DegradeResult d2 = cmd_degrade(dir.path() / "m.txt", 3, dir.path() / "b");
  EXPECT_TRUE(d1.failures.empty());
  ASSERT_EQ(d1.written.size(), d2.written.size());
  for (std::size_t i = 0; i < d1.written.size(); ++i) {
    EXPECT_EQ(test::read_bytes(d1.written[i]), test::read_bytes(d2.written[i])) << d1.written[i];
  }
  const ImageU8 lr = load_png(dir.path() / "a" / "LR_x3" / "coffee_x3.png");
  EXPECT_EQ(lr.width, 24);
  EXPECT_EQ(lr.height, 20);

  EvalOptions opt;
  opt.manifest = d1.manifest;
  opt.scale = 3;
  opt.threads = 1;
  const std::string j1 = report_json(cmd_eval(opt));
  opt.threads = 3;
  const MetricsReport r = cmd_eval(opt);
  EXPECT_EQ(report_json(r), j1);
  EXPECT_EQ(r.dataset, "Fixtures");
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_GT(r.records[0].psnr_db, 20.0);
  EXPECT_LT(r.records[0].psnr_db, 50.0);

  const ModelConfig cfg = ModelConfig::toy(2);
  save_checkpoint(dir.path() / "toy.amsr", cfg, build_model<float>(cfg, 1));
  opt.method = "model";
  opt.checkpoint = dir.path() / "toy.amsr";
  EXPECT_THROW(cmd_eval(opt), IntegrityError);

  cmd_infer(dir.path() / "toy.amsr", data / "coffee.png", dir.path() / "up.png");
  const ImageU8 up = load_png(dir.path() / "up.png");
  EXPECT_EQ(up.width, 144);
  EXPECT_EQ(up.height, 120);
}

TEST(Commands, DegradeReportsUnreadableEntries) {
  test::TempDir dir;
  test::write_text(dir.path() / "m.txt", (test::data_dir() / "coffee.png").string() + "\nmissing.png\n");
  const DegradeResult d = cmd_degrade(dir.path() / "m.txt", 2, dir.path() / "out");
  ASSERT_EQ(d.failures.size(), 1u);
  EXPECT_NE(d.failures[0].find("missing.png"), std::string::npos);
}

TEST(Commands, TrainWritesArtifactsAndResumes) {
  test::TempDir dir;
  test::write_text(dir.path() / "train.txt", (test::data_dir() / "coffee.png").string() + "\n");
  test::write_text(dir.path() / "job.cfg",
                   "train_manifest = train.txt\nout_dir = run\nchannels = 8\nn_am = 1\nso_reduction = 8\n"
                   "batch = 2\npatch = 16\niters_per_epoch = 2\nepochs = 2\ncheckpoint_every = 1\nlr0 = 1e-3\n");
  const TrainJob job = load_train_job(dir.path() / "job.cfg");
  const FitResult full = cmd_train(job);
  for (const char* f : {"job.txt", "loss.csv", "epoch_0001.amsr", "epoch_0002.state", "last.amsr", "best.amsr"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "run" / f)) << f;
  }
  TrainJob again = job;
  again.out_dir = dir.path() / "resumed";
  const FitResult resumed = cmd_train(again, dir.path() / "run" / "epoch_0001.amsr");
  EXPECT_TRUE(resumed.state.params == full.state.params);
  EXPECT_EQ(test::read_bytes(dir.path() / "run" / "last.amsr"), test::read_bytes(dir.path() / "resumed" / "last.amsr"));
}

TEST(Commands, GradcheckSummaryNamesWorstOffender) {
  const GradCheckOutcome bad = cmd_gradcheck(true);
  EXPECT_FALSE(bad.result.passed());
  EXPECT_NE(bad.summary.find("FAIL"), std::string::npos);
  EXPECT_NE(bad.summary.find("conv2d"), std::string::npos);
  // The fault is cleared again afterwards.
  EXPECT_FALSE(ops::fault::conv_backward_corrupted());
}

}  // namespace
}  // namespace amsr
