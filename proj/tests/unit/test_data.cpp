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

#include <random>
#include <thread>

#include "amsr/data.hpp"
#include "amsr/errors.hpp"
#include "test_util.hpp"

namespace amsr {
namespace {

ImageU8 ramp(int w, int h) {
  ImageU8 img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = static_cast<std::uint8_t>((x * 7 + y * 3) % 256);
      img.at(x, y, 1) = static_cast<std::uint8_t>((x * 2 + y * 11) % 256);
      img.at(x, y, 2) = static_cast<std::uint8_t>((x + y) % 256);
    }
  }
  return img;
}

Tensor<float> tensor_ramp(int n) {
  std::vector<float> v(static_cast<std::size_t>(3 * n * n));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i);
  return Tensor<float>(Shape{1, 3, n, n}, std::move(v));
}

TEST(Manifest, ParsesDirectivesAndComments) {
  const auto m = DatasetManifest::parse("# comment\n@name Demo\n@lr 2 lr2\n\na.png\nsub/b.png  \n", "/data", "x");
  EXPECT_EQ(m.name, "Demo");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0], std::filesystem::path("/data/a.png"));
  EXPECT_EQ(m.entries[1], std::filesystem::path("/data/sub/b.png"));
  EXPECT_EQ(m.lr_dirs.at(2), std::filesystem::path("/data/lr2"));
  EXPECT_EQ(DatasetManifest::parse("a.png\n", "/d", "fallback").name, "fallback");
}

TEST(Manifest, RejectsBadInput) {
  EXPECT_THROW(DatasetManifest::parse("# nothing\n", "/d", "x"), ContractError);
  EXPECT_THROW(DatasetManifest::parse("a.png\na.png\n", "/d", "x"), ContractError);
  EXPECT_THROW(DatasetManifest::parse("@bogus 1\na.png\n", "/d", "x"), ContractError);
  EXPECT_THROW(DatasetManifest::load("/nonexistent/manifest.txt"), IoError);
}

TEST(Degrade, LrNameAndSize) {
  EXPECT_EQ(lr_file_name("/x/baby.png", 3), "baby_x3.png");
  const ImageU8 lr = make_lr(ramp(100, 100), 2);
  EXPECT_EQ(lr.width, 50);
  EXPECT_EQ(lr.height, 50);
  const ImageU8 lr4 = make_lr(ramp(101, 99), 4);
  EXPECT_EQ(lr4.width, 25);
  EXPECT_EQ(lr4.height, 24);
  for (auto v : make_lr(ImageU8(40, 40, 90), 4).pixels) EXPECT_EQ(v, 90);
}

TEST(Patch, OriginsInBoundsAndReproducible) {
  const ImageU8 hr = ramp(64, 48);
  const ImageU8 lr = make_lr(hr, 4);
  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 50; ++i) {
    const auto p = sample_patch(hr, lr, 4, 16, a, "r");
    const auto q = sample_patch(hr, lr, 4, 16, b, "r");
    ASSERT_TRUE(p && q);
    EXPECT_GE(p->origin_x, 0);
    EXPECT_GE(p->origin_y, 0);
    EXPECT_LE(p->origin_x + 4, lr.width);
    EXPECT_LE(p->origin_y + 4, lr.height);
    EXPECT_EQ(p->lr.shape(), (Shape{1, 3, 4, 4}));
    EXPECT_EQ(p->hr.shape(), (Shape{1, 3, 16, 16}));
    EXPECT_EQ(p->hr.at(0, 1, 0, 0), hr.at(p->origin_x * 4, p->origin_y * 4, 1));
    EXPECT_EQ(p->origin_x, q->origin_x);
    EXPECT_EQ(p->lr.to_vector(), q->lr.to_vector());
  }
  EXPECT_FALSE(sample_patch(hr, lr, 4, 64, a).has_value());
}

TEST(Augment, Algebra) {
  const Tensor<float> t = tensor_ramp(5);
  EXPECT_EQ(hflip(hflip(t)).to_vector(), t.to_vector());
  EXPECT_EQ(vflip(vflip(t)).to_vector(), t.to_vector());
  EXPECT_EQ(rot90(rot90(rot90(rot90(t)))).to_vector(), t.to_vector());
  // Two quarter turns are a half turn.
  EXPECT_EQ(rot90(rot90(t)).to_vector(), hflip(vflip(t)).to_vector());
  EXPECT_EQ(hflip(t).at(0, 0, 0, 0), t.at(0, 0, 0, 4));
  EXPECT_EQ(rot90(t).at(0, 2, 0, 0), t.at(0, 2, 0, 4));

  SamplePair pair{t, tensor_ramp(2), "x", 0, 0};
  EXPECT_EQ(augment(pair, AugmentFlags{}).hr.to_vector(), t.to_vector());
}

TEST(Augment, CommutesWithDownscale) {
  ImageU8 hr(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) hr.at(x, y, c) = static_cast<std::uint8_t>(20 * x + 9 * y + c);
    }
  }
  const NormStats zero;
  const Tensor<float> lr_then_rot = rot90(normalize(make_lr(hr, 2), zero));
  const ImageU8 hr_rot = denormalize(rot90(normalize(hr, zero)), zero);
  const Tensor<float> rot_then_lr = normalize(make_lr(hr_rot, 2), zero);
  for (std::int64_t i = 0; i < lr_then_rot.numel(); ++i) EXPECT_NEAR(lr_then_rot[i], rot_then_lr[i], 1.0f) << i;
}

TEST(Mean, PixelWeighted) {
  EXPECT_EQ(compute_mean({ImageU8(4, 4, 128)}).mean_rgb, (std::array<double, 3>{128.0, 128.0, 128.0}));
  // A 1x1 image of 0 and a 3x3 image of 100: 900 / 10 = 90.
  const NormStats s = compute_mean({ImageU8(1, 1, 0), ImageU8(3, 3, 100)});
  EXPECT_DOUBLE_EQ(s.mean_rgb[0], 90.0);
  EXPECT_DOUBLE_EQ(s.mean_rgb[2], 90.0);
}

TEST(Normalize, RoundTrip) {
  const ImageU8 img = ramp(13, 7);
  const NormStats s{{114.444, 111.4605, 103.02}};
  const Tensor<float> t = normalize(img, s);
  EXPECT_EQ(t.shape(), (Shape{1, 3, 7, 13}));
  EXPECT_NEAR(t.at(0, 0, 0, 0), img.at(0, 0, 0) - 114.444, 1e-4);
  const ImageU8 back = denormalize(t, s);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_LE(std::abs(int(back.pixels[i]) - int(img.pixels[i])), 1);
}

TEST(Sampler, DeterministicAcrossThreads) {
  std::vector<TrainingImage> imgs{{"a", ramp(64, 64), {}}, {"b", ramp(48, 80), {}}};
  for (auto& im : imgs) im.lr = make_lr(im.hr, 2);
  const BatchSampler sampler(imgs, 2, 16, NormStats{{100, 100, 100}}, 42);
  const Batch ref = sampler.batch(3, 7, 4);
  EXPECT_EQ(ref.lr.shape(), (Shape{4, 3, 8, 8}));
  EXPECT_EQ(ref.hr.shape(), (Shape{4, 3, 16, 16}));
  Batch other;
  std::thread worker([&] { other = sampler.batch(3, 7, 4); });
  worker.join();
  EXPECT_EQ(other.lr.to_vector(), ref.lr.to_vector());
  EXPECT_EQ(other.hr.to_vector(), ref.hr.to_vector());
  EXPECT_NE(sampler.batch(3, 8, 4).hr.to_vector(), ref.hr.to_vector());
  EXPECT_NE(derive_seed(1, 0, 0, 0), derive_seed(1, 0, 0, 1));
  EXPECT_NE(derive_seed(1, 0, 1, 0), derive_seed(1, 1, 0, 0));
}

TEST(TrainingSet, LoadsFixturesWithSuppliedLr) {
  test::TempDir dir;
  const ImageU8 hr = ramp(21, 18);
  save_png(dir.path() / "r.png", hr);
  std::filesystem::create_directories(dir.path() / "lr");
  save_png(dir.path() / "lr" / "r_x2.png", make_lr(hr, 2));
  test::write_text(dir.path() / "m.txt", "@lr 2 lr\nr.png\n");
  const auto set = load_training_set(DatasetManifest::load(dir.path() / "m.txt"), 2);
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set[0].hr.width, 20);
  EXPECT_EQ(set[0].lr.width, 10);
  EXPECT_EQ(set[0].lr, make_lr(hr, 2));

  save_png(dir.path() / "lr" / "r_x2.png", ImageU8(3, 3));
  EXPECT_THROW(load_training_set(DatasetManifest::load(dir.path() / "m.txt"), 2), IntegrityError);
}

}  // namespace
}  // namespace amsr
