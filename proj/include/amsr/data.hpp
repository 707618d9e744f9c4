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

// Dataset manifests, HR -> LR degradation, patch sampling, augmentation and
// mean normalisation.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "amsr/image.hpp"
#include "amsr/tensor.hpp"

namespace amsr {

/// Manifest file: one HR path per line, relative to the manifest directory.
/// `#` starts a comment. Two directives are understood:
///
///   @name Set5          dataset name (defaults to the file stem)
///   @lr 2 lr_x2         directory of precomputed LR images for a scale,
///                       holding <stem>_x<scale>.png files
struct DatasetManifest {
  std::string name;
  std::vector<std::filesystem::path> entries;
  std::map<int, std::filesystem::path> lr_dirs;

  static DatasetManifest load(const std::filesystem::path& path);
  static DatasetManifest parse(const std::string& text, const std::filesystem::path& base_dir,
                               const std::string& default_name);
};

/// "<stem>_x<scale>.png"
std::string lr_file_name(const std::filesystem::path& hr_path, int scale);

struct NormStats {
  std::array<double, 3> mean_rgb{0.0, 0.0, 0.0};
};

/// Modcrop, then antialiased bicubic downscale by `scale`, rounded to 8 bits.
ImageU8 make_lr(const ImageU8& hr, int scale);

/// LR for manifest entry `index`: read from the precomputed directory when the
/// manifest names one for this scale, otherwise derived with make_lr.
ImageU8 load_or_make_lr(const DatasetManifest& manifest, std::size_t index, const ImageU8& hr_cropped, int scale);

/// Aligned HR/LR crops, 1 x 3 x P x P tensors of raw 0-255 values.
struct SamplePair {
  Tensor<float> hr;
  Tensor<float> lr;
  std::string source_id;
  int origin_x = 0;  // LR coordinates; the HR origin is scale times this
  int origin_y = 0;
};

/// Uniform random LR origin. Returns nullopt when the image is too small for
/// the requested patch, so the caller can draw another image.
std::optional<SamplePair> sample_patch(const ImageU8& hr, const ImageU8& lr, int scale, int hr_patch,
                                       std::mt19937_64& rng, const std::string& source_id = {});

struct AugmentFlags {
  bool hflip = false;
  bool vflip = false;
  bool rot90 = false;
};

/// Applies h-flip, v-flip, then a 90-degree rotation to both patches.
SamplePair augment(const SamplePair& pair, const AugmentFlags& flags);
/// Three independent fair coins.
SamplePair augment(const SamplePair& pair, std::mt19937_64& rng);

/// Single-image versions of the transforms (1 x C x P x P).
Tensor<float> hflip(const Tensor<float>& t);
Tensor<float> vflip(const Tensor<float>& t);
Tensor<float> rot90(const Tensor<float>& t);

/// Per-channel mean over every pixel of every manifest image.
NormStats compute_mean(const DatasetManifest& manifest);
NormStats compute_mean(const std::vector<ImageU8>& images);

/// 1 x 3 x h x w tensor of pixel values minus the channel means.
Tensor<float> normalize(const ImageU8& img, const NormStats& stats);
/// Adds the means back, rounds and clamps to 8 bits. Expects 1 x 3 x h x w.
ImageU8 denormalize(const Tensor<float>& t, const NormStats& stats);

/// SplitMix64 mix of the inputs; seeds per-sample generators so every sample
/// depends only on (seed, epoch, iteration, slot).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t iter, std::uint64_t slot);

/// Preloaded HR/LR training images.
struct TrainingImage {
  std::string id;
  ImageU8 hr;  // modcropped
  ImageU8 lr;
};

std::vector<TrainingImage> load_training_set(const DatasetManifest& manifest, int scale);

struct Batch {
  Tensor<float> lr;  // n x 3 x p/s x p/s, mean-subtracted
  Tensor<float> hr;  // n x 3 x p x p, mean-subtracted
};

/// Deterministic batches: images chosen uniformly with replacement, one
/// random crop and augmentation per slot.
class BatchSampler {
 public:
  BatchSampler(const std::vector<TrainingImage>& images, int scale, int hr_patch, NormStats stats,
               std::uint64_t seed, bool augment = true);

  Batch batch(int epoch, int iter, int batch_size) const;

 private:
  const std::vector<TrainingImage>& images_;
  int scale_;
  int hr_patch_;
  NormStats stats_;
  std::uint64_t seed_;
  bool augment_;
};

}  // namespace amsr
