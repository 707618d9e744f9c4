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

// Quality metrics on single-plane images with `shave` border pixels removed.

#pragma once

#include <string>
#include <vector>

#include "amsr/image.hpp"

namespace amsr {

struct MetricRecord {
  std::string image_id;
  double psnr_db = 0.0;  // +inf for identical regions
  double ssim = 0.0;
  int scale = 0;
  int shave = 0;
};

/// 10 log10(255^2 / MSE) over the shaved region of plane 0.
double psnr(const ImagePlanar& a, const ImagePlanar& b, int shave);

/// Mean single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 255, valid-region filtering only.
double ssim(const ImagePlanar& a, const ImagePlanar& b, int shave);

/// Both images go to BT.601 luma; shave = scale.
MetricRecord evaluate_pair(const ImageU8& hr, const ImageU8& sr, int scale, const std::string& image_id = {});

struct Aggregate {
  double psnr_db = 0.0;
  double ssim = 0.0;
  int count = 0;
  int excluded_infinite = 0;  // records left out of the PSNR mean
};

/// Arithmetic means; records with infinite PSNR are excluded from the PSNR mean.
Aggregate aggregate(const std::vector<MetricRecord>& records);

}  // namespace amsr
