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

#include "amsr/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "amsr/errors.hpp"

namespace amsr {
namespace {

constexpr int kWindow = 11;

void check_pair(const ImagePlanar& a, const ImagePlanar& b, int shave, const char* op) {
  if (a.width != b.width || a.height != b.height) {
    throw ContractError(std::string(op) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height) + ")");
  }
  if (a.plane_count() < 1 || b.plane_count() < 1) throw ContractError(std::string(op) + ": empty image");
  if (shave < 0 || a.width <= 2 * shave || a.height <= 2 * shave) {
    throw ContractError(std::string(op) + ": shave " + std::to_string(shave) + " leaves nothing of a " +
                        std::to_string(a.width) + "x" + std::to_string(a.height) + " image");
  }
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - (kWindow - 1) / 2.0;
    g[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * 1.5 * 1.5));
    total += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-region separable filtering of a w x h buffer.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h) {
  static const auto g = gaussian_taps();
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> mid(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[static_cast<std::size_t>(k)] * src[static_cast<std::size_t>(y) * w + x + k];
      mid[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[static_cast<std::size_t>(k)] * mid[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

std::vector<double> crop(const ImagePlanar& img, int shave) {
  const int w = img.width - 2 * shave;
  const int h = img.height - 2 * shave;
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(y) * w + x] = img.at(0, x + shave, y + shave);
  }
  return out;
}

}  // namespace

double psnr(const ImagePlanar& a, const ImagePlanar& b, int shave) {
  check_pair(a, b, shave, "psnr");
  double se = 0.0;
  std::size_t count = 0;
  for (int y = shave; y < a.height - shave; ++y) {
    for (int x = shave; x < a.width - shave; ++x) {
      const double d = a.at(0, x, y) - b.at(0, x, y);
      se += d * d;
      ++count;
    }
  }
  const double mse = se / static_cast<double>(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const ImagePlanar& a, const ImagePlanar& b, int shave) {
  check_pair(a, b, shave, "ssim");
  const int w = a.width - 2 * shave;
  const int h = a.height - 2 * shave;
  if (w < kWindow || h < kWindow) {
    throw ContractError("ssim: compared region " + std::to_string(w) + "x" + std::to_string(h) +
                        " is smaller than the 11x11 window");
  }
  const std::vector<double> x = crop(a, shave);
  const std::vector<double> y = crop(b, shave);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = filter_valid(x, w, h);
  const auto mu_y = filter_valid(y, w, h);
  const auto e_xx = filter_valid(xx, w, h);
  const auto e_yy = filter_valid(yy, w, h);
  const auto e_xy = filter_valid(xy, w, h);
  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double sxx = e_xx[i] - mx * mx;
    const double syy = e_yy[i] - my * my;
    const double sxy = e_xy[i] - mx * my;
    total += ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

MetricRecord evaluate_pair(const ImageU8& hr, const ImageU8& sr, int scale, const std::string& image_id) {
  if (hr.width != sr.width || hr.height != sr.height) {
    throw ContractError("evaluate_pair: HR is " + std::to_string(hr.width) + "x" + std::to_string(hr.height) +
                        " but SR is " + std::to_string(sr.width) + "x" + std::to_string(sr.height));
  }
  const ImagePlanar yh = luma(hr);
  const ImagePlanar ys = luma(sr);
  MetricRecord rec;
  rec.image_id = image_id;
  rec.scale = scale;
  rec.shave = scale;
  rec.psnr_db = psnr(yh, ys, scale);
  rec.ssim = ssim(yh, ys, scale);
  return rec;
}

Aggregate aggregate(const std::vector<MetricRecord>& records) {
  Aggregate agg;
  agg.count = static_cast<int>(records.size());
  double psnr_total = 0.0;
  double ssim_total = 0.0;
  int finite = 0;
  for (const auto& r : records) {
    ssim_total += r.ssim;
    if (std::isinf(r.psnr_db)) {
      ++agg.excluded_infinite;
      continue;
    }
    psnr_total += r.psnr_db;
    ++finite;
  }
  agg.psnr_db = finite > 0 ? psnr_total / finite : std::numeric_limits<double>::infinity();
  agg.ssim = records.empty() ? 0.0 : ssim_total / static_cast<double>(records.size());
  return agg;
}

}  // namespace amsr
