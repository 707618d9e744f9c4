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

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "amsr/errors.hpp"
#include "amsr/image.hpp"

namespace amsr {

ImageU8::ImageU8(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {
  if (w < 0 || h < 0) throw ContractError("negative image dimensions");
}

ImagePlanar::ImagePlanar(int w, int h, int plane_count, double fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw ContractError("negative image dimensions");
  if (plane_count != 1 && plane_count != 3) throw ContractError("planar images have 1 or 3 planes");
  planes.assign(static_cast<std::size_t>(plane_count),
                std::vector<double>(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill));
}

std::uint8_t to_u8(double v) {
  const double r = v < 0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

ImagePlanar to_planar(const ImageU8& img) {
  ImagePlanar out(img.width, img.height, 3);
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out.planes[c][i] = img.pixels[i * 3 + c];
  }
  return out;
}

ImageU8 to_rgb8(const ImagePlanar& img) {
  if (img.plane_count() != 3) throw ContractError("to_rgb8 needs three planes");
  ImageU8 out(img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = to_u8(img.planes[c][i]);
  }
  return out;
}

// ---------------------------------------------------------------- colour

namespace {

constexpr std::array<std::array<double, 3>, 3> kRgbToYcc{{
    {65.481, 128.553, 24.966},
    {-37.797, -74.203, 112.0},
    {112.0, -93.786, -18.214},
}};
constexpr std::array<double, 3> kYccOffset{16.0, 128.0, 128.0};

std::array<std::array<double, 3>, 3> inverse_ycc() {
  std::array<std::array<double, 3>, 3> m{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m[r][c] = kRgbToYcc[r][c] / 255.0;
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  std::array<std::array<double, 3>, 3> inv{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      // cofactor of m[c][r]
      const int r0 = (c + 1) % 3, r1 = (c + 2) % 3;
      const int c0 = (r + 1) % 3, c1 = (r + 2) % 3;
      inv[r][c] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
    }
  }
  return inv;
}

}  // namespace

ImagePlanar rgb_to_ycbcr(const ImageU8& img) {
  ImagePlanar out(img.width, img.height, 3);
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.pixels[i * 3], g = img.pixels[i * 3 + 1], b = img.pixels[i * 3 + 2];
    for (std::size_t k = 0; k < 3; ++k) {
      out.planes[k][i] = kYccOffset[k] + (kRgbToYcc[k][0] * r + kRgbToYcc[k][1] * g + kRgbToYcc[k][2] * b) / 255.0;
    }
  }
  return out;
}

ImageU8 ycbcr_to_rgb(const ImagePlanar& ycc) {
  if (ycc.plane_count() != 3) throw ContractError("ycbcr_to_rgb needs three planes");
  static const auto inv = inverse_ycc();
  ImageU8 out(ycc.width, ycc.height);
  const std::size_t n = static_cast<std::size_t>(ycc.width) * static_cast<std::size_t>(ycc.height);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = ycc.planes[0][i] - kYccOffset[0];
    const double cb = ycc.planes[1][i] - kYccOffset[1];
    const double cr = ycc.planes[2][i] - kYccOffset[2];
    for (std::size_t k = 0; k < 3; ++k) out.pixels[i * 3 + k] = to_u8(inv[k][0] * y + inv[k][1] * cb + inv[k][2] * cr);
  }
  return out;
}

ImagePlanar luma(const ImageU8& img) {
  ImagePlanar out(img.width, img.height, 1);
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.pixels[i * 3], g = img.pixels[i * 3 + 1], b = img.pixels[i * 3 + 2];
    out.planes[0][i] = kYccOffset[0] + (kRgbToYcc[0][0] * r + kRgbToYcc[0][1] * g + kRgbToYcc[0][2] * b) / 255.0;
  }
  return out;
}

// ---------------------------------------------------------------- resize

double cubic_kernel(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax < 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

namespace {

// Taps of every output sample along one axis.
struct AxisWeights {
  int taps = 0;
  std::vector<int> index;     // out_len * taps
  std::vector<double> weight;  // out_len * taps
};

int map_index(int idx, int len, EdgeMode edge) {
  if (edge == EdgeMode::kClamp) return std::clamp(idx, 0, len - 1);
  const int period = 2 * len;
  int m = idx % period;
  if (m < 0) m += period;
  return m < len ? m : period - 1 - m;
}

AxisWeights axis_weights(int in_len, int out_len, bool antialias, EdgeMode edge) {
  const double scale = static_cast<double>(out_len) / static_cast<double>(in_len);
  const bool stretch = antialias && scale < 1.0;
  const double width = stretch ? 4.0 / scale : 4.0;
  AxisWeights aw;
  aw.taps = static_cast<int>(std::ceil(width)) + 2;
  aw.index.resize(static_cast<std::size_t>(out_len) * aw.taps);
  aw.weight.resize(aw.index.size());
  for (int i = 0; i < out_len; ++i) {
    const double u = (i + 0.5) / scale - 0.5;
    const int left = static_cast<int>(std::floor(u - width / 2.0));
    double total = 0.0;
    for (int j = 0; j < aw.taps; ++j) {
      const int idx = left + j;
      const double d = u - idx;
      const double w = stretch ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
      aw.weight[static_cast<std::size_t>(i * aw.taps + j)] = w;
      aw.index[static_cast<std::size_t>(i * aw.taps + j)] = map_index(idx, in_len, edge);
      total += w;
    }
    for (int j = 0; j < aw.taps; ++j) aw.weight[static_cast<std::size_t>(i * aw.taps + j)] /= total;
  }
  return aw;
}

}  // namespace

ImagePlanar bicubic_resize(const ImagePlanar& img, int out_w, int out_h, bool antialias, EdgeMode edge) {
  if (out_w < 1 || out_h < 1) throw ContractError("bicubic_resize: output dimensions must be >= 1");
  if (img.width < 1 || img.height < 1) throw ContractError("bicubic_resize: empty input image");
  const AxisWeights hx = axis_weights(img.width, out_w, antialias, edge);
  const AxisWeights vy = axis_weights(img.height, out_h, antialias, edge);

  ImagePlanar out(out_w, out_h, img.plane_count());
  std::vector<double> mid(static_cast<std::size_t>(out_w) * static_cast<std::size_t>(img.height));
  for (int p = 0; p < img.plane_count(); ++p) {
    const std::vector<double>& src = img.planes[static_cast<std::size_t>(p)];
    for (int y = 0; y < img.height; ++y) {
      const double* row = src.data() + static_cast<std::size_t>(y) * img.width;
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (int j = 0; j < hx.taps; ++j) {
          const std::size_t k = static_cast<std::size_t>(x * hx.taps + j);
          acc += hx.weight[k] * row[hx.index[k]];
        }
        mid[static_cast<std::size_t>(y) * out_w + x] = acc;
      }
    }
    std::vector<double>& dst = out.planes[static_cast<std::size_t>(p)];
    for (int y = 0; y < out_h; ++y) {
      double* orow = dst.data() + static_cast<std::size_t>(y) * out_w;
      std::fill(orow, orow + out_w, 0.0);
      for (int j = 0; j < vy.taps; ++j) {
        const std::size_t k = static_cast<std::size_t>(y * vy.taps + j);
        const double w = vy.weight[k];
        const double* mrow = mid.data() + static_cast<std::size_t>(vy.index[k]) * out_w;
        for (int x = 0; x < out_w; ++x) orow[x] += w * mrow[x];
      }
    }
  }
  return out;
}

ImageU8 bicubic_resize(const ImageU8& img, int out_w, int out_h, bool antialias, EdgeMode edge) {
  return to_rgb8(bicubic_resize(to_planar(img), out_w, out_h, antialias, edge));
}

ImageU8 modcrop(const ImageU8& img, int scale) {
  if (scale < 1) throw ContractError("modcrop: scale must be >= 1");
  const int w = img.width / scale * scale;
  const int h = img.height / scale * scale;
  if (w == 0 || h == 0) {
    throw ContractError("modcrop: " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " image is smaller than scale " + std::to_string(scale));
  }
  ImageU8 out(w, h);
  for (int y = 0; y < h; ++y) {
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(y) * img.width * 3, w * 3,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * w * 3);
  }
  return out;
}

ImagePlanar modcrop(const ImagePlanar& img, int scale) {
  if (scale < 1) throw ContractError("modcrop: scale must be >= 1");
  const int w = img.width / scale * scale;
  const int h = img.height / scale * scale;
  if (w == 0 || h == 0) throw ContractError("modcrop: image is smaller than scale " + std::to_string(scale));
  ImagePlanar out(w, h, img.plane_count());
  for (int p = 0; p < img.plane_count(); ++p) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(p, x, y) = img.at(p, x, y);
    }
  }
  return out;
}

}  // namespace amsr
