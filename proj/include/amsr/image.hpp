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

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace amsr {

/// Interleaved 8-bit RGB, row-major.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  ImageU8() = default;
  ImageU8(int w, int h, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c) { return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[static_cast<std::size_t>((y * width + x) * 3 + c)]; }
  bool operator==(const ImageU8&) const = default;
};

/// Floating-point planes (1 or 3), values nominally in [0, 255].
struct ImagePlanar {
  int width = 0;
  int height = 0;
  std::vector<std::vector<double>> planes;

  ImagePlanar() = default;
  ImagePlanar(int w, int h, int plane_count, double fill = 0.0);

  double& at(int p, int x, int y) { return planes[static_cast<std::size_t>(p)][static_cast<std::size_t>(y * width + x)]; }
  double at(int p, int x, int y) const { return planes[static_cast<std::size_t>(p)][static_cast<std::size_t>(y * width + x)]; }
  int plane_count() const { return static_cast<int>(planes.size()); }
};

// PNG. Grayscale is replicated to RGB, alpha dropped, palettes expanded and
// 16-bit samples truncated to their high byte.
ImageU8 load_png(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const ImageU8& img);

/// Round half away from zero, then clamp to [0, 255].
std::uint8_t to_u8(double v);

ImagePlanar to_planar(const ImageU8& img);
ImageU8 to_rgb8(const ImagePlanar& img);

// BT.601 studio swing: Y in [16, 235], Cb/Cr centred on 128.
ImagePlanar rgb_to_ycbcr(const ImageU8& img);
ImageU8 ycbcr_to_rgb(const ImagePlanar& ycbcr);
/// Luma plane only.
ImagePlanar luma(const ImageU8& img);

enum class EdgeMode {
  kReflect,  // half-sample symmetric, as the reference resizer does
  kClamp,    // replicate the border sample
};

/// Keys cubic kernel, a = -0.5.
double cubic_kernel(double x);

/// Separable bicubic resampling (horizontal pass, then vertical) in f64.
/// Source coordinate of output i is (i + 0.5) / scale - 0.5; with antialias
/// and scale < 1 the kernel is stretched by 1/scale. Taps are normalised to
/// sum to one.
ImagePlanar bicubic_resize(const ImagePlanar& img, int out_w, int out_h, bool antialias,
                           EdgeMode edge = EdgeMode::kReflect);

/// Resizes each RGB channel and rounds back to 8 bits.
ImageU8 bicubic_resize(const ImageU8& img, int out_w, int out_h, bool antialias,
                       EdgeMode edge = EdgeMode::kReflect);

/// Crops to multiples of `scale` from the top-left.
ImageU8 modcrop(const ImageU8& img, int scale);
ImagePlanar modcrop(const ImagePlanar& img, int scale);

}  // namespace amsr
