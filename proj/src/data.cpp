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

#include "amsr/data.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "amsr/errors.hpp"

namespace amsr {

// ---------------------------------------------------------------- manifest

DatasetManifest DatasetManifest::parse(const std::string& text, const std::filesystem::path& base_dir,
                                       const std::string& default_name) {
  DatasetManifest m;
  m.name = default_name;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
    if (line[0] == '@') {
      std::istringstream d(line.substr(1));
      std::string key;
      d >> key;
      if (key == "name") {
        std::getline(d >> std::ws, m.name);
      } else if (key == "lr") {
        int scale = 0;
        std::string dir;
        if (!(d >> scale >> dir) || scale < 2 || scale > 4) {
          throw ContractError("manifest line " + std::to_string(lineno) + ": expected '@lr <scale> <dir>'");
        }
        m.lr_dirs[scale] = base_dir / dir;
      } else {
        throw ContractError("manifest line " + std::to_string(lineno) + ": unknown directive @" + key);
      }
      continue;
    }
    const std::filesystem::path p = base_dir / line;
    if (!seen.insert(p.lexically_normal().string()).second) {
      throw ContractError("manifest line " + std::to_string(lineno) + ": duplicate entry " + line);
    }
    m.entries.push_back(p);
  }
  if (m.entries.empty()) throw ContractError("manifest '" + m.name + "' lists no images");
  return m;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read manifest " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.parent_path(), path.stem().string());
}

std::string lr_file_name(const std::filesystem::path& hr_path, int scale) {
  return hr_path.stem().string() + "_x" + std::to_string(scale) + ".png";
}

// ---------------------------------------------------------------- degradation

ImageU8 make_lr(const ImageU8& hr, int scale) {
  if (scale < 2 || scale > 4) throw ContractError("make_lr: scale must be 2, 3 or 4");
  const ImageU8 cropped = modcrop(hr, scale);
  return bicubic_resize(cropped, cropped.width / scale, cropped.height / scale, true);
}

ImageU8 load_or_make_lr(const DatasetManifest& manifest, std::size_t index, const ImageU8& hr_cropped, int scale) {
  auto it = manifest.lr_dirs.find(scale);
  if (it == manifest.lr_dirs.end()) return make_lr(hr_cropped, scale);
  const std::filesystem::path p = it->second / lr_file_name(manifest.entries.at(index), scale);
  ImageU8 lr = load_png(p);
  if (lr.width * scale != hr_cropped.width || lr.height * scale != hr_cropped.height) {
    throw IntegrityError(p.string() + ": LR size does not match the HR image at scale " + std::to_string(scale));
  }
  return lr;
}

// ---------------------------------------------------------------- patches

namespace {

Tensor<float> crop_tensor(const ImageU8& img, int x0, int y0, int size) {
  std::vector<float> v(static_cast<std::size_t>(3) * size * size);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        v[static_cast<std::size_t>((c * size + y) * size + x)] = img.at(x0 + x, y0 + y, c);
      }
    }
  }
  return Tensor<float>(Shape{1, 3, size, size}, std::move(v));
}

template <typename F>
Tensor<float> remap(const Tensor<float>& t, F src_of) {
  const Shape s = t.shape();
  if (s.h != s.w) throw ContractError("augment: patches must be square, got " + s.str());
  std::vector<float> v(static_cast<std::size_t>(s.numel()));
  const std::int64_t n = s.h;
  for (std::int64_t p = 0; p < s.n * s.c; ++p) {
    for (std::int64_t y = 0; y < n; ++y) {
      for (std::int64_t x = 0; x < n; ++x) {
        const auto [sx, sy] = src_of(x, y, n);
        v[static_cast<std::size_t>((p * n + y) * n + x)] = t[(p * n + sy) * n + sx];
      }
    }
  }
  return Tensor<float>(s, std::move(v));
}

}  // namespace

std::optional<SamplePair> sample_patch(const ImageU8& hr, const ImageU8& lr, int scale, int hr_patch,
                                       std::mt19937_64& rng, const std::string& source_id) {
  if (hr_patch % scale != 0) {
    throw ContractError("sample_patch: patch " + std::to_string(hr_patch) + " not divisible by scale " +
                        std::to_string(scale));
  }
  const int lp = hr_patch / scale;
  if (lr.width < lp || lr.height < lp || hr.width < lr.width * scale || hr.height < lr.height * scale) {
    return std::nullopt;
  }
  std::uniform_int_distribution<int> dx(0, lr.width - lp);
  std::uniform_int_distribution<int> dy(0, lr.height - lp);
  SamplePair pair;
  pair.origin_x = dx(rng);
  pair.origin_y = dy(rng);
  pair.source_id = source_id;
  pair.lr = crop_tensor(lr, pair.origin_x, pair.origin_y, lp);
  pair.hr = crop_tensor(hr, pair.origin_x * scale, pair.origin_y * scale, hr_patch);
  return pair;
}

Tensor<float> hflip(const Tensor<float>& t) {
  return remap(t, [](std::int64_t x, std::int64_t y, std::int64_t n) { return std::pair{n - 1 - x, y}; });
}

Tensor<float> vflip(const Tensor<float>& t) {
  return remap(t, [](std::int64_t x, std::int64_t y, std::int64_t n) { return std::pair{x, n - 1 - y}; });
}

// Counter-clockwise: out(x, y) = in(n - 1 - y, x).
Tensor<float> rot90(const Tensor<float>& t) {
  return remap(t, [](std::int64_t x, std::int64_t y, std::int64_t n) { return std::pair{n - 1 - y, x}; });
}

SamplePair augment(const SamplePair& pair, const AugmentFlags& flags) {
  SamplePair out = pair;
  if (flags.hflip) {
    out.hr = hflip(out.hr);
    out.lr = hflip(out.lr);
  }
  if (flags.vflip) {
    out.hr = vflip(out.hr);
    out.lr = vflip(out.lr);
  }
  if (flags.rot90) {
    out.hr = rot90(out.hr);
    out.lr = rot90(out.lr);
  }
  return out;
}

SamplePair augment(const SamplePair& pair, std::mt19937_64& rng) {
  AugmentFlags f;
  f.hflip = (rng() & 1u) != 0;
  f.vflip = (rng() & 1u) != 0;
  f.rot90 = (rng() & 1u) != 0;
  return augment(pair, f);
}

// ---------------------------------------------------------------- normalisation

NormStats compute_mean(const std::vector<ImageU8>& images) {
  if (images.empty()) throw ContractError("compute_mean: no images");
  std::array<double, 3> total{0.0, 0.0, 0.0};
  double count = 0.0;
  for (const ImageU8& img : images) {
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 3; ++c) total[c] += img.pixels[i * 3 + c];
    }
    count += static_cast<double>(n);
  }
  if (count == 0.0) throw ContractError("compute_mean: images hold no pixels");
  NormStats s;
  for (std::size_t c = 0; c < 3; ++c) s.mean_rgb[c] = total[c] / count;
  return s;
}

NormStats compute_mean(const DatasetManifest& manifest) {
  if (manifest.entries.empty()) throw ContractError("compute_mean: empty manifest");
  std::array<double, 3> total{0.0, 0.0, 0.0};
  double count = 0.0;
  for (const auto& p : manifest.entries) {
    const ImageU8 img = load_png(p);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 3; ++c) total[c] += img.pixels[i * 3 + c];
    }
    count += static_cast<double>(n);
  }
  NormStats s;
  for (std::size_t c = 0; c < 3; ++c) s.mean_rgb[c] = total[c] / count;
  return s;
}

Tensor<float> normalize(const ImageU8& img, const NormStats& stats) {
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  std::vector<float> v(plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      v[c * plane + i] = static_cast<float>(img.pixels[i * 3 + c] - stats.mean_rgb[c]);
    }
  }
  return Tensor<float>(Shape{1, 3, img.height, img.width}, std::move(v));
}

ImageU8 denormalize(const Tensor<float>& t, const NormStats& stats) {
  const Shape s = t.shape();
  if (s.n != 1 || s.c != 3) throw ShapeError("denormalize: expected 1x3xHxW, got " + s.str());
  ImageU8 img(static_cast<int>(s.w), static_cast<int>(s.h));
  const std::size_t plane = static_cast<std::size_t>(s.plane());
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      img.pixels[i * 3 + c] = to_u8(static_cast<double>(t[static_cast<std::int64_t>(c * plane + i)]) + stats.mean_rgb[c]);
    }
  }
  return img;
}

// ---------------------------------------------------------------- batches

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t iter, std::uint64_t slot) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ epoch);
  h = mix(h ^ iter);
  return mix(h ^ slot);
}

std::vector<TrainingImage> load_training_set(const DatasetManifest& manifest, int scale) {
  std::vector<TrainingImage> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    TrainingImage ti;
    ti.id = manifest.entries[i].stem().string();
    ti.hr = modcrop(load_png(manifest.entries[i]), scale);
    ti.lr = load_or_make_lr(manifest, i, ti.hr, scale);
    out.push_back(std::move(ti));
  }
  return out;
}

BatchSampler::BatchSampler(const std::vector<TrainingImage>& images, int scale, int hr_patch, NormStats stats,
                           std::uint64_t seed, bool augment)
    : images_(images), scale_(scale), hr_patch_(hr_patch), stats_(stats), seed_(seed), augment_(augment) {
  if (images_.empty()) throw ContractError("BatchSampler: no training images");
  bool any = false;
  for (const auto& img : images_) any = any || (img.lr.width >= hr_patch / scale && img.lr.height >= hr_patch / scale);
  if (!any) throw ContractError("BatchSampler: every training image is smaller than the patch size");
}

Batch BatchSampler::batch(int epoch, int iter, int batch_size) const {
  const int lp = hr_patch_ / scale_;
  std::vector<float> lr(static_cast<std::size_t>(batch_size) * 3 * lp * lp);
  std::vector<float> hr(static_cast<std::size_t>(batch_size) * 3 * hr_patch_ * hr_patch_);
  for (int k = 0; k < batch_size; ++k) {
    std::mt19937_64 rng(derive_seed(seed_, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(iter),
                                    static_cast<std::uint64_t>(k)));
    std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
    std::optional<SamplePair> pair;
    while (!pair) {
      const TrainingImage& img = images_[pick(rng)];
      pair = sample_patch(img.hr, img.lr, scale_, hr_patch_, rng, img.id);
      if (!pair) std::cerr << "warning: " << img.id << " is smaller than the patch, drawing another image\n";
    }
    SamplePair p = augment_ ? augment(*pair, rng) : *pair;
    for (std::size_t c = 0; c < 3; ++c) {
      const float m = static_cast<float>(stats_.mean_rgb[c]);
      const std::size_t lplane = static_cast<std::size_t>(lp) * lp;
      const std::size_t hplane = static_cast<std::size_t>(hr_patch_) * hr_patch_;
      for (std::size_t i = 0; i < lplane; ++i) {
        lr[(static_cast<std::size_t>(k) * 3 + c) * lplane + i] = p.lr[static_cast<std::int64_t>(c * lplane + i)] - m;
      }
      for (std::size_t i = 0; i < hplane; ++i) {
        hr[(static_cast<std::size_t>(k) * 3 + c) * hplane + i] = p.hr[static_cast<std::int64_t>(c * hplane + i)] - m;
      }
    }
  }
  return Batch{Tensor<float>(Shape{batch_size, 3, lp, lp}, std::move(lr)),
               Tensor<float>(Shape{batch_size, 3, hr_patch_, hr_patch_}, std::move(hr))};
}

}  // namespace amsr
