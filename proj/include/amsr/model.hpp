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

// The super-resolution network:
//
//   LR -> shallow features (3x3 conv, 1x1 chain, local residual)
//      -> G deep blocks, each MSFF -> LS_AM -> MSFF plus a block residual
//      -> 3x3 conv to 3*s*s channels -> pixel shuffle -> SR
//
// LS_AM chains M attention modules with a long skip. Every attention module
// runs a non-local branch and a second-order (covariance) channel gate and
// fuses them with a 1x1 conv plus residual.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "amsr/tensor.hpp"

namespace amsr {

struct BranchFlags {
  bool nonlocal = true;
  bool second_order = true;
  bool multiscale = true;
  bool operator==(const BranchFlags&) const = default;
};

struct ModelConfig {
  int scale = 2;
  int channels = 64;
  int n_amms = 1;
  int n_am = 4;
  int nl_reduction = 2;
  int so_reduction = 16;
  int sf_layers = 2;
  BranchFlags flags;
  /// RGB mean subtracted from inputs and re-added to outputs (0-255 scale).
  std::array<double, 3> mean_rgb{114.444, 111.4605, 103.02};

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  /// Sorted key=value lines; the checkpoint header and config hash use it.
  std::string canonical_text() const;
  static ModelConfig from_canonical_text(const std::string& text);

  /// C=16, M=2, G=1 configuration used by the smoke tests.
  static ModelConfig toy(int scale = 2);

  bool operator==(const ModelConfig&) const = default;
};

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

/// One convolution in the network, in construction order.
struct LayerSpec {
  std::string path;  // weights live at path + ".w", bias at path + ".b"
  int out_channels;
  int in_channels;
  int kernel;
};

std::vector<LayerSpec> layer_specs(const ModelConfig& config);

template <typename T>
struct Param {
  std::vector<std::int64_t> dims;  // recorded rank and extents
  Tensor<T> value;                 // stored as a 4-D tensor
};

/// Named weights of every layer, ordered by path.
template <typename T>
class ModelParams {
 public:
  using Map = std::map<std::string, Param<T>>;

  void set(const std::string& path, std::vector<std::int64_t> dims, Tensor<T> value);
  /// Replaces the values of an existing entry; the shape must not change.
  void replace(const std::string& path, Tensor<T> value);

  const Tensor<T>& operator[](const std::string& path) const;
  const Param<T>& param(const std::string& path) const;
  bool contains(const std::string& path) const { return map_.count(path) != 0; }
  std::vector<std::string> paths() const;
  std::size_t size() const { return map_.size(); }
  /// Total number of scalar weights.
  std::int64_t count() const;
  const Map& entries() const { return map_; }

  /// Copy whose tensors are leaves of `tape`.
  ModelParams attach(Tape<T>& tape) const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    for (const auto& [path, p] : map_) {
      std::vector<U> v(p.value.values().begin(), p.value.values().end());
      out.set(path, p.dims, Tensor<U>(p.value.shape(), std::move(v)));
    }
    return out;
  }

  bool operator==(const ModelParams& other) const;

 private:
  Map map_;
};

/// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero biases.
template <typename T>
ModelParams<T> build_model(const ModelConfig& config, std::uint64_t seed);

/// Forward passes over a fixed configuration and parameter set. Every input
/// is expected to be mean-subtracted already.
template <typename T>
class Model {
 public:
  Model(ModelConfig config, ModelParams<T> params);

  /// True when neither attention branch is enabled and LS_AM is left out.
  bool attention_disabled() const;

  const ModelConfig& config() const { return config_; }

  Tensor<T> forward_sf(const Tensor<T>& lr) const;
  Tensor<T> forward_msff(const Tensor<T>& x, const std::string& prefix) const;
  Tensor<T> forward_nonlocal(const Tensor<T>& x, const std::string& prefix) const;
  Tensor<T> forward_second_order(const Tensor<T>& x, const std::string& prefix) const;
  Tensor<T> forward_am(const Tensor<T>& x, const std::string& prefix) const;
  Tensor<T> forward_ls_am(const Tensor<T>& x, const std::string& prefix) const;
  Tensor<T> forward_amms(const Tensor<T>& x, const std::string& prefix) const;
  /// All G deep blocks in sequence.
  Tensor<T> forward_deep(const Tensor<T>& x) const;
  Tensor<T> forward_reconstruct(const Tensor<T>& features) const;
  Tensor<T> forward_full(const Tensor<T>& lr) const;

 private:
  Tensor<T> conv(const Tensor<T>& x, const std::string& path) const;
  void require_channels(const Tensor<T>& x, const char* op) const;

  ModelConfig config_;
  ModelParams<T> params_;
};

}  // namespace amsr
