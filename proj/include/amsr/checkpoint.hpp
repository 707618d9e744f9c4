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

// Checkpoint layout (all integers u32 little-endian):
//
//   "AMSR" | version | len | canonical config text
//   then, for every parameter path in sorted order:
//   len | path | rank | dims[rank] | f32 values (little-endian)

#pragma once

#include <cstdint>
#include <filesystem>

#include "amsr/model.hpp"

namespace amsr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams<float> params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams<float>& params);

/// Loads and validates against the embedded config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads and validates every shape against `expected`; the first path whose
/// shape disagrees is named in the IntegrityError.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

/// Raises IntegrityError unless `params` has exactly the paths and shapes
/// `config` implies.
void verify_params(const ModelConfig& config, const ModelParams<float>& params);

}  // namespace amsr
