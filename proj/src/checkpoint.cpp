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

#include "amsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "amsr/binary_io.hpp"

namespace amsr {

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams<float>& params) {
  verify_params(config, params);
  ByteWriter out;
  out.raw("AMSR", 4);
  out.u32(kCheckpointVersion);
  out.str(config.canonical_text());
  for (const auto& [name, p] : params.entries()) {
    out.str(name);
    out.u32(static_cast<std::uint32_t>(p.dims.size()));
    for (auto d : p.dims) out.u32(static_cast<std::uint32_t>(d));
    for (float v : p.value.values()) out.f32(v);
  }
  out.write_file(path);
}

namespace {

Checkpoint parse(const std::filesystem::path& path) {
  ByteReader in(ByteReader::read_file(path), path.string());
  char magic[4];
  if (in.remaining() < 4) throw IntegrityError(path.string() + ": truncated checkpoint header");
  in.raw(magic, 4);
  if (std::memcmp(magic, "AMSR", 4) != 0) throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  try {
    ck.config = ModelConfig::from_canonical_text(in.str());
  } catch (const ConfigError& e) {
    throw IntegrityError(path.string() + ": bad embedded config: " + e.what());
  }
  while (in.remaining() > 0) {
    const std::string name = in.str();
    const std::uint32_t rank = in.u32();
    if (rank < 1 || rank > 4) throw IntegrityError(path.string() + ": parameter " + name + " has rank " + std::to_string(rank));
    std::vector<std::int64_t> dims;
    std::int64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      dims.push_back(in.u32());
      count *= dims.back();
    }
    if (static_cast<std::uint64_t>(count) * 4 > in.remaining()) {
      throw IntegrityError(path.string() + ": truncated data for parameter " + name);
    }
    std::vector<float> values(static_cast<std::size_t>(count));
    for (float& v : values) v = in.f32();
    Shape shape{1, 1, 1, 1};
    if (rank == 4) {
      shape = Shape{dims[0], dims[1], dims[2], dims[3]};
    } else {
      shape.n = count;
    }
    if (ck.params.contains(name)) throw IntegrityError(path.string() + ": duplicate parameter " + name);
    ck.params.set(name, dims, Tensor<float>(shape, std::move(values)));
  }
  return ck;
}

}  // namespace

void verify_params(const ModelConfig& config, const ModelParams<float>& params) {
  std::size_t expected_count = 0;
  for (const LayerSpec& spec : layer_specs(config)) {
    const std::vector<std::int64_t> wd{spec.out_channels, spec.in_channels, spec.kernel, spec.kernel};
    const std::vector<std::int64_t> bd{spec.out_channels};
    for (const auto& [name, dims] : {std::pair{spec.path + ".w", wd}, std::pair{spec.path + ".b", bd}}) {
      ++expected_count;
      if (!params.contains(name)) throw IntegrityError("parameter " + name + " is missing");
      if (params.param(name).dims != dims) {
        std::string got;
        for (auto d : params.param(name).dims) got += (got.empty() ? "" : "x") + std::to_string(d);
        throw IntegrityError("parameter " + name + " has shape " + got + " which the configuration does not allow");
      }
    }
  }
  if (params.size() != expected_count) {
    for (const auto& name : params.paths()) {
      bool known = false;
      for (const LayerSpec& spec : layer_specs(config)) {
        if (name == spec.path + ".w" || name == spec.path + ".b") known = true;
      }
      if (!known) throw IntegrityError("parameter " + name + " is not part of the configuration");
    }
  }
  for (const auto& [name, p] : params.entries()) {
    if (!p.value.all_finite()) throw IntegrityError("parameter " + name + " holds non-finite values");
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Checkpoint ck = parse(path);
  verify_params(ck.config, ck.params);
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = parse(path);
  try {
    verify_params(expected, ck.params);
  } catch (const IntegrityError& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
  if (ck.config.scale != expected.scale) {
    throw IntegrityError(path.string() + ": checkpoint is for scale " + std::to_string(ck.config.scale) +
                         ", expected " + std::to_string(expected.scale));
  }
  return ck;
}

}  // namespace amsr
