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

// Finite-difference verification of tape gradients (f64 only).

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "amsr/tensor.hpp"

namespace amsr {

/// Maps input tensors to a scalar. Must be a pure function of its inputs: it
/// is called with tracked inputs once and with untracked, perturbed inputs
/// for every probe.
using ScalarFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-5;
  /// Probed elements per input; 0 probes every element.
  std::int64_t max_probes = 0;
  std::uint64_t seed = 7;
  /// Denominator floor of the relative error.
  double abs_floor = 1e-8;
  /// Redraw probes whose central difference at h disagrees with the one at
  /// h/2: the stencil straddles a kink (relu, |x|) and the difference
  /// quotient is not an estimate of the derivative there.
  bool skip_kinks = false;
};

struct GradCheckEntry {
  std::string name;  // "<case>/<input>"
  std::int64_t probes = 0;
  std::int64_t skipped = 0;  // probes redrawn because they straddled a kink
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b, double floor = 1e-8);

/// One entry per named input.
std::vector<GradCheckEntry> grad_check(const std::string& case_name, const ScalarFn& fn,
                                       const std::vector<std::pair<std::string, Tensor<double>>>& inputs,
                                       const GradCheckOptions& options = {});

/// Uniform values in [lo, hi]; values closer to zero than `min_abs` are redrawn.
Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                             double min_abs = 0.0);

struct GradCheckSuiteResult {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
  /// Entry with the largest error-to-tolerance ratio.
  const GradCheckEntry* worst() const;
};

/// Every differentiable op on three random shapes, plus the toy end-to-end
/// model (C=16, M=2, G=1, x2).
GradCheckSuiteResult run_gradcheck_suite(std::uint64_t seed = 2024);

}  // namespace amsr
