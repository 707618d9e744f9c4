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

#include "amsr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace amsr {

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi, double min_abs) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(shape.numel()));
  for (double& x : v) {
    do {
      x = dist(rng);
    } while (std::abs(x) < min_abs);
  }
  return Tensor<double>(shape, std::move(v));
}

std::vector<GradCheckEntry> grad_check(const std::string& case_name, const ScalarFn& fn,
                                       const std::vector<std::pair<std::string, Tensor<double>>>& inputs,
                                       const GradCheckOptions& options) {
  std::vector<Tensor<double>> plain;
  for (const auto& [name, t] : inputs) plain.push_back(t.detached());

  Tape<double> tape;
  std::vector<Tensor<double>> leaves;
  for (const auto& t : plain) leaves.push_back(tape.leaf(t));
  const Tensor<double> loss = fn(leaves);
  if (loss.numel() != 1) throw ContractError("grad_check: function is not scalar-valued");
  const Gradients<double> grads = tape.backward(loss);

  std::mt19937_64 rng(options.seed);
  std::vector<GradCheckEntry> report;
  for (std::size_t k = 0; k < plain.size(); ++k) {
    const std::vector<double> analytic = grads.wrt(leaves[k]);
    const std::int64_t numel = plain[k].numel();
    std::vector<std::int64_t> order(static_cast<std::size_t>(numel));
    std::iota(order.begin(), order.end(), 0);
    const bool sampled = options.max_probes > 0 && numel > options.max_probes;
    if (sampled) std::shuffle(order.begin(), order.end(), rng);
    const std::int64_t wanted = sampled ? options.max_probes : numel;

    GradCheckEntry entry{case_name + "/" + inputs[k].first, 0, 0, 0.0, options.tolerance, true};
    auto eval_at = [&](std::int64_t idx, double delta) {
      std::vector<double> v = plain[k].to_vector();
      v[static_cast<std::size_t>(idx)] += delta;
      std::vector<Tensor<double>> args = plain;
      args[k] = Tensor<double>(plain[k].shape(), std::move(v));
      return fn(args)[0];
    };
    const double h = options.step;
    for (std::int64_t idx : order) {
      if (entry.probes >= wanted) break;
      const double numeric = (eval_at(idx, h) - eval_at(idx, -h)) / (2.0 * h);
      if (options.skip_kinks) {
        const double half = (eval_at(idx, h / 2) - eval_at(idx, -h / 2)) / h;
        if (relative_error(numeric, half, options.abs_floor) > options.tolerance) {
          ++entry.skipped;
          continue;
        }
      }
      const double err = relative_error(analytic[static_cast<std::size_t>(idx)], numeric, options.abs_floor);
      entry.max_rel_error = std::max(entry.max_rel_error, err);
      ++entry.probes;
    }
    entry.passed = entry.max_rel_error < options.tolerance;
    report.push_back(entry);
  }
  return report;
}

bool GradCheckSuiteResult::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

const GradCheckEntry* GradCheckSuiteResult::worst() const {
  const GradCheckEntry* out = nullptr;
  double ratio = -1.0;
  for (const auto& e : entries) {
    const double r = e.max_rel_error / e.tolerance;
    if (r > ratio) {
      ratio = r;
      out = &e;
    }
  }
  return out;
}

}  // namespace amsr
