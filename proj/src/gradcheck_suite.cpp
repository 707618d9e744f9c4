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

// The fixed gradient-check matrix: every differentiable op on three random
// shapes, then the toy network end to end.

#include <array>

#include "amsr/gradcheck.hpp"
#include "amsr/model.hpp"
#include "amsr/ops.hpp"

namespace amsr {
namespace {

using T = Tensor<double>;
using Inputs = std::vector<std::pair<std::string, T>>;

constexpr double kOpTolerance = 1e-5;
constexpr double kModelTolerance = 1e-4;
constexpr double kReluTolerance = 1e-6;

// sum(y * r) for a fixed random r, so every output element gets a distinct
// upstream gradient.
T weighted_sum(const T& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ops::sum(ops::mul(y, random_tensor(y.shape(), rng, -1.0, 1.0)));
}

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  void check(const std::string& name, const std::function<T(const std::vector<T>&)>& body, const Inputs& inputs,
             double tolerance = kOpTolerance, std::int64_t max_probes = 0, bool skip_kinks = false,
             double abs_floor = 1e-8) {
    const std::uint64_t weight_seed = rng_();
    ScalarFn fn = [&body, weight_seed](const std::vector<T>& in) { return weighted_sum(body(in), weight_seed); };
    GradCheckOptions opt;
    opt.tolerance = tolerance;
    opt.max_probes = max_probes;
    opt.skip_kinks = skip_kinks;
    opt.abs_floor = abs_floor;
    opt.seed = rng_();
    auto entries = grad_check(name, fn, inputs, opt);
    result_.entries.insert(result_.entries.end(), entries.begin(), entries.end());
  }

  /// Scalar-valued functions are checked as they are.
  void check_scalar(const std::string& name, const ScalarFn& fn, const Inputs& inputs) {
    GradCheckOptions opt;
    opt.tolerance = kOpTolerance;
    opt.seed = rng_();
    auto entries = grad_check(name, fn, inputs, opt);
    result_.entries.insert(result_.entries.end(), entries.begin(), entries.end());
  }

  T rand(Shape s, double lo = -1.0, double hi = 1.0, double min_abs = 0.0) {
    return random_tensor(s, rng_, lo, hi, min_abs);
  }

  std::mt19937_64& rng() { return rng_; }
  GradCheckSuiteResult take() { return std::move(result_); }

 private:
  std::mt19937_64 rng_;
  GradCheckSuiteResult result_;
};

// Symmetric positive definite n x 1 x c x c input: M M^T / c + 0.5 I.
T spd(Suite& s, std::int64_t n, std::int64_t c) {
  const T m = s.rand({n, 1, c, c});
  const T mmt = ops::matmul(m, ops::transpose(m));
  std::vector<double> v = mmt.to_vector();
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t i = 0; i < c; ++i) {
      for (std::int64_t j = 0; j < c; ++j) {
        auto& e = v[static_cast<std::size_t>((b * c + i) * c + j)];
        e = e / static_cast<double>(c) + (i == j ? 0.5 : 0.0);
      }
    }
  }
  return T(mmt.shape(), std::move(v));
}

void op_cases(Suite& s) {
  const std::array<Shape, 3> shapes{Shape{1, 2, 4, 5}, Shape{2, 3, 3, 3}, Shape{1, 4, 6, 2}};
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const Shape sh = shapes[k];
    const std::string tag = "#" + std::to_string(k);
    const std::array<int, 3> ksizes{3, 1, 5};
    const int ks = ksizes[k];
    const std::int64_t co = 3;

    s.check("conv2d" + tag,
            [ks](const std::vector<T>& in) { return ops::conv2d(in[0], in[1], in[2], ks / 2); },
            {{"x", s.rand(sh)}, {"w", s.rand({co, sh.c, ks, ks})}, {"b", s.rand({co, 1, 1, 1})}});
    s.check("conv2d_valid" + tag, [](const std::vector<T>& in) { return ops::conv2d(in[0], in[1], in[2], 0); },
            {{"x", s.rand({sh.n, sh.c, sh.h + 2, sh.w + 2})}, {"w", s.rand({co, sh.c, 3, 3})}, {"b", s.rand({co, 1, 1, 1})}});
    // Inputs within 1e-3 of the kink are redrawn; away from it relu is exact.
    s.check("relu" + tag, [](const std::vector<T>& in) { return ops::relu(in[0]); },
            {{"x", s.rand(sh, -1.0, 1.0, 1e-3)}}, kReluTolerance);
    s.check("sigmoid" + tag, [](const std::vector<T>& in) { return ops::sigmoid(in[0]); }, {{"x", s.rand(sh, -3.0, 3.0)}});
    s.check("add" + tag, [](const std::vector<T>& in) { return ops::add(in[0], in[1]); },
            {{"x", s.rand(sh)}, {"y", s.rand(sh)}});
    s.check("add_broadcast" + tag, [](const std::vector<T>& in) { return ops::add(in[0], in[1]); },
            {{"x", s.rand(sh)}, {"y", s.rand({sh.n, sh.c, 1, 1})}});
    s.check("mul" + tag, [](const std::vector<T>& in) { return ops::mul(in[0], in[1]); },
            {{"x", s.rand(sh)}, {"y", s.rand(sh)}});
    s.check("mul_broadcast" + tag, [](const std::vector<T>& in) { return ops::mul(in[0], in[1]); },
            {{"x", s.rand(sh)}, {"y", s.rand({sh.n, sh.c, 1, 1})}});
    s.check("scale" + tag, [](const std::vector<T>& in) { return ops::scale(in[0], -1.75); }, {{"x", s.rand(sh)}});
    s.check("concat_channels" + tag,
            [](const std::vector<T>& in) {
              const std::array<T, 3> parts{in[0], in[1], in[2]};
              return ops::concat_channels<double>(parts);
            },
            {{"a", s.rand(sh)}, {"b", s.rand({sh.n, 1, sh.h, sh.w})}, {"c", s.rand(sh)}});
    s.check("slice_channels" + tag, [sh](const std::vector<T>& in) { return ops::slice_channels(in[0], 1, sh.c - 1); },
            {{"x", s.rand(sh)}});
    s.check("reshape" + tag,
            [sh](const std::vector<T>& in) { return ops::reshape(in[0], Shape{sh.n, 1, sh.c, sh.h * sh.w}); },
            {{"x", s.rand(sh)}});
    s.check("transpose" + tag, [](const std::vector<T>& in) { return ops::transpose(in[0]); }, {{"x", s.rand(sh)}});
    s.check("matmul" + tag, [](const std::vector<T>& in) { return ops::matmul(in[0], in[1]); },
            {{"a", s.rand(sh)}, {"b", s.rand({sh.n, sh.c, sh.w, 3})}});
    s.check("softmax_rows" + tag, [](const std::vector<T>& in) { return ops::softmax_rows(in[0]); },
            {{"x", s.rand(sh, -2.0, 2.0)}});
    s.check("pixel_shuffle" + tag, [](const std::vector<T>& in) { return ops::pixel_shuffle(in[0], 2); },
            {{"x", s.rand({sh.n, sh.c * 4, sh.h, sh.w})}});
    s.check("pixel_unshuffle" + tag, [](const std::vector<T>& in) { return ops::pixel_unshuffle(in[0], 2); },
            {{"x", s.rand({sh.n, sh.c, sh.h * 2, sh.w * 2})}});
    s.check("covariance_pool" + tag, [](const std::vector<T>& in) { return ops::covariance_pool(in[0]); },
            {{"x", s.rand(sh)}});
    s.check("newton_schulz_sqrt" + tag, [](const std::vector<T>& in) { return ops::newton_schulz_sqrt(in[0], 5); },
            {{"a", spd(s, sh.n, sh.c)}});
    s.check("row_mean" + tag, [](const std::vector<T>& in) { return ops::row_mean(in[0]); }, {{"x", s.rand(sh)}});
    s.check("sum" + tag, [](const std::vector<T>& in) { return ops::sum(in[0]); }, {{"x", s.rand(sh)}});

    // Keep |pred - target| away from the kink at zero.
    const T target = s.rand(sh);
    std::vector<double> pred = target.to_vector();
    const T offset = s.rand(sh, -1.0, 1.0, 0.1);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += offset[static_cast<std::int64_t>(i)];
    s.check_scalar("l1_loss" + tag, [](const std::vector<T>& in) { return ops::l1_loss(in[0], in[1]); },
                   {{"pred", T(sh, std::move(pred))}, {"target", target}});
  }
}

void model_case(Suite& s) {
  const ModelConfig cfg = ModelConfig::toy(2);
  const ModelParams<double> init = build_model<double>(cfg, 11);
  Inputs inputs;
  std::vector<std::string> paths;
  for (const auto& [path, p] : init.entries()) {
    paths.push_back(path);
    // Zero-initialised biases are replaced so their gradients are exercised
    // away from a special point.
    const bool bias = path.size() > 2 && path.compare(path.size() - 2, 2, ".b") == 0;
    inputs.emplace_back(path, bias ? s.rand(p.value.shape(), -0.1, 0.1) : p.value);
  }
  inputs.emplace_back("input", s.rand({1, 3, 6, 6}, -1.0, 1.0));

  auto body = [cfg, paths, init](const std::vector<T>& in) {
    ModelParams<double> params;
    for (std::size_t k = 0; k < paths.size(); ++k) params.set(paths[k], init.param(paths[k]).dims, in[k]);
    const Model<double> model(cfg, std::move(params));
    return model.forward_full(in.back());
  };
  // ReLU kinks are dense in a whole network, so straddling probes are redrawn.
  // Some gradients are structurally zero (a bias on phi shifts every logit of
  // a softmax row equally); the floor keeps their round-off from dominating.
  s.check("model", body, inputs, kModelTolerance, 8, true, 1e-3);
}

}  // namespace

GradCheckSuiteResult run_gradcheck_suite(std::uint64_t seed) {
  Suite suite(seed);
  op_cases(suite);
  model_case(suite);
  return suite.take();
}

}  // namespace amsr
