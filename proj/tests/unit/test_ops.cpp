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

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "amsr/gradcheck.hpp"
#include "amsr/ops.hpp"

namespace amsr {
namespace {

using D = Tensor<double>;

D from(Shape s, std::vector<double> v) { return D(s, std::move(v)); }

TEST(Conv2d, OnesKernelCountsPaddedOverlap) {
  const D x(Shape{1, 1, 3, 3}, 1.0);
  const D w(Shape{1, 1, 3, 3}, 1.0);
  const D b(Shape{1, 1, 1, 1}, 0.0);
  const D y = ops::conv2d(x, w, b, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 1), 9.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 2), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 0), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 2), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 1), 6.0);
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const D x = random_tensor({2, 1, 5, 4}, rng);
  const D y = ops::conv2d(x, D(Shape{1, 1, 1, 1}, 1.0), D(Shape{1, 1, 1, 1}, 0.0), 0);
  EXPECT_EQ(y.to_vector(), x.to_vector());
}

TEST(Conv2d, SamePaddingPreservesSize) {
  std::mt19937_64 rng(2);
  const D x = random_tensor({1, 2, 7, 6}, rng);
  for (int k : {1, 3, 5}) {
    const D y = ops::conv2d_same(x, random_tensor({3, 2, k, k}, rng), D(Shape{3, 1, 1, 1}, 0.0));
    EXPECT_EQ(y.shape(), (Shape{1, 3, 7, 6})) << "k=" << k;
  }
}

TEST(Conv2d, ChannelMismatchNamesBothShapes) {
  const D x(Shape{1, 2, 4, 4}, 1.0);
  const D w(Shape{1, 3, 3, 3}, 1.0);
  try {
    ops::conv2d(x, w, D(Shape{1, 1, 1, 1}, 0.0), 1);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1x2x4x4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("1x3x3x3"), std::string::npos) << msg;
  }
}

TEST(Conv2d, WeightGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const D x = random_tensor({2, 3, 8, 8}, rng);
  const D b = random_tensor({4, 1, 1, 1}, rng);
  ScalarFn fn = [&](const std::vector<D>& in) { return ops::sum(ops::conv2d(x, in[0], b, 1)); };
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  const auto report = grad_check("conv2d", fn, {{"w", random_tensor({4, 3, 3, 3}, rng)}}, opt);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_TRUE(report[0].passed) << report[0].max_rel_error;
}

TEST(Elementwise, ReluSigmoidAdd) {
  const D r = ops::relu(from({1, 1, 1, 3}, {-1.0, 0.0, 2.0}));
  EXPECT_EQ(r.to_vector(), (std::vector<double>{0.0, 0.0, 2.0}));
  EXPECT_DOUBLE_EQ(ops::sigmoid(D(Shape{1, 1, 1, 1}, 0.0))[0], 0.5);
  std::mt19937_64 rng(4);
  const D x = random_tensor({1, 2, 3, 3}, rng);
  EXPECT_EQ(ops::add(x, D(x.shape(), 0.0)).to_vector(), x.to_vector());
}

TEST(Elementwise, BroadcastOnlyOverSpace) {
  const D x(Shape{1, 2, 3, 3}, 1.0);
  const D gate = from({1, 2, 1, 1}, {2.0, 3.0});
  const D y = ops::mul(x, gate);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 2), 2.0);
  EXPECT_DOUBLE_EQ(y.at(0, 1, 0, 0), 3.0);
  EXPECT_THROW(ops::add(x, D(Shape{1, 1, 3, 3}, 1.0)), ShapeError);
  EXPECT_THROW(ops::mul(x, D(Shape{1, 2, 3, 1}, 1.0)), ShapeError);
}

TEST(Concat, ShapeAndSliceBack) {
  std::mt19937_64 rng(5);
  const D a = random_tensor({1, 2, 4, 4}, rng);
  const D b = random_tensor({1, 3, 4, 4}, rng);
  const std::array<D, 2> parts{a, b};
  const D c = ops::concat_channels<double>(parts);
  EXPECT_EQ(c.shape(), (Shape{1, 5, 4, 4}));
  EXPECT_EQ(ops::slice_channels(c, 0, 2).to_vector(), a.to_vector());
  EXPECT_EQ(ops::slice_channels(c, 2, 3).to_vector(), b.to_vector());
  const std::array<D, 2> bad{a, D(Shape{1, 1, 4, 3}, 0.0)};
  EXPECT_THROW(ops::concat_channels<double>(bad), ShapeError);
  const std::array<D, 1> single{a};
  EXPECT_THROW(ops::concat_channels<double>(single), ContractError);
}

TEST(Concat, GradientRoutesOnesToEveryPart) {
  Tape<double> tape;
  const D a = tape.leaf(D(Shape{1, 2, 2, 2}, 0.5));
  const D b = tape.leaf(D(Shape{1, 1, 2, 2}, -0.5));
  const std::array<D, 2> parts{a, b};
  const auto g = tape.backward(ops::sum(ops::concat_channels<double>(parts)));
  EXPECT_EQ(g.wrt(a), std::vector<double>(8, 1.0));
  EXPECT_EQ(g.wrt(b), std::vector<double>(4, 1.0));
}

TEST(Matmul, HandComputed) {
  const D a = from({1, 1, 2, 2}, {1, 2, 3, 4});
  const D b = from({1, 1, 2, 1}, {1, 1});
  EXPECT_EQ(ops::matmul(a, b).to_vector(), (std::vector<double>{3.0, 7.0}));
  const D eye = from({1, 1, 2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(ops::matmul(eye, b).to_vector(), b.to_vector());
  EXPECT_THROW(ops::matmul(a, from({1, 1, 3, 1}, {1, 1, 1})), ShapeError);
}

TEST(Softmax, ClosedFormsAndStability) {
  const D s = ops::softmax_rows(from({1, 1, 3, 2}, {0.0, 0.0, 1000.0, 1000.0, 0.0, std::log(3.0)}));
  EXPECT_NEAR(s[0], 0.5, 1e-15);
  EXPECT_NEAR(s[1], 0.5, 1e-15);
  EXPECT_NEAR(s[2], 0.5, 1e-15);
  EXPECT_NEAR(s[3], 0.5, 1e-15);
  EXPECT_NEAR(s[4], 0.25, 1e-15);
  EXPECT_NEAR(s[5], 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOneForLargeMagnitudes) {
  std::mt19937_64 rng(6);
  const D x = random_tensor({2, 3, 7, 9}, rng, -1e3, 1e3);
  const D s = ops::softmax_rows(x);
  for (std::int64_t r = 0; r < 2 * 3 * 7; ++r) {
    double total = 0.0;
    for (std::int64_t j = 0; j < 9; ++j) total += s[r * 9 + j];
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(PixelShuffle, NormativeOrderingAndBijection) {
  const D y = ops::pixel_shuffle(from({1, 4, 1, 1}, {1, 2, 3, 4}), 2);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y.to_vector(), (std::vector<double>{1, 2, 3, 4}));

  std::mt19937_64 rng(7);
  const D x = random_tensor({2, 18, 3, 4}, rng);
  EXPECT_EQ(ops::pixel_shuffle(x, 1).to_vector(), x.to_vector());
  const D up = ops::pixel_shuffle(x, 3);
  EXPECT_EQ(up.shape(), (Shape{2, 2, 9, 12}));
  EXPECT_EQ(ops::pixel_unshuffle(up, 3).to_vector(), x.to_vector());
  EXPECT_THROW(ops::pixel_shuffle(D(Shape{1, 3, 2, 2}, 0.0), 2), ShapeError);
}

TEST(CovariancePool, HandExampleAndConstants) {
  // X = [[1, -1], [-1, 1]] with C = 2, s = 2.
  const D x = from({1, 2, 1, 2}, {1, -1, -1, 1});
  const D cov = ops::covariance_pool(x);
  EXPECT_EQ(cov.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(cov.to_vector(), (std::vector<double>{1, -1, -1, 1}));
  const D flat = ops::covariance_pool(D(Shape{1, 3, 4, 4}, 2.5));
  for (double v : flat.values()) EXPECT_EQ(v, 0.0);
}

TEST(CovariancePool, SymmetricAndPsd) {
  std::mt19937_64 rng(8);
  const D x = random_tensor({2, 5, 6, 7}, rng);
  const D cov = ops::covariance_pool(x);
  for (std::int64_t n = 0; n < 2; ++n) {
    Eigen::MatrixXd m(5, 5);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) m(i, j) = cov.at(n, 0, i, j);
    }
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-6);
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
    EXPECT_GT(min_eig, -1e-6 * m.trace());
  }
}

TEST(NewtonSchulz, ScalarAndIdentity) {
  EXPECT_NEAR(ops::newton_schulz_sqrt(from({1, 1, 1, 1}, {4.0}))[0], 2.0, 1e-12);
  const D eye = from({1, 1, 3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const D r = ops::newton_schulz_sqrt(eye);
  const D rr = ops::matmul(r, r);
  for (std::int64_t i = 0; i < 9; ++i) EXPECT_NEAR(rr[i], eye[i], 1e-3);
  const D zero = ops::newton_schulz_sqrt(D(Shape{1, 1, 3, 3}, 0.0));
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
}

TEST(NewtonSchulz, MatchesEigenOracleOnRandomPsd) {
  std::mt19937_64 rng(9);
  // Sample covariance of 64 random 8-channel feature vectors.
  const D a = ops::covariance_pool(random_tensor({1, 8, 8, 8}, rng));
  const D y = ops::newton_schulz_sqrt(a);
  Eigen::MatrixXd am(8, 8), ym(8, 8);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      am(i, j) = a.at(0, 0, i, j);
      ym(i, j) = y.at(0, 0, i, j);
    }
  }
  EXPECT_LT((ym * ym - am).norm() / am.norm(), 1e-2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(am);
  EXPECT_LT((ym - eig.operatorSqrt()).norm() / eig.operatorSqrt().norm(), 1e-1);

  // The unrolled iteration itself, restated with Eigen.
  const double tr = am.trace();
  Eigen::MatrixXd yk = am / tr, zk = Eigen::MatrixXd::Identity(8, 8);
  for (int k = 0; k < 5; ++k) {
    const Eigen::MatrixXd t = 0.5 * (3.0 * Eigen::MatrixXd::Identity(8, 8) - zk * yk);
    const Eigen::MatrixXd ynext = yk * t;
    zk = t * zk;
    yk = ynext;
  }
  EXPECT_LT((ym - std::sqrt(tr) * yk).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(ops::newton_schulz_sqrt(D(Shape{1, 1, 2, 3}, 1.0)), ShapeError);
}

TEST(L1Loss, ValuesAndShapeCheck) {
  const D a(Shape{1, 1, 2, 2}, 3.0);
  EXPECT_EQ(ops::l1_loss(a, a)[0], 0.0);
  const D b = from({1, 1, 2, 2}, {2, 4, 2, 4});
  EXPECT_DOUBLE_EQ(ops::l1_loss(a, b)[0], 1.0);
  EXPECT_THROW(ops::l1_loss(a, D(Shape{1, 1, 1, 4}, 0.0)), ContractError);

  Tape<double> tape;
  const D p = tape.leaf(from({1, 1, 1, 4}, {1.0, -1.0, 0.0, 2.0}));
  const auto g = tape.backward(ops::l1_loss(p, D(Shape{1, 1, 1, 4}, 0.0)));
  EXPECT_EQ(g.wrt(p), (std::vector<double>{0.25, -0.25, 0.0, 0.25}));
}

TEST(Tape, BackwardBasics) {
  Tape<double> tape;
  const D x = tape.leaf(from({1, 1, 1, 2}, {-1.0, 2.0}));
  const D unused = tape.leaf(D(Shape{1, 1, 1, 3}, 1.0));
  const auto g = tape.backward(ops::sum(ops::relu(x)));
  EXPECT_EQ(g.wrt(x), (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(g.wrt(unused), std::vector<double>(3, 0.0));

  const D y = tape.leaf(D(Shape{1, 1, 2, 2}, 1.0));
  EXPECT_EQ(tape.backward(ops::sum(y)).wrt(y), std::vector<double>(4, 1.0));
  EXPECT_THROW(tape.backward(ops::relu(y)), ContractError);

  Tape<double> other;
  const D z = other.leaf(D(Shape{1, 1, 2, 2}, 1.0));
  EXPECT_THROW(ops::add(y, z), ContractError);
  EXPECT_THROW(tape.backward(ops::sum(z)), ContractError);
}

TEST(Tape, ReluGradientAtZeroIsZero) {
  Tape<double> tape;
  const D x = tape.leaf(D(Shape{1, 1, 1, 1}, 0.0));
  EXPECT_EQ(tape.backward(ops::sum(ops::relu(x))).wrt(x)[0], 0.0);
}

TEST(Tape, RepeatedBackwardIsBitwiseIdentical) {
  std::mt19937_64 rng(10);
  const D xv = random_tensor({1, 3, 5, 5}, rng);
  const D wv = random_tensor({4, 3, 3, 3}, rng);
  auto run = [&] {
    Tape<double> tape;
    const D x = tape.leaf(xv);
    const D w = tape.leaf(wv);
    const D y = ops::softmax_rows(ops::conv2d_same(x, w, D(Shape{4, 1, 1, 1}, 0.0)));
    const auto g = tape.backward(ops::sum(ops::mul(y, y)));
    return std::make_pair(g.wrt(x), g.wrt(w));
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, TraceDumpListsOps) {
  std::ostringstream trace;
  Tape<double> tape;
  tape.set_trace(&trace);
  const D x = tape.leaf(D(Shape{1, 1, 2, 2}, 1.0));
  ops::sum(ops::relu(x));
  const std::string text = trace.str();
  EXPECT_NE(text.find("relu"), std::string::npos) << text;
  EXPECT_NE(text.find("sum"), std::string::npos) << text;
}

#ifndef NDEBUG
TEST(Tape, DebugBuildsRejectNonFiniteResults) {
  const D x(Shape{1, 1, 1, 1}, std::numeric_limits<double>::infinity());
  EXPECT_THROW(ops::scale(x, 0.0), NumericError);
}
#endif

TEST(GradCheck, LinearOpIsExact) {
  std::mt19937_64 rng(11);
  const D y = random_tensor({1, 2, 3, 3}, rng);
  ScalarFn fn = [&](const std::vector<D>& in) { return ops::sum(ops::add(in[0], y)); };
  const auto r = grad_check("add", fn, {{"x", random_tensor({1, 2, 3, 3}, rng)}});
  EXPECT_LT(r[0].max_rel_error, 1e-10);
}

TEST(GradCheck, ReluAwayFromKink) {
  std::mt19937_64 rng(12);
  ScalarFn fn = [](const std::vector<D>& in) { return ops::sum(ops::mul(ops::relu(in[0]), in[0])); };
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  const auto r = grad_check("relu", fn, {{"x", random_tensor({1, 2, 4, 4}, rng, -1.0, 1.0, 1e-3)}}, opt);
  EXPECT_TRUE(r[0].passed) << r[0].max_rel_error;
}

TEST(GradCheck, SuitePassesAndCatchesCorruptedConv) {
  const GradCheckSuiteResult ok = run_gradcheck_suite();
  EXPECT_TRUE(ok.passed()) << ok.worst()->name << " " << ok.worst()->max_rel_error;
  EXPECT_GE(ok.entries.size(), 100u);

  ops::fault::corrupt_conv_backward(true);
  const GradCheckSuiteResult bad = run_gradcheck_suite();
  ops::fault::corrupt_conv_backward(false);
  ASSERT_FALSE(bad.passed());
  EXPECT_EQ(bad.worst()->name.rfind("conv2d", 0), 0u) << bad.worst()->name;
}

}  // namespace
}  // namespace amsr
