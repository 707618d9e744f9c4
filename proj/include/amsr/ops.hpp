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

// Differentiable forward operations. Every op accepts tracked or untracked
// operands; the result is recorded on the operands' tape when any of them is
// tracked. All ops are instantiated for float and double.
//
// Matrices are tensors whose last two axes are the rows and columns; the
// leading (n, c) axes are batch axes.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amsr/tensor.hpp"

namespace amsr::ops {

/// Stride-1 convolution with zero padding. `w` is Co x Ci x Kh x Kw, `b` holds
/// Co values (any shape with Co elements).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int pad);

/// conv2d with "same" padding; kernel sizes must be odd and square.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// x + y where y matches x exactly or is n x c x 1 x 1 (broadcast over space).
template <typename T>
Tensor<T> add(const Tensor<T>& x, const Tensor<T>& y);

/// x * y with the same broadcasting rule as add.
template <typename T>
Tensor<T> mul(const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin, std::int64_t count);

/// Reinterprets the storage with a new shape of equal element count.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Swaps the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

/// Batched a (.. x p x q) times b (.. x q x r).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Softmax along the last axis, with row-max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a);

/// out[n, c, y*r+dy, x*r+dx] = in[n, c*r*r + dy*r + dx, y, x].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r);

/// Exact inverse of pixel_shuffle.
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r);

/// Per-sample channel covariance X Ibar X^T, Ibar = (1/s)(I - (1/s) 1 1^T),
/// returned as n x 1 x C x C.
template <typename T>
Tensor<T> covariance_pool(const Tensor<T>& x);

/// Matrix square root of symmetric PSD matrices (n x 1 x C x C) by an unrolled
/// Newton-Schulz iteration on the trace-normalised input. Samples with trace
/// below 1e-12 map to the zero matrix.
template <typename T>
Tensor<T> newton_schulz_sqrt(const Tensor<T>& a, int iters = 5);

/// Mean over the last axis: n x c x h x w -> n x c x h x 1.
template <typename T>
Tensor<T> row_mean(const Tensor<T>& x);

/// Sum of all elements as a 1 x 1 x 1 x 1 tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// Mean absolute difference; the subgradient at zero is zero.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Untracked embedded-Gaussian attention, softmax(theta_t phi) g_t, evaluated
/// a block of rows at a time so the hw x hw affinity is never materialised.
/// theta_t, g_t: n x 1 x hw x k; phi: n x 1 x k x hw.
template <typename T>
Tensor<T> attention_blocked(const Tensor<T>& theta_t, const Tensor<T>& phi, const Tensor<T>& g_t,
                            std::int64_t block_rows = 256);

namespace fault {
/// Test fixture: when enabled, conv2d's weight gradient is deliberately wrong.
void corrupt_conv_backward(bool enabled);
bool conv_backward_corrupted();
}  // namespace fault

}  // namespace amsr::ops
