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

#include "amsr/ops.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <initializer_list>
#include <string>

namespace amsr::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

std::atomic<bool> g_corrupt_conv{false};

template <typename T>
using Fn = typename Tape<T>::BackwardFn;

// Builds the result tensor and, if any operand is tracked, records it.
template <typename T>
Tensor<T> emit(const char* op, Shape shape, std::vector<T>&& out,
               std::initializer_list<const Tensor<T>*> inputs, Fn<T> backward) {
  Tensor<T> result(shape, std::move(out));
#ifndef NDEBUG
  if (!result.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
#endif
  Tape<T>* tape = nullptr;
  for (const Tensor<T>* in : inputs) {
    if (!in->tracked()) continue;
    if (tape != nullptr && tape != in->tape()) {
      throw ContractError(std::string(op) + ": operands live on different tapes");
    }
    tape = in->tape();
  }
  if (tape == nullptr) return result;
  std::vector<const Tensor<T>*> ins(inputs);
  return tape->record(op, result, std::span<const Tensor<T>* const>(ins.data(), ins.size()),
                      std::move(backward));
}

std::size_t sz(std::int64_t v) { return static_cast<std::size_t>(v); }

// cols is (ci*kh*kw) x (oh*ow).
template <typename T>
void im2col(const T* img, std::int64_t ci, std::int64_t h, std::int64_t w, std::int64_t kh,
            std::int64_t kw, std::int64_t pad, std::int64_t oh, std::int64_t ow, T* cols) {
  for (std::int64_t i = 0; i < ci; ++i) {
    for (std::int64_t ky = 0; ky < kh; ++ky) {
      for (std::int64_t kx = 0; kx < kw; ++kx) {
        T* row = cols + ((i * kh + ky) * kw + kx) * oh * ow;
        const std::int64_t x0 = std::max<std::int64_t>(0, pad - kx);
        const std::int64_t x1 = std::min<std::int64_t>(ow, w + pad - kx);
        for (std::int64_t y = 0; y < oh; ++y) {
          T* dst = row + y * ow;
          const std::int64_t sy = y + ky - pad;
          if (sy < 0 || sy >= h || x0 >= x1) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = img + (i * h + sy) * w + (kx - pad);
          std::fill(dst, dst + x0, T(0));
          for (std::int64_t x = x0; x < x1; ++x) dst[x] = src[x];
          std::fill(dst + x1, dst + ow, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, std::int64_t ci, std::int64_t h, std::int64_t w, std::int64_t kh,
                std::int64_t kw, std::int64_t pad, std::int64_t oh, std::int64_t ow, T* img) {
  for (std::int64_t i = 0; i < ci; ++i) {
    for (std::int64_t ky = 0; ky < kh; ++ky) {
      for (std::int64_t kx = 0; kx < kw; ++kx) {
        const T* row = cols + ((i * kh + ky) * kw + kx) * oh * ow;
        const std::int64_t x0 = std::max<std::int64_t>(0, pad - kx);
        const std::int64_t x1 = std::min<std::int64_t>(ow, w + pad - kx);
        for (std::int64_t y = 0; y < oh; ++y) {
          const std::int64_t sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          const T* src = row + y * ow;
          T* dst = img + (i * h + sy) * w + (kx - pad);
          for (std::int64_t x = x0; x < x1; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

// Broadcast check shared by add and mul. Returns true when y is per-channel.
template <typename T>
bool channel_broadcast(const char* op, const Tensor<T>& x, const Tensor<T>& y) {
  if (x.shape() == y.shape()) return false;
  const Shape& a = x.shape();
  const Shape& b = y.shape();
  if (b.n == a.n && b.c == a.c && b.h == 1 && b.w == 1) return true;
  throw ShapeError(std::string(op) + ": cannot broadcast " + b.str() + " onto " + a.str());
}

}  // namespace

namespace fault {
void corrupt_conv_backward(bool enabled) { g_corrupt_conv = enabled; }
bool conv_backward_corrupted() { return g_corrupt_conv; }
}  // namespace fault

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: input " + xs.str() + " has " + std::to_string(xs.c) +
                     " channels but weights " + ws.str() + " expect " + std::to_string(ws.c));
  }
  if (b.numel() != ws.n) {
    throw ShapeError("conv2d: bias " + b.shape().str() + " does not match weights " + ws.str());
  }
  if (pad < 0) throw ContractError("conv2d: negative padding");
  const std::int64_t oh = xs.h + 2 * pad - ws.h + 1;
  const std::int64_t ow = xs.w + 2 * pad - ws.w + 1;
  if (oh < 1 || ow < 1) throw ShapeError("conv2d: kernel " + ws.str() + " larger than padded input " + xs.str());

  const std::int64_t co = ws.n;
  const std::int64_t k = ws.c * ws.h * ws.w;
  const std::int64_t hw = oh * ow;
  const bool direct = ws.h == 1 && ws.w == 1 && pad == 0;
  const Shape out_shape{xs.n, co, oh, ow};

  std::vector<T> out(sz(out_shape.numel()));
  std::vector<T> cols(direct ? 0 : sz(k * hw));
  ConstMatMap<T> wm(w.data(), co, k);
  for (std::int64_t n = 0; n < xs.n; ++n) {
    const T* xn = x.data() + n * xs.c * xs.h * xs.w;
    if (!direct) im2col(xn, xs.c, xs.h, xs.w, ws.h, ws.w, pad, oh, ow, cols.data());
    ConstMatMap<T> cm(direct ? xn : cols.data(), k, hw);
    MatMap<T> om(out.data() + n * co * hw, co, hw);
    om.noalias() = wm * cm;
    for (std::int64_t o = 0; o < co; ++o) om.row(o).array() += b[o];
  }

  Fn<T> backward = [x, w, pad, oh, ow, direct](std::span<const T> g, const ParentGrads<T>& pg) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    const std::int64_t co = ws.n;
    const std::int64_t k = ws.c * ws.h * ws.w;
    const std::int64_t hw = oh * ow;
    ConstMatMap<T> wm(w.data(), co, k);
    std::vector<T> cols(direct ? 0 : sz(k * hw));
    std::span<T> gx = pg[0];
    std::span<T> gw = pg[1];
    std::span<T> gb = pg[2];
    for (std::int64_t n = 0; n < xs.n; ++n) {
      ConstMatMap<T> gm(g.data() + n * co * hw, co, hw);
      if (!gx.empty()) {
        T* gxn = gx.data() + n * xs.c * xs.h * xs.w;
        if (direct) {
          MatMap<T> gxm(gxn, k, hw);
          gxm.noalias() += wm.transpose() * gm;
        } else {
          MatMap<T> cm(cols.data(), k, hw);
          cm.noalias() = wm.transpose() * gm;
          col2im_add(cols.data(), xs.c, xs.h, xs.w, ws.h, ws.w, pad, oh, ow, gxn);
        }
      }
      if (!gw.empty()) {
        const T* xn = x.data() + n * xs.c * xs.h * xs.w;
        if (!direct) im2col(xn, xs.c, xs.h, xs.w, ws.h, ws.w, pad, oh, ow, cols.data());
        ConstMatMap<T> cm(direct ? xn : cols.data(), k, hw);
        MatMap<T> gwm(gw.data(), co, k);
        gwm.noalias() += gm * cm.transpose();
      }
      if (!gb.empty()) {
        for (std::int64_t o = 0; o < co; ++o) gb[sz(o)] += gm.row(o).sum();
      }
    }
    if (!gw.empty() && fault::conv_backward_corrupted()) {
      for (T& v : gw) v *= T(1.01);
    }
  };
  return emit<T>("conv2d", out_shape, std::move(out), {&x, &w, &b}, std::move(backward));
}

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const Shape ws = w.shape();
  if (ws.h != ws.w || ws.h % 2 == 0) {
    throw ShapeError("conv2d_same: kernel must be square with odd size, got " + ws.str());
  }
  return conv2d(x, w, b, static_cast<int>((ws.h - 1) / 2));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(sz(x.numel()));
  const T* xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : T(0);
  Fn<T> backward = [x](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    const T* xv = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xv[i] > T(0)) gx[i] += g[i];
    }
  };
  return emit<T>("relu", x.shape(), std::move(out), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  auto out = std::make_shared<std::vector<T>>(sz(x.numel()));
  const T* xv = x.data();
  for (std::size_t i = 0; i < out->size(); ++i) (*out)[i] = T(1) / (T(1) + std::exp(-xv[i]));
  std::vector<T> copy = *out;
  Fn<T> backward = [out](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const T y = (*out)[i];
      gx[i] += g[i] * y * (T(1) - y);
    }
  };
  return emit<T>("sigmoid", x.shape(), std::move(copy), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> add(const Tensor<T>& x, const Tensor<T>& y) {
  const bool bc = channel_broadcast("add", x, y);
  const std::int64_t plane = x.shape().plane();
  std::vector<T> out(x.values().begin(), x.values().end());
  if (bc) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[static_cast<std::int64_t>(i) / plane];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[static_cast<std::int64_t>(i)];
  }
  Fn<T> backward = [bc, plane](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    std::span<T> gy = pg[1];
    if (gy.empty()) return;
    if (bc) {
      for (std::size_t i = 0; i < g.size(); ++i) gy[i / sz(plane)] += g[i];
    } else {
      for (std::size_t i = 0; i < gy.size(); ++i) gy[i] += g[i];
    }
  };
  return emit<T>("add", x.shape(), std::move(out), {&x, &y}, std::move(backward));
}

template <typename T>
Tensor<T> mul(const Tensor<T>& x, const Tensor<T>& y) {
  const bool bc = channel_broadcast("mul", x, y);
  const std::int64_t plane = x.shape().plane();
  std::vector<T> out(sz(x.numel()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int64_t j = bc ? static_cast<std::int64_t>(i) / plane : static_cast<std::int64_t>(i);
    out[i] = x[static_cast<std::int64_t>(i)] * y[j];
  }
  Fn<T> backward = [x, y, bc, plane](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    std::span<T> gy = pg[1];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t j = bc ? i / sz(plane) : i;
      if (!gx.empty()) gx[i] += g[i] * y[static_cast<std::int64_t>(j)];
      if (!gy.empty()) gy[j] += g[i] * x[static_cast<std::int64_t>(i)];
    }
  };
  return emit<T>("mul", x.shape(), std::move(out), {&x, &y}, std::move(backward));
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  std::vector<T> out(x.values().begin(), x.values().end());
  for (T& v : out) v *= s;
  Fn<T> backward = [s](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * g[i];
  };
  return emit<T>("scale", x.shape(), std::move(out), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.size() < 2) throw ContractError("concat_channels needs at least two parts");
  const Shape first = parts[0].shape();
  std::int64_t channels = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " does not match " + first.str());
    }
    channels += s.c;
  }
  const Shape out_shape{first.n, channels, first.h, first.w};
  const std::int64_t plane = first.plane();
  std::vector<T> out(sz(out_shape.numel()));
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::int64_t block = p.shape().c * plane;
    for (std::int64_t n = 0; n < first.n; ++n) {
      std::copy_n(p.data() + n * block, block, out.data() + (n * channels + off) * plane);
    }
    off += p.shape().c;
  }
  std::vector<std::int64_t> part_channels;
  for (const auto& p : parts) part_channels.push_back(p.shape().c);
  Fn<T> backward = [offsets, part_channels, channels, plane, batch = first.n](
                       std::span<const T> g, const ParentGrads<T>& pg) {
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      std::span<T> gp = pg[k];
      if (gp.empty()) continue;
      const std::int64_t block = part_channels[k] * plane;
      for (std::int64_t n = 0; n < batch; ++n) {
        const T* src = g.data() + (n * channels + offsets[k]) * plane;
        T* dst = gp.data() + n * block;
        for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    }
  };
  // The recorder takes a pointer list; build it dynamically.
  Tensor<T> result(out_shape, std::move(out));
#ifndef NDEBUG
  if (!result.all_finite()) throw NumericError("non-finite value produced by concat_channels");
#endif
  Tape<T>* tape = nullptr;
  std::vector<const Tensor<T>*> ins;
  for (const auto& p : parts) {
    ins.push_back(&p);
    if (!p.tracked()) continue;
    if (tape != nullptr && tape != p.tape()) {
      throw ContractError("concat_channels: operands live on different tapes");
    }
    tape = p.tape();
  }
  if (tape == nullptr) return result;
  return tape->record("concat_channels", result,
                      std::span<const Tensor<T>* const>(ins.data(), ins.size()), std::move(backward));
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin, std::int64_t count) {
  const Shape s = x.shape();
  if (begin < 0 || count < 1 || begin + count > s.c) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + s.str());
  }
  const Shape out_shape{s.n, count, s.h, s.w};
  const std::int64_t plane = s.plane();
  std::vector<T> out(sz(out_shape.numel()));
  for (std::int64_t n = 0; n < s.n; ++n) {
    std::copy_n(x.data() + (n * s.c + begin) * plane, count * plane, out.data() + n * count * plane);
  }
  Fn<T> backward = [s, begin, count, plane](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (std::int64_t n = 0; n < s.n; ++n) {
      const T* src = g.data() + n * count * plane;
      T* dst = gx.data() + (n * s.c + begin) * plane;
      for (std::int64_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  };
  return emit<T>("slice_channels", out_shape, std::move(out), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape.numel() != x.numel()) {
    throw ShapeError("reshape: " + x.shape().str() + " -> " + shape.str() + " changes element count");
  }
  std::vector<T> out(x.values().begin(), x.values().end());
  Fn<T> backward = [](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  };
  return emit<T>("reshape", shape, std::move(out), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  const Shape s = x.shape();
  const Shape out_shape{s.n, s.c, s.w, s.h};
  std::vector<T> out(sz(s.numel()));
  const std::int64_t batches = s.n * s.c;
  for (std::int64_t b = 0; b < batches; ++b) {
    ConstMatMap<T> src(x.data() + b * s.plane(), s.h, s.w);
    MatMap<T> dst(out.data() + b * s.plane(), s.w, s.h);
    dst = src.transpose();
  }
  Fn<T> backward = [s, batches](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (std::int64_t b = 0; b < batches; ++b) {
      ConstMatMap<T> gs(g.data() + b * s.plane(), s.w, s.h);
      MatMap<T> gd(gx.data() + b * s.plane(), s.h, s.w);
      gd += gs.transpose();
    }
  };
  return emit<T>("transpose", out_shape, std::move(out), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  if (as.n != bs.n || as.c != bs.c || as.w != bs.h) {
    throw ShapeError("matmul: cannot multiply " + as.str() + " by " + bs.str());
  }
  const std::int64_t p = as.h, q = as.w, r = bs.w;
  const std::int64_t batches = as.n * as.c;
  const Shape out_shape{as.n, as.c, p, r};
  std::vector<T> out(sz(out_shape.numel()));
  for (std::int64_t k = 0; k < batches; ++k) {
    ConstMatMap<T> am(a.data() + k * p * q, p, q);
    ConstMatMap<T> bm(b.data() + k * q * r, q, r);
    MatMap<T> om(out.data() + k * p * r, p, r);
    om.noalias() = am * bm;
  }
  Fn<T> backward = [a, b, p, q, r, batches](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> ga = pg[0];
    std::span<T> gb = pg[1];
    for (std::int64_t k = 0; k < batches; ++k) {
      ConstMatMap<T> gm(g.data() + k * p * r, p, r);
      if (!ga.empty()) {
        MatMap<T> gam(ga.data() + k * p * q, p, q);
        gam.noalias() += gm * ConstMatMap<T>(b.data() + k * q * r, q, r).transpose();
      }
      if (!gb.empty()) {
        MatMap<T> gbm(gb.data() + k * q * r, q, r);
        gbm.noalias() += ConstMatMap<T>(a.data() + k * p * q, p, q).transpose() * gm;
      }
    }
  };
  return emit<T>("matmul", out_shape, std::move(out), {&a, &b}, std::move(backward));
}

namespace {
template <typename T>
void softmax_row(const T* in, T* out, std::int64_t len) {
  T mx = in[0];
  for (std::int64_t j = 1; j < len; ++j) mx = std::max(mx, in[j]);
  T total = 0;
  for (std::int64_t j = 0; j < len; ++j) {
    out[j] = std::exp(in[j] - mx);
    total += out[j];
  }
  const T inv = T(1) / total;
  for (std::int64_t j = 0; j < len; ++j) out[j] *= inv;
}
}  // namespace

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
  const Shape s = a.shape();
  const std::int64_t rows = s.n * s.c * s.h;
  auto out = std::make_shared<std::vector<T>>(sz(s.numel()));
  if (s.w > 0) {
    for (std::int64_t i = 0; i < rows; ++i) softmax_row(a.data() + i * s.w, out->data() + i * s.w, s.w);
  }
  std::vector<T> copy = *out;
  Fn<T> backward = [out, rows, len = s.w](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> ga = pg[0];
    for (std::int64_t i = 0; i < rows; ++i) {
      const T* y = out->data() + i * len;
      const T* gy = g.data() + i * len;
      T dot = 0;
      for (std::int64_t j = 0; j < len; ++j) dot += gy[j] * y[j];
      T* gx = ga.data() + i * len;
      for (std::int64_t j = 0; j < len; ++j) gx[j] += y[j] * (gy[j] - dot);
    }
  };
  return emit<T>("softmax_rows", s, std::move(copy), {&a}, std::move(backward));
}

namespace {
// Index of the shuffled element for (n, c, y, x) of the r*r-times larger output.
inline std::int64_t shuffle_src(const Shape& in, std::int64_t r, std::int64_t n, std::int64_t c,
                                std::int64_t oy, std::int64_t ox) {
  const std::int64_t y = oy / r, dy = oy % r;
  const std::int64_t x = ox / r, dx = ox % r;
  const std::int64_t ic = c * r * r + dy * r + dx;
  return ((n * in.c + ic) * in.h + y) * in.w + x;
}
}  // namespace

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  const Shape s = x.shape();
  if (r < 1) throw ContractError("pixel_shuffle: factor must be positive");
  const std::int64_t rr = static_cast<std::int64_t>(r) * r;
  if (s.c % rr != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(s.c) + " channels not divisible by " +
                     std::to_string(rr));
  }
  const Shape out_shape{s.n, s.c / rr, s.h * r, s.w * r};
  std::vector<std::int64_t> index(sz(out_shape.numel()));
  std::size_t k = 0;
  for (std::int64_t n = 0; n < out_shape.n; ++n)
    for (std::int64_t c = 0; c < out_shape.c; ++c)
      for (std::int64_t y = 0; y < out_shape.h; ++y)
        for (std::int64_t xx = 0; xx < out_shape.w; ++xx) index[k++] = shuffle_src(s, r, n, c, y, xx);
  std::vector<T> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = x[index[i]];
  Fn<T> backward = [index = std::move(index)](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (std::size_t i = 0; i < index.size(); ++i) gx[sz(index[i])] += g[i];
  };
  return emit<T>("pixel_shuffle", out_shape, std::move(out), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r) {
  const Shape s = x.shape();
  if (r < 1) throw ContractError("pixel_unshuffle: factor must be positive");
  if (s.h % r != 0 || s.w % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial dims of " + s.str() + " not divisible by " + std::to_string(r));
  }
  const std::int64_t rr = static_cast<std::int64_t>(r) * r;
  const Shape out_shape{s.n, s.c * rr, s.h / r, s.w / r};
  std::vector<std::int64_t> index(sz(s.numel()));  // index[i]: position in out of x element i
  std::size_t k = 0;
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c)
      for (std::int64_t y = 0; y < s.h; ++y)
        for (std::int64_t xx = 0; xx < s.w; ++xx) index[k++] = shuffle_src(out_shape, r, n, c, y, xx);
  std::vector<T> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[sz(index[i])] = x[static_cast<std::int64_t>(i)];
  Fn<T> backward = [index = std::move(index)](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (std::size_t i = 0; i < index.size(); ++i) gx[i] += g[sz(index[i])];
  };
  return emit<T>("pixel_unshuffle", out_shape, std::move(out), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> covariance_pool(const Tensor<T>& x) {
  const Shape s = x.shape();
  const std::int64_t c = s.c;
  const std::int64_t m = s.plane();
  if (m < 1) throw ShapeError("covariance_pool: empty spatial extent in " + s.str());
  const Shape out_shape{s.n, 1, c, c};
  auto centered = std::make_shared<std::vector<T>>(x.values().begin(), x.values().end());
  std::vector<T> out(sz(out_shape.numel()));
  const T inv = T(1) / static_cast<T>(m);
  for (std::int64_t n = 0; n < s.n; ++n) {
    MatMap<T> xc(centered->data() + n * c * m, c, m);
    for (std::int64_t i = 0; i < c; ++i) {
      const T mean = xc.row(i).sum() * inv;
      xc.row(i).array() -= mean;
    }
    RowMat<T> prod = (xc * xc.transpose()) * inv;
    MatMap<T> om(out.data() + n * c * c, c, c);
    om = (prod + prod.transpose()) * T(0.5);
  }
  Fn<T> backward = [centered, s, inv](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    const std::int64_t c = s.c;
    const std::int64_t m = s.plane();
    for (std::int64_t n = 0; n < s.n; ++n) {
      ConstMatMap<T> gm(g.data() + n * c * c, c, c);
      ConstMatMap<T> xc(centered->data() + n * c * m, c, m);
      MatMap<T> gxm(gx.data() + n * c * m, c, m);
      RowMat<T> sym = (gm + gm.transpose()) * inv;
      gxm.noalias() += sym * xc;
    }
  };
  return emit<T>("covariance_pool", out_shape, std::move(out), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> newton_schulz_sqrt(const Tensor<T>& a, int iters) {
  const Shape s = a.shape();
  if (s.h != s.w) throw ShapeError("newton_schulz_sqrt: matrix " + s.str() + " is not square");
  if (iters < 1) throw ContractError("newton_schulz_sqrt: iters must be >= 1");
  const std::int64_t c = s.h;
  const std::int64_t batches = s.n * s.c;
  const RowMat<T> eye = RowMat<T>::Identity(c, c);

  struct Saved {
    bool zero = true;
    T trace = 0;
    std::vector<RowMat<T>> y, z;  // y[k], z[k] for k = 0..iters
  };
  auto saved = std::make_shared<std::vector<Saved>>(sz(batches));
  std::vector<T> out(sz(s.numel()), T(0));
  for (std::int64_t b = 0; b < batches; ++b) {
    ConstMatMap<T> am(a.data() + b * c * c, c, c);
    Saved& sv = (*saved)[sz(b)];
    sv.trace = am.trace();
    if (!(sv.trace >= T(1e-12))) continue;
    sv.zero = false;
    sv.y.push_back(am / sv.trace);
    sv.z.push_back(eye);
    for (int k = 0; k < iters; ++k) {
      RowMat<T> q = T(3) * eye - sv.z[sz(k)] * sv.y[sz(k)];
      RowMat<T> ynext = T(0.5) * (sv.y[sz(k)] * q);
      RowMat<T> znext = T(0.5) * (q * sv.z[sz(k)]);
      sv.y.push_back(std::move(ynext));
      sv.z.push_back(std::move(znext));
    }
    MatMap<T>(out.data() + b * c * c, c, c) = std::sqrt(sv.trace) * sv.y.back();
  }

  Fn<T> backward = [saved, a, c, iters](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> ga = pg[0];
    const RowMat<T> eye = RowMat<T>::Identity(c, c);
    for (std::size_t b = 0; b < saved->size(); ++b) {
      const Saved& sv = (*saved)[b];
      if (sv.zero) continue;
      ConstMatMap<T> gm(g.data() + b * c * c, c, c);
      const T root = std::sqrt(sv.trace);
      RowMat<T> gy = root * gm;
      RowMat<T> gz = RowMat<T>::Zero(c, c);
      T gtrace = (gm.array() * sv.y.back().array()).sum() / (T(2) * root);
      for (int k = iters - 1; k >= 0; --k) {
        const RowMat<T>& yk = sv.y[sz(k)];
        const RowMat<T>& zk = sv.z[sz(k)];
        RowMat<T> q = T(3) * eye - zk * yk;
        RowMat<T> gq = T(0.5) * (yk.transpose() * gy) + T(0.5) * (gz * zk.transpose());
        RowMat<T> gy_prev = T(0.5) * (gy * q.transpose());
        RowMat<T> gz_prev = T(0.5) * (q.transpose() * gz);
        // q = 3I - z y
        gz_prev.noalias() -= gq * yk.transpose();
        gy_prev.noalias() -= zk.transpose() * gq;
        gy = std::move(gy_prev);
        gz = std::move(gz_prev);
      }
      // y0 = A / tr(A)
      ConstMatMap<T> am(a.data() + b * c * c, c, c);
      gtrace -= (gy.array() * am.array()).sum() / (sv.trace * sv.trace);
      MatMap<T> gam(ga.data() + b * c * c, c, c);
      gam += gy / sv.trace;
      gam += gtrace * eye;
    }
  };
  return emit<T>("newton_schulz_sqrt", s, std::move(out), {&a}, std::move(backward));
}

template <typename T>
Tensor<T> row_mean(const Tensor<T>& x) {
  const Shape s = x.shape();
  if (s.w < 1) throw ShapeError("row_mean: empty rows in " + s.str());
  const Shape out_shape{s.n, s.c, s.h, 1};
  const std::int64_t rows = s.n * s.c * s.h;
  std::vector<T> out(sz(rows));
  const T inv = T(1) / static_cast<T>(s.w);
  for (std::int64_t i = 0; i < rows; ++i) {
    T acc = 0;
    for (std::int64_t j = 0; j < s.w; ++j) acc += x[i * s.w + j];
    out[sz(i)] = acc * inv;
  }
  Fn<T> backward = [len = s.w, inv](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i / sz(len)] * inv;
  };
  return emit<T>("row_mean", out_shape, std::move(out), {&x}, std::move(backward));
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  Fn<T> backward = [](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gx = pg[0];
    for (T& v : gx) v += g[0];
  };
  return emit<T>("sum", Shape{1, 1, 1, 1}, std::vector<T>{acc}, {&x}, std::move(backward));
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ContractError("l1_loss: prediction " + pred.shape().str() + " vs target " + target.shape().str());
  }
  if (pred.numel() == 0) throw ContractError("l1_loss: empty tensors");
  const T inv = T(1) / static_cast<T>(pred.numel());
  T acc = 0;
  for (std::int64_t i = 0; i < pred.numel(); ++i) acc += std::abs(pred[i] - target[i]);
  Fn<T> backward = [pred, target, inv](std::span<const T> g, const ParentGrads<T>& pg) {
    std::span<T> gp = pg[0];
    std::span<T> gt = pg[1];
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
      const T d = pred[i] - target[i];
      const T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      if (!gp.empty()) gp[sz(i)] += g[0] * sgn * inv;
      if (!gt.empty()) gt[sz(i)] -= g[0] * sgn * inv;
    }
  };
  return emit<T>("l1_loss", Shape{1, 1, 1, 1}, std::vector<T>{acc * inv}, {&pred, &target},
                 std::move(backward));
}

template <typename T>
Tensor<T> attention_blocked(const Tensor<T>& theta_t, const Tensor<T>& phi, const Tensor<T>& g_t,
                            std::int64_t block_rows) {
  const Shape ts = theta_t.shape();
  const Shape ps = phi.shape();
  const Shape gs = g_t.shape();
  if (ts.c != 1 || ps.c != 1 || gs.c != 1 || ts.n != ps.n || ts.n != gs.n || ts.w != ps.h ||
      ps.w != gs.h || ps.w != ts.h) {
    throw ShapeError("attention_blocked: incompatible " + ts.str() + ", " + ps.str() + ", " + gs.str());
  }
  if (theta_t.tracked() || phi.tracked() || g_t.tracked()) {
    throw ContractError("attention_blocked is inference only");
  }
  block_rows = std::max<std::int64_t>(1, block_rows);
  const std::int64_t hw = ts.h, k = ts.w, kv = gs.w;
  std::vector<T> out(sz(ts.n * hw * kv));
  RowMat<T> aff;
  for (std::int64_t n = 0; n < ts.n; ++n) {
    ConstMatMap<T> phim(phi.data() + n * k * hw, k, hw);
    ConstMatMap<T> gm(g_t.data() + n * hw * kv, hw, kv);
    for (std::int64_t r0 = 0; r0 < hw; r0 += block_rows) {
      const std::int64_t rows = std::min(block_rows, hw - r0);
      ConstMatMap<T> th(theta_t.data() + (n * hw + r0) * k, rows, k);
      aff.noalias() = th * phim;
      for (std::int64_t i = 0; i < rows; ++i) softmax_row(aff.data() + i * hw, aff.data() + i * hw, hw);
      MatMap<T> om(out.data() + (n * hw + r0) * kv, rows, kv);
      om.noalias() = aff * gm;
    }
  }
  return Tensor<T>(Shape{ts.n, 1, hw, kv}, std::move(out));
}

#define AMSR_INSTANTIATE(T)                                                                     \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);         \
  template Tensor<T> conv2d_same(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> relu(const Tensor<T>&);                                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                                \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                               \
  template Tensor<T> slice_channels(const Tensor<T>&, std::int64_t, std::int64_t);              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                          \
  template Tensor<T> transpose(const Tensor<T>&);                                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                            \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, int);                                      \
  template Tensor<T> pixel_unshuffle(const Tensor<T>&, int);                                    \
  template Tensor<T> covariance_pool(const Tensor<T>&);                                         \
  template Tensor<T> newton_schulz_sqrt(const Tensor<T>&, int);                                 \
  template Tensor<T> row_mean(const Tensor<T>&);                                                \
  template Tensor<T> sum(const Tensor<T>&);                                                     \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> attention_blocked(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                       std::int64_t);

AMSR_INSTANTIATE(float)
AMSR_INSTANTIATE(double)

#undef AMSR_INSTANTIATE

}  // namespace amsr::ops
