// Copyright 2026 The mtex Authors
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

#include "mtex/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "mtex/conv.hpp"
#include "mtex/error.hpp"

namespace mtex {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
  }
}

template <typename T>
void require_rank(const Var<T>& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_to_string(a.shape()));
  }
}

// Elementwise map with derivative expressed through input x and output y.
template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& a, Fwd fwd, Deriv deriv, const char* op) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = fwd(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(y), {a},
      [ia, deriv](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const Tensor<T>& g = tape.grad(self);
        const Tensor<T>& xin = tape.value(ia);
        const Tensor<T>& yout = tape.value(self);
        for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * deriv(xin[i], yout[i]);
      },
      op);
}

template <typename T>
T sign_of(T v) {
  return v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0});
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(y), {a, b},
      [ia, ib](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad(self);
        tape.accumulate(ia, g);
        tape.accumulate(ib, g);
      },
      "add");
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(y), {a, b},
      [ia, ib](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad(self);
        tape.accumulate(ia, g);
        if (Tensor<T>* gb = tape.grad_buffer(ib)) {
          for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] -= g[i];
        }
      },
      "sub");
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> y = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(y), {a, b},
      [ia, ib](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad(self);
        const Tensor<T>& av = tape.value(ia);
        const Tensor<T>& bv = tape.value(ib);
        if (Tensor<T>* ga = tape.grad_buffer(ia)) {
          for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * bv[i];
        }
        if (Tensor<T>* gb = tape.grad_buffer(ib)) {
          for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] += g[i] * av[i];
        }
      },
      "mul");
}

template <typename T>
Var<T> scale(const Var<T>& a, double factor) {
  const T f = static_cast<T>(factor);
  return unary(
      a, [f](T x) { return f * x; }, [f](T, T) { return f; }, "scale");
}

template <typename T>
Var<T> shift(const Var<T>& a, const Var<T>& s) {
  if (s.value().numel() != 1) {
    throw ShapeError("shift: offset must hold one element, got shape " +
                     shape_to_string(s.shape()));
  }
  const T offset = s.value()[0];
  Tensor<T> y = a.value();
  for (auto& v : y.data()) v += offset;
  const std::size_t ia = a.id(), is = s.id();
  return a.tape().record(
      std::move(y), {a, s},
      [ia, is](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad(self);
        tape.accumulate(ia, g);
        if (Tensor<T>* gs = tape.grad_buffer(is)) {
          T total = 0;
          for (T v : g.data()) total += v;
          (*gs)[0] += total;
        }
      },
      "shift");
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T total = 0;
  for (T v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record(
      Tensor<T>::scalar(total), {a},
      [ia](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const T g = tape.grad(self)[0];
        for (auto& v : ga->data()) v += g;
      },
      "sum");
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const std::size_t n = a.value().numel();
  if (n == 0) throw ShapeError("mean: empty tensor");
  T total = 0;
  for (T v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record(
      Tensor<T>::scalar(total / static_cast<T>(n)), {a},
      [ia, n](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const T g = tape.grad(self)[0] / static_cast<T>(n);
        for (auto& v : ga->data()) v += g;
      },
      "mean");
}

template <typename T>
Var<T> l1_norm(const Var<T>& a) {
  T total = 0;
  for (T v : a.value().data()) total += std::abs(v);
  const std::size_t ia = a.id();
  return a.tape().record(
      Tensor<T>::scalar(total), {a},
      [ia](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const T g = tape.grad(self)[0];
        const Tensor<T>& x = tape.value(ia);
        for (std::size_t i = 0; i < x.numel(); ++i) (*ga)[i] += g * sign_of(x[i]);
      },
      "l1_norm");
}

template <typename T>
Var<T> abs(const Var<T>& a) {
  return unary(
      a, [](T x) { return std::abs(x); }, [](T x, T) { return sign_of(x); }, "abs");
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary(
      a, [](T x) { return x > T{0} ? x : T{0}; },
      [](T x, T) { return x > T{0} ? T{1} : T{0}; }, "relu");
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, double slope) {
  const T s = static_cast<T>(slope);
  return unary(
      a, [s](T x) { return x > T{0} ? x : s * x; },
      [s](T x, T) { return x > T{0} ? T{1} : s; }, "leaky_relu");
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return unary(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; }, "tanh");
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> y = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(y), {a},
      [ia](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const Tensor<T>& g = tape.grad(self);
        for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i];
      },
      "reshape");
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor<T> y({n, m});
  const Tensor<T>& x = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = x[i * n + j];
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(y), {a},
      [ia, m, n](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const Tensor<T>& g = tape.grad(self);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) (*ga)[i * n + j] += g[j * m + i];
      },
      "transpose");
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) +
                     " x " + shape_to_string(b.shape()));
  }
  Tensor<T> y({m, n});
  MatrixMap<T>(y.data().data(), m, n).noalias() =
      ConstMatrixMap<T>(a.value().data().data(), m, k) *
      ConstMatrixMap<T>(b.value().data().data(), k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(y), {a, b},
      [ia, ib, m, k, n](Tape<T>& tape, std::size_t self) {
        ConstMatrixMap<T> g(tape.grad(self).data().data(), m, n);
        if (Tensor<T>* ga = tape.grad_buffer(ia)) {
          MatrixMap<T>(ga->data().data(), m, k).noalias() +=
              g * ConstMatrixMap<T>(tape.value(ib).data().data(), k, n).transpose();
        }
        if (Tensor<T>* gb = tape.grad_buffer(ib)) {
          MatrixMap<T>(gb->data().data(), k, n).noalias() +=
              ConstMatrixMap<T>(tape.value(ia).data().data(), m, k).transpose() * g;
        }
      },
      "matmul");
}

template <typename T>
Var<T> outer_product(const Var<T>& a, const Var<T>& b) {
  if (a.shape().size() != 1 || b.shape().size() != 1) {
    throw ShapeError("outer_product: operands must be rank 1, got " +
                     shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
  const std::size_t n = a.shape()[0], d = b.shape()[0];
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> y({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) y[i * d + j] = av[i] * bv[j];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(y), {a, b},
      [ia, ib, n, d](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad(self);
        const Tensor<T>& av = tape.value(ia);
        const Tensor<T>& bv = tape.value(ib);
        if (Tensor<T>* ga = tape.grad_buffer(ia)) {
          for (std::size_t i = 0; i < n; ++i) {
            T acc = 0;
            for (std::size_t j = 0; j < d; ++j) acc += g[i * d + j] * bv[j];
            (*ga)[i] += acc;
          }
        }
        if (Tensor<T>* gb = tape.grad_buffer(ib)) {
          for (std::size_t j = 0; j < d; ++j) {
            T acc = 0;
            for (std::size_t i = 0; i < n; ++i) acc += g[i * d + j] * av[i];
            (*gb)[j] += acc;
          }
        }
      },
      "outer_product");
}

template <typename T>
Var<T> avg_pool2(const Var<T>& a) {
  require_rank(a, 4, "avg_pool2");
  const Shape& s = a.shape();
  if (s[2] % 2 != 0 || s[3] % 2 != 0) {
    throw ShapeError("avg_pool2: spatial size " + std::to_string(s[2]) + "x" +
                     std::to_string(s[3]) + " is not divisible by 2");
  }
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], oh = h / 2, ow = w / 2;
  const Tensor<T>& x = a.value();
  Tensor<T> y({s[0], s[1], oh, ow});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.data().data() + p * h * w;
    T* dst = y.data().data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const T* tl = src + 2 * i * w + 2 * j;
        dst[i * ow + j] = T(0.25) * (tl[0] + tl[1] + tl[w] + tl[w + 1]);
      }
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(y), {a},
      [ia, planes, h, w, oh, ow](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const Tensor<T>& g = tape.grad(self);
        for (std::size_t p = 0; p < planes; ++p) {
          const T* src = g.data().data() + p * oh * ow;
          T* dst = ga->data().data() + p * h * w;
          for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
              const T v = T(0.25) * src[i * ow + j];
              T* tl = dst + 2 * i * w + 2 * j;
              tl[0] += v;
              tl[1] += v;
              tl[w] += v;
              tl[w + 1] += v;
            }
        }
      },
      "avg_pool2");
}

template <typename T>
Var<T> upsample_nearest(const Var<T>& a, std::size_t factor) {
  require_rank(a, 4, "upsample_nearest");
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  const Shape& s = a.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], oh = h * factor,
                    ow = w * factor;
  const Tensor<T>& x = a.value();
  Tensor<T> y({s[0], s[1], oh, ow});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.data().data() + p * h * w;
    T* dst = y.data().data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) dst[i * ow + j] = src[(i / factor) * w + j / factor];
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(y), {a},
      [ia, planes, h, w, oh, ow, factor](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const Tensor<T>& g = tape.grad(self);
        for (std::size_t p = 0; p < planes; ++p) {
          const T* src = g.data().data() + p * oh * ow;
          T* dst = ga->data().data() + p * h * w;
          for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j)
              dst[(i / factor) * w + j / factor] += src[i * ow + j];
        }
      },
      "upsample_nearest");
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  require_rank(a, 4, "concat_channels");
  require_rank(b, 4, "concat_channels");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw ShapeError("concat_channels: batch/spatial dimensions differ, " +
                     shape_to_string(sa) + " vs " + shape_to_string(sb));
  }
  const std::size_t n = sa[0], ca = sa[1], cb = sb[1], plane = sa[2] * sa[3];
  Tensor<T> y({n, ca + cb, sa[2], sa[3]});
  const T* av = a.value().data().data();
  const T* bv = b.value().data().data();
  T* out = y.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(av + i * ca * plane, av + (i + 1) * ca * plane, out + i * (ca + cb) * plane);
    std::copy(bv + i * cb * plane, bv + (i + 1) * cb * plane,
              out + (i * (ca + cb) + ca) * plane);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(y), {a, b},
      [ia, ib, n, ca, cb, plane](Tape<T>& tape, std::size_t self) {
        const T* g = tape.grad(self).data().data();
        if (Tensor<T>* ga = tape.grad_buffer(ia)) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < ca * plane; ++k)
              (*ga)[i * ca * plane + k] += g[i * (ca + cb) * plane + k];
        }
        if (Tensor<T>* gb = tape.grad_buffer(ib)) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < cb * plane; ++k)
              (*gb)[i * cb * plane + k] += g[(i * (ca + cb) + ca) * plane + k];
        }
      },
      "concat_channels");
}

template <typename T>
Var<T> slice_channels(const Var<T>& a, std::size_t begin, std::size_t end) {
  require_rank(a, 4, "slice_channels");
  const Shape& s = a.shape();
  if (begin > end || end > s[1]) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") invalid for " + std::to_string(s[1]) +
                     " channels");
  }
  const std::size_t n = s[0], c = s[1], k = end - begin, plane = s[2] * s[3];
  Tensor<T> y({n, k, s[2], s[3]});
  const T* x = a.value().data().data();
  for (std::size_t i = 0; i < n; ++i)
    std::copy(x + (i * c + begin) * plane, x + (i * c + end) * plane,
              y.data().data() + i * k * plane);
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(y), {a},
      [ia, n, c, k, begin, plane](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const T* g = tape.grad(self).data().data();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t e = 0; e < k * plane; ++e)
            (*ga)[(i * c + begin) * plane + e] += g[i * k * plane + e];
      },
      "slice_channels");
}

template <typename T>
Var<T> concat_batch(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no operands");
  const Shape& first = parts.front().shape();
  if (first.empty()) throw ShapeError("concat_batch: operands must have rank >= 1");
  Shape tail(first.begin() + 1, first.end());
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(tail.begin(), tail.end(), s.begin() + 1)) {
      throw ShapeError("concat_batch: trailing dimensions differ, " + shape_to_string(first) +
                       " vs " + shape_to_string(s));
    }
    offsets.push_back(total);
    total += p.value().numel();
  }
  Shape out_shape = first;
  out_shape[0] = 0;
  for (const auto& p : parts) out_shape[0] += p.shape()[0];
  Tensor<T> y(out_shape);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto src = parts[i].value().data();
    std::copy(src.begin(), src.end(), y.data().begin() + static_cast<std::ptrdiff_t>(offsets[i]));
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts.front().tape().record(
      std::move(y), parts,
      [ids, offsets](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          Tensor<T>* gp = tape.grad_buffer(ids[i]);
          if (!gp) continue;
          for (std::size_t e = 0; e < gp->numel(); ++e) (*gp)[e] += g[offsets[i] + e];
        }
      },
      "concat_batch");
}

template <typename T>
Var<T> slice_batch(const Var<T>& a, std::size_t index) {
  const Shape& s = a.shape();
  if (s.empty() || index >= s[0]) {
    throw ShapeError("slice_batch: index " + std::to_string(index) + " out of range for " +
                     shape_to_string(s));
  }
  Shape out_shape = s;
  out_shape[0] = 1;
  const std::size_t stride = shape_numel(out_shape);
  const auto src = a.value().data();
  Tensor<T> y(out_shape,
              std::vector<T>(src.begin() + static_cast<std::ptrdiff_t>(index * stride),
                             src.begin() + static_cast<std::ptrdiff_t>((index + 1) * stride)));
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(y), {a},
      [ia, index, stride](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const Tensor<T>& g = tape.grad(self);
        for (std::size_t e = 0; e < stride; ++e) (*ga)[index * stride + e] += g[e];
      },
      "slice_batch");
}

template <typename T>
Var<T> repeat_batch(const Var<T>& a, std::size_t count) {
  const Shape& s = a.shape();
  if (s.empty() || s[0] != 1) {
    throw ShapeError("repeat_batch: leading dimension must be 1, got " + shape_to_string(s));
  }
  if (count == 0) throw ShapeError("repeat_batch: count must be positive");
  Shape out_shape = s;
  out_shape[0] = count;
  const std::size_t stride = a.value().numel();
  Tensor<T> y(out_shape);
  const auto src = a.value().data();
  for (std::size_t i = 0; i < count; ++i)
    std::copy(src.begin(), src.end(), y.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(y), {a},
      [ia, count, stride](Tape<T>& tape, std::size_t self) {
        Tensor<T>* ga = tape.grad_buffer(ia);
        if (!ga) return;
        const Tensor<T>& g = tape.grad(self);
        for (std::size_t i = 0; i < count; ++i)
          for (std::size_t e = 0; e < stride; ++e) (*ga)[e] += g[i * stride + e];
      },
      "repeat_batch");
}

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, std::size_t stride, std::size_t pad) {
  Tensor<T> y = conv2d_forward(input.value(), kernel.value(), stride, pad);
  const std::size_t ix = input.id(), iw = kernel.id();
  return input.tape().record(
      std::move(y), {input, kernel},
      [ix, iw, stride, pad](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad(self);
        if (tape.requires_grad(ix)) {
          tape.accumulate(ix, conv2d_backward_input(g, tape.value(iw), tape.value(ix).shape(),
                                                    stride, pad));
        }
        if (tape.requires_grad(iw)) {
          tape.accumulate(iw, conv2d_backward_kernel(tape.value(ix), g, tape.value(iw).shape(),
                                                     stride, pad));
        }
      },
      "conv2d");
}

template <typename T>
Var<T> conv2d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias, std::size_t stride,
              std::size_t pad) {
  const Shape& ks = kernel.shape();
  if (ks.size() != 4 || bias.shape() != Shape{ks[0]}) {
    throw ShapeError("conv2d: bias shape " + shape_to_string(bias.shape()) +
                     " does not match kernel " + shape_to_string(ks));
  }
  Tensor<T> y = conv2d_forward(input.value(), kernel.value(), stride, pad);
  const std::size_t n = y.dim(0), o = y.dim(1), plane = y.dim(2) * y.dim(3);
  const Tensor<T>& b = bias.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < o; ++c) {
      T* p = y.data().data() + (i * o + c) * plane;
      for (std::size_t e = 0; e < plane; ++e) p[e] += b[c];
    }
  const std::size_t ix = input.id(), iw = kernel.id(), ib = bias.id();
  return input.tape().record(
      std::move(y), {input, kernel, bias},
      [ix, iw, ib, stride, pad, n, o, plane](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad(self);
        if (tape.requires_grad(ix)) {
          tape.accumulate(ix, conv2d_backward_input(g, tape.value(iw), tape.value(ix).shape(),
                                                    stride, pad));
        }
        if (tape.requires_grad(iw)) {
          tape.accumulate(iw, conv2d_backward_kernel(tape.value(ix), g, tape.value(iw).shape(),
                                                     stride, pad));
        }
        if (Tensor<T>* gb = tape.grad_buffer(ib)) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < o; ++c) {
              const T* p = g.data().data() + (i * o + c) * plane;
              T acc = 0;
              for (std::size_t e = 0; e < plane; ++e) acc += p[e];
              (*gb)[c] += acc;
            }
        }
      },
      "conv2d");
}

template <typename T>
Var<T> full_conv2d(const Var<T>& input, const Var<T>& kernel, std::size_t stride) {
  require_rank(input, 4, "full_conv2d");
  require_rank(kernel, 4, "full_conv2d");
  if (stride < 1) throw ShapeError("full_conv2d: stride must be >= 1");
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  if (xs[1] != ks[0]) {
    throw ShapeError("full_conv2d: input has " + std::to_string(xs[1]) +
                     " channels but kernel expects " + std::to_string(ks[0]) + " (input " +
                     shape_to_string(xs) + ", kernel " + shape_to_string(ks) + ")");
  }
  if (xs[2] == 0 || xs[3] == 0) throw ShapeError("full_conv2d: empty spatial input");
  const Shape out_shape{xs[0], ks[1], (xs[2] - 1) * stride + ks[2], (xs[3] - 1) * stride + ks[3]};
  Tensor<T> y = conv2d_backward_input(input.value(), kernel.value(), out_shape, stride, 0);
  const std::size_t ix = input.id(), iw = kernel.id();
  return input.tape().record(
      std::move(y), {input, kernel},
      [ix, iw, stride](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.grad(self);
        if (tape.requires_grad(ix)) {
          tape.accumulate(ix, conv2d_forward(g, tape.value(iw), stride, 0));
        }
        if (tape.requires_grad(iw)) {
          tape.accumulate(iw, conv2d_backward_kernel(g, tape.value(ix), tape.value(iw).shape(),
                                                     stride, 0));
        }
      },
      "full_conv2d");
}

#define MTEX_INSTANTIATE_OPS(T)                                                      \
  template Var<T> add(const Var<T>&, const Var<T>&);                                 \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                 \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                 \
  template Var<T> scale(const Var<T>&, double);                                      \
  template Var<T> shift(const Var<T>&, const Var<T>&);                               \
  template Var<T> sum(const Var<T>&);                                                \
  template Var<T> mean(const Var<T>&);                                               \
  template Var<T> l1_norm(const Var<T>&);                                            \
  template Var<T> abs(const Var<T>&);                                                \
  template Var<T> relu(const Var<T>&);                                               \
  template Var<T> leaky_relu(const Var<T>&, double);                                 \
  template Var<T> tanh(const Var<T>&);                                               \
  template Var<T> reshape(const Var<T>&, Shape);                                     \
  template Var<T> transpose(const Var<T>&);                                          \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                              \
  template Var<T> outer_product(const Var<T>&, const Var<T>&);                       \
  template Var<T> avg_pool2(const Var<T>&);                                          \
  template Var<T> upsample_nearest(const Var<T>&, std::size_t);                      \
  template Var<T> concat_channels(const Var<T>&, const Var<T>&);                     \
  template Var<T> slice_channels(const Var<T>&, std::size_t, std::size_t);           \
  template Var<T> concat_batch(const std::vector<Var<T>>&);                          \
  template Var<T> slice_batch(const Var<T>&, std::size_t);                           \
  template Var<T> repeat_batch(const Var<T>&, std::size_t);                          \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, std::size_t, std::size_t);    \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, std::size_t,   \
                         std::size_t);                                               \
  template Var<T> full_conv2d(const Var<T>&, const Var<T>&, std::size_t);

MTEX_INSTANTIATE_OPS(float)
MTEX_INSTANTIATE_OPS(double)

}  // namespace mtex
