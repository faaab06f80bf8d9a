// Copyright 2026 The GLAB Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "glab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace glab::ops {
namespace {

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
  }
}

void RequireRank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.ndim() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got shape " +
                     ShapeToString(a.shape()));
  }
}

template <typename F>
std::vector<double> Map(const Tensor& a, F f) {
  auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return out;
}

template <typename F>
std::vector<double> Map2(const Tensor& a, const Tensor& b, F f) {
  auto x = a.values();
  auto y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}

// Row-major strides split around `axis`: outer x axis x inner.
struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t extent = 1;
  std::int64_t inner = 1;
};

AxisSplit SplitAt(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

struct ConvGeometry {
  std::int64_t n, ci, h, w;
  std::int64_t co, kh, kw;
  std::int64_t oh, ow;
  std::int64_t stride, pad;
};

ConvGeometry MakeGeometry(const Shape& x, const Shape& wt, Conv2dParams p) {
  if (x.size() != 4 || wt.size() != 4) {
    throw ShapeError("conv2d: expected rank-4 input and weight, got " +
                     ShapeToString(x) + " and " + ShapeToString(wt));
  }
  if (x[1] != wt[1]) {
    throw ShapeError("conv2d: input channels " + std::to_string(x[1]) +
                     " do not match weight " + ShapeToString(wt));
  }
  if (p.stride < 1 || p.padding < 0) {
    throw ShapeError("conv2d: invalid stride/padding");
  }
  ConvGeometry g{x[0], x[1], x[2], x[3], wt[0], wt[2], wt[3], 0, 0,
                 p.stride, p.padding};
  g.oh = ConvOutputSize(g.h, g.kh, p);
  g.ow = ConvOutputSize(g.w, g.kw, p);
  if (g.oh < 1 || g.ow < 1) {
    throw ShapeError("conv2d: kernel larger than padded input " +
                     ShapeToString(x));
  }
  return g;
}

// Unfolds sample n of x into a (ci*kh*kw, oh*ow) matrix; padded taps are 0.
void Im2Col(const ConvGeometry& g, const double* x, double* cols) {
  const std::int64_t p_count = g.oh * g.ow;
  for (std::int64_t ci = 0; ci < g.ci; ++ci) {
    const double* plane = x + ci * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        double* row = cols + ((ci * g.kh + ky) * g.kw + kx) * p_count;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            row[oy * g.ow + ox] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                                      ? plane[iy * g.w + ix]
                                      : 0.0;
          }
        }
      }
    }
  }
}

// Adds a (ci*kh*kw, oh*ow) matrix back onto sample n of an input gradient.
void Col2Im(const ConvGeometry& g, const double* cols, double* x) {
  const std::int64_t p_count = g.oh * g.ow;
  for (std::int64_t ci = 0; ci < g.ci; ++ci) {
    double* plane = x + ci * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const double* row = cols + ((ci * g.kh + ky) * g.kw + kx) * p_count;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) plane[iy * g.w + ix] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "add");
  return Tensor::FromOp("add", a.shape(),
                        Map2(a, b, [](double x, double y) { return x + y; }),
                        {a, b}, [](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{g, g};
                        });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "sub");
  return Tensor::FromOp("sub", a.shape(),
                        Map2(a, b, [](double x, double y) { return x - y; }),
                        {a, b}, [](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{g, Neg(g)};
                        });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "mul");
  return Tensor::FromOp("mul", a.shape(),
                        Map2(a, b, [](double x, double y) { return x * y; }),
                        {a, b}, [a, b](const Tensor& g, const Tensor&, const Needs& need) {
                          std::vector<Tensor> out(2);
                          if (need[0]) out[0] = Mul(g, b);
                          if (need[1]) out[1] = Mul(g, a);
                          return out;
                        });
}

Tensor Div(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "div");
  return Tensor::FromOp("div", a.shape(),
                        Map2(a, b, [](double x, double y) { return x / y; }),
                        {a, b}, [b](const Tensor& g, const Tensor& self, const Needs& need) {
                          std::vector<Tensor> out(2);
                          if (need[0]) out[0] = Div(g, b);
                          if (need[1]) out[1] = Neg(Mul(g, Div(self, b)));
                          return out;
                        });
}

Tensor Scale(const Tensor& a, double factor) {
  return Tensor::FromOp("scale", a.shape(),
                        Map(a, [factor](double x) { return x * factor; }), {a},
                        [factor](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{Scale(g, factor)};
                        });
}

Tensor AddScalar(const Tensor& a, double offset) {
  return Tensor::FromOp("add_scalar", a.shape(),
                        Map(a, [offset](double x) { return x + offset; }), {a},
                        [](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{g};
                        });
}

Tensor Neg(const Tensor& a) { return Scale(a, -1.0); }

Tensor Square(const Tensor& a) { return Mul(a, a); }

Tensor Exp(const Tensor& a) {
  return Tensor::FromOp("exp", a.shape(),
                        Map(a, [](double x) { return std::exp(x); }), {a},
                        [](const Tensor& g, const Tensor& self, const Needs&) {
                          return std::vector<Tensor>{Mul(g, self)};
                        });
}

Tensor Log(const Tensor& a) {
  return Tensor::FromOp("log", a.shape(),
                        Map(a, [](double x) { return std::log(x); }), {a},
                        [a](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{Div(g, a)};
                        });
}

Tensor Sqrt(const Tensor& a) {
  return Tensor::FromOp("sqrt", a.shape(),
                        Map(a, [](double x) { return std::sqrt(x); }), {a},
                        [](const Tensor& g, const Tensor& self, const Needs&) {
                          return std::vector<Tensor>{Div(Scale(g, 0.5), self)};
                        });
}

Tensor Reciprocal(const Tensor& a) {
  return Tensor::FromOp("reciprocal", a.shape(),
                        Map(a, [](double x) { return 1.0 / x; }), {a},
                        [](const Tensor& g, const Tensor& self, const Needs&) {
                          return std::vector<Tensor>{
                              Neg(Mul(g, Mul(self, self)))};
                        });
}

Tensor Relu(const Tensor& a) {
  return Tensor::FromOp(
      "relu", a.shape(), Map(a, [](double x) { return x > 0.0 ? x : 0.0; }),
      {a}, [a](const Tensor& g, const Tensor&, const Needs&) {
        // Subgradient at exactly 0 is 0.
        Tensor mask = Tensor::Constant(
            a.shape(), Map(a, [](double x) { return x > 0.0 ? 1.0 : 0.0; }));
        return std::vector<Tensor>{Mul(g, mask)};
      });
}

Tensor Sigmoid(const Tensor& a) {
  return Tensor::FromOp(
      "sigmoid", a.shape(), Map(a,
                                [](double x) {
                                  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
                                  const double e = std::exp(x);
                                  return e / (1.0 + e);
                                }),
      {a}, [](const Tensor& g, const Tensor& self, const Needs&) {
        return std::vector<Tensor>{
            Mul(g, Mul(self, AddScalar(Neg(self), 1.0)))};
      });
}

Tensor Sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  Shape shape = a.shape();
  return Tensor::FromOp("sum", {1}, {total}, {a},
                        [shape](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{Expand(g, shape)};
                        });
}

Tensor Mean(const Tensor& a) {
  if (a.numel() == 0) throw ShapeError("mean of empty tensor");
  return Scale(Sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor Expand(const Tensor& scalar, const Shape& shape) {
  const double v = scalar.item();
  return Tensor::FromOp("expand", shape,
                        std::vector<double>(NumElements(shape), v), {scalar},
                        [](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{Sum(g)};
                        });
}

Tensor SumRows(const Tensor& a) {
  RequireRank(a, 2, "sum_rows");
  const std::int64_t n = a.dim(0), m = a.dim(1);
  auto in = a.values();
  std::vector<double> out(n, 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < m; ++j) s += in[i * m + j];
    out[i] = s;
  }
  return Tensor::FromOp("sum_rows", {n, 1}, std::move(out), {a},
                        [m](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{ExpandRows(g, m)};
                        });
}

Tensor ExpandRows(const Tensor& a, std::int64_t columns) {
  if (a.ndim() != 2 || a.dim(1) != 1) {
    throw ShapeError("expand_rows: expected (n,1), got " +
                     ShapeToString(a.shape()));
  }
  const std::int64_t n = a.dim(0);
  auto in = a.values();
  std::vector<double> out(n * columns);
  for (std::int64_t i = 0; i < n; ++i) {
    std::fill_n(out.begin() + i * columns, columns, in[i]);
  }
  return Tensor::FromOp("expand_rows", {n, columns}, std::move(out), {a},
                        [](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{SumRows(g)};
                        });
}

Tensor SumChannels(const Tensor& a) {
  if (a.ndim() < 2) {
    throw ShapeError("sum_channels: expected rank >= 2, got " +
                     ShapeToString(a.shape()));
  }
  const AxisSplit s = SplitAt(a.shape(), 1);
  auto in = a.values();
  std::vector<double> out(s.extent, 0.0);
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t c = 0; c < s.extent; ++c) {
      const double* p = in.data() + (o * s.extent + c) * s.inner;
      double acc = out[c];
      for (std::int64_t i = 0; i < s.inner; ++i) acc += p[i];
      out[c] = acc;
    }
  }
  Shape shape = a.shape();
  return Tensor::FromOp("sum_channels", {s.extent}, std::move(out), {a},
                        [shape](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{BroadcastChannels(g, shape)};
                        });
}

Tensor BroadcastChannels(const Tensor& bias, const Shape& shape) {
  if (shape.size() < 2 || bias.ndim() != 1 || bias.dim(0) != shape[1]) {
    throw ShapeError("broadcast_channels: bias " + ShapeToString(bias.shape()) +
                     " incompatible with " + ShapeToString(shape));
  }
  const AxisSplit s = SplitAt(shape, 1);
  auto b = bias.values();
  std::vector<double> out(NumElements(shape));
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t c = 0; c < s.extent; ++c) {
      std::fill_n(out.begin() + (o * s.extent + c) * s.inner, s.inner, b[c]);
    }
  }
  return Tensor::FromOp("broadcast_channels", shape, std::move(out), {bias},
                        [](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{SumChannels(g)};
                        });
}

Tensor AddChannelBias(const Tensor& x, const Tensor& bias) {
  return Add(x, BroadcastChannels(bias, x.shape()));
}

Tensor Reshape(const Tensor& a, const Shape& shape) {
  if (NumElements(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + ShapeToString(a.shape()) +
                     " as " + ShapeToString(shape));
  }
  Shape original = a.shape();
  auto v = a.values();
  return Tensor::FromOp("reshape", shape, std::vector<double>(v.begin(), v.end()),
                        {a}, [original](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{Reshape(g, original)};
                        });
}

Tensor Flatten(const Tensor& a) {
  if (a.ndim() < 1) throw ShapeError("flatten of rank-0 tensor");
  const std::int64_t n = a.dim(0);
  return Reshape(a, {n, n == 0 ? 0 : a.numel() / n});
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  RequireRank(a, 2, "matmul");
  RequireRank(b, 2, "matmul");
  const std::int64_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ " +
                     ShapeToString(a.shape()) + " x " +
                     ShapeToString(b.shape()));
  }
  auto x = a.values();
  auto y = b.values();
  std::vector<double> out(n * m, 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::int64_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      const double* yrow = y.data() + p * m;
      for (std::int64_t j = 0; j < m; ++j) row[j] += xv * yrow[j];
    }
  }
  return Tensor::FromOp("matmul", {n, m}, std::move(out), {a, b},
                        [a, b](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{
                              MatMul(g, Transpose(b)), MatMul(Transpose(a), g)};
                        });
}

Tensor Transpose(const Tensor& a) {
  RequireRank(a, 2, "transpose");
  const std::int64_t n = a.dim(0), m = a.dim(1);
  auto x = a.values();
  std::vector<double> out(n * m);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < m; ++j) out[j * n + i] = x[i * m + j];
  }
  return Tensor::FromOp("transpose", {m, n}, std::move(out), {a},
                        [](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{Transpose(g)};
                        });
}

Tensor Narrow(const Tensor& a, std::size_t axis, std::int64_t start,
              std::int64_t length) {
  if (axis >= a.ndim() || start < 0 || length < 0 ||
      start + length > a.dim(axis)) {
    throw ShapeError("narrow: slab [" + std::to_string(start) + ", +" +
                     std::to_string(length) + ") out of range on axis " +
                     std::to_string(axis) + " of " + ShapeToString(a.shape()));
  }
  const AxisSplit s = SplitAt(a.shape(), axis);
  Shape shape = a.shape();
  shape[axis] = length;
  auto in = a.values();
  std::vector<double> out(NumElements(shape));
  for (std::int64_t o = 0; o < s.outer; ++o) {
    std::copy_n(in.begin() + (o * s.extent + start) * s.inner,
                length * s.inner, out.begin() + o * length * s.inner);
  }
  const std::int64_t full = a.dim(axis);
  return Tensor::FromOp("narrow", shape, std::move(out), {a},
                        [axis, start, full](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{PadAxis(g, axis, start, full)};
                        });
}

Tensor PadAxis(const Tensor& a, std::size_t axis, std::int64_t start,
               std::int64_t full_length) {
  if (axis >= a.ndim() || start < 0 || start + a.dim(axis) > full_length) {
    throw ShapeError("pad_axis: cannot place " + ShapeToString(a.shape()) +
                     " at offset " + std::to_string(start));
  }
  const AxisSplit s = SplitAt(a.shape(), axis);
  Shape shape = a.shape();
  shape[axis] = full_length;
  auto in = a.values();
  std::vector<double> out(NumElements(shape), 0.0);
  for (std::int64_t o = 0; o < s.outer; ++o) {
    std::copy_n(in.begin() + o * s.extent * s.inner, s.extent * s.inner,
                out.begin() + (o * full_length + start) * s.inner);
  }
  const std::int64_t length = a.dim(axis);
  return Tensor::FromOp("pad_axis", shape, std::move(out), {a},
                        [axis, start, length](const Tensor& g, const Tensor&, const Needs&) {
                          return std::vector<Tensor>{Narrow(g, axis, start, length)};
                        });
}

std::int64_t ConvOutputSize(std::int64_t in, std::int64_t kernel,
                            Conv2dParams params) {
  return (in + 2 * params.padding - kernel) / params.stride + 1;
}

Tensor Conv2d(const Tensor& x, const Tensor& weight, Conv2dParams params) {
  const ConvGeometry g = MakeGeometry(x.shape(), weight.shape(), params);
  const std::int64_t k_count = g.ci * g.kh * g.kw, p_count = g.oh * g.ow;
  std::vector<double> out(g.n * g.co * p_count, 0.0);
  std::vector<double> cols(k_count * p_count);
  const double* xv = x.values().data();
  const double* wv = weight.values().data();
  for (std::int64_t n = 0; n < g.n; ++n) {
    Im2Col(g, xv + n * g.ci * g.h * g.w, cols.data());
    for (std::int64_t co = 0; co < g.co; ++co) {
      double* __restrict o = out.data() + (n * g.co + co) * p_count;
      const double* wrow = wv + co * k_count;
      for (std::int64_t k = 0; k < k_count; ++k) {
        const double wval = wrow[k];
        const double* __restrict c = cols.data() + k * p_count;
        for (std::int64_t p = 0; p < p_count; ++p) o[p] += wval * c[p];
      }
    }
  }
  Shape x_shape = x.shape();
  Shape w_shape = weight.shape();
  return Tensor::FromOp(
      "conv2d", {g.n, g.co, g.oh, g.ow}, std::move(out), {x, weight},
      [x, weight, x_shape, w_shape, params](const Tensor& grad, const Tensor&, const Needs& need) {
        std::vector<Tensor> out(2);
        if (need[0]) out[0] = Conv2dInputGrad(grad, weight, x_shape, params);
        if (need[1]) out[1] = Conv2dWeightGrad(x, grad, w_shape, params);
        return out;
      });
}

Tensor Conv2dInputGrad(const Tensor& grad_out, const Tensor& weight,
                       const Shape& input_shape, Conv2dParams params) {
  const ConvGeometry g = MakeGeometry(input_shape, weight.shape(), params);
  const Shape expected{g.n, g.co, g.oh, g.ow};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv2d input grad: upstream " +
                     ShapeToString(grad_out.shape()) + " expected " +
                     ShapeToString(expected));
  }
  const std::int64_t k_count = g.ci * g.kh * g.kw, p_count = g.oh * g.ow;
  std::vector<double> out(NumElements(input_shape), 0.0);
  std::vector<double> cols(k_count * p_count);
  const double* gv = grad_out.values().data();
  const double* wv = weight.values().data();
  for (std::int64_t n = 0; n < g.n; ++n) {
    std::fill(cols.begin(), cols.end(), 0.0);
    for (std::int64_t co = 0; co < g.co; ++co) {
      const double* __restrict go = gv + (n * g.co + co) * p_count;
      const double* wrow = wv + co * k_count;
      for (std::int64_t k = 0; k < k_count; ++k) {
        const double wval = wrow[k];
        double* __restrict c = cols.data() + k * p_count;
        for (std::int64_t p = 0; p < p_count; ++p) c[p] += wval * go[p];
      }
    }
    Col2Im(g, cols.data(), out.data() + n * g.ci * g.h * g.w);
  }
  return Tensor::FromOp(
      "conv2d_input_grad", input_shape, std::move(out), {grad_out, weight},
      [grad_out, weight, params](const Tensor& h, const Tensor&, const Needs& need) {
        std::vector<Tensor> out(2);
        if (need[0]) out[0] = Conv2d(h, weight, params);
        if (need[1]) out[1] = Conv2dWeightGrad(h, grad_out, weight.shape(), params);
        return out;
      });
}

Tensor Conv2dWeightGrad(const Tensor& x, const Tensor& grad_out,
                        const Shape& weight_shape, Conv2dParams params) {
  const ConvGeometry g = MakeGeometry(x.shape(), weight_shape, params);
  const Shape expected{g.n, g.co, g.oh, g.ow};
  if (grad_out.shape() != expected) {
    throw ShapeError("conv2d weight grad: upstream " +
                     ShapeToString(grad_out.shape()) + " expected " +
                     ShapeToString(expected));
  }
  const std::int64_t k_count = g.ci * g.kh * g.kw, p_count = g.oh * g.ow;
  std::vector<double> out(NumElements(weight_shape), 0.0);
  std::vector<double> cols(k_count * p_count);
  const double* gv = grad_out.values().data();
  const double* xv = x.values().data();
  for (std::int64_t n = 0; n < g.n; ++n) {
    Im2Col(g, xv + n * g.ci * g.h * g.w, cols.data());
    for (std::int64_t co = 0; co < g.co; ++co) {
      const double* __restrict go = gv + (n * g.co + co) * p_count;
      double* wrow = out.data() + co * k_count;
      for (std::int64_t k = 0; k < k_count; ++k) {
        const double* __restrict c = cols.data() + k * p_count;
        double acc = 0.0;
        for (std::int64_t p = 0; p < p_count; ++p) acc += go[p] * c[p];
        wrow[k] += acc;
      }
    }
  }
  return Tensor::FromOp(
      "conv2d_weight_grad", weight_shape, std::move(out), {x, grad_out},
      [x, grad_out, params](const Tensor& h, const Tensor&, const Needs& need) {
        std::vector<Tensor> out(2);
        if (need[0]) out[0] = Conv2dInputGrad(grad_out, h, x.shape(), params);
        if (need[1]) out[1] = Conv2d(x, h, params);
        return out;
      });
}

Tensor LogSumExpRows(const Tensor& logits) {
  RequireRank(logits, 2, "logsumexp_rows");
  const std::int64_t n = logits.dim(0), m = logits.dim(1);
  auto z = logits.values();
  std::vector<double> out(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * m;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < m; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::int64_t j = 0; j < m; ++j) s += std::exp(row[j] - mx);
    out[i] = mx + std::log(s);
  }
  return Tensor::FromOp(
      "logsumexp_rows", {n, 1}, std::move(out), {logits},
      [logits, m](const Tensor& g, const Tensor& self, const Needs&) {
        Tensor softmax = Exp(Sub(logits, ExpandRows(self, m)));
        return std::vector<Tensor>{Mul(ExpandRows(g, m), softmax)};
      });
}

Tensor LogSoftmax(const Tensor& logits) {
  return Sub(logits, ExpandRows(LogSumExpRows(logits), logits.dim(1)));
}

Tensor Softmax(const Tensor& logits) { return Exp(LogSoftmax(logits)); }

Tensor SoftmaxCrossEntropy(const Tensor& logits, std::span<const int> labels) {
  RequireRank(logits, 2, "softmax_cross_entropy");
  const std::int64_t n = logits.dim(0), m = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  std::vector<double> onehot(n * m, 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= m) {
      throw ShapeError("label " + std::to_string(labels[i]) +
                       " out of range for " + std::to_string(m) + " classes");
    }
    onehot[i * m + labels[i]] = 1.0;
  }
  return SoftCrossEntropy(logits, Tensor::Constant({n, m}, std::move(onehot)));
}

Tensor SoftCrossEntropy(const Tensor& logits, const Tensor& target_probs) {
  RequireSameShape(logits, target_probs, "soft_cross_entropy");
  const double n = static_cast<double>(logits.dim(0));
  return Scale(Sum(Mul(target_probs, LogSoftmax(logits))), -1.0 / n);
}

Tensor Mse(const Tensor& a, const Tensor& b) { return Mean(Square(Sub(a, b))); }

Tensor Dot(const Tensor& a, const Tensor& b) { return Sum(Mul(a, b)); }

Tensor SquaredDistance(const std::vector<Tensor>& a,
                       const std::vector<Tensor>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("squared_distance: lists of length " +
                     std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  Tensor total = Sum(Square(Sub(a[0], b[0])));
  for (std::size_t i = 1; i < a.size(); ++i) {
    total = Add(total, Sum(Square(Sub(a[i], b[i]))));
  }
  return total;
}

Tensor CosineDistance(const std::vector<Tensor>& a,
                      const std::vector<Tensor>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("cosine_distance: lists of length " +
                     std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  Tensor dot = Dot(a[0], b[0]);
  Tensor aa = Dot(a[0], a[0]);
  Tensor bb = Dot(b[0], b[0]);
  for (std::size_t i = 1; i < a.size(); ++i) {
    dot = Add(dot, Dot(a[i], b[i]));
    aa = Add(aa, Dot(a[i], a[i]));
    bb = Add(bb, Dot(b[i], b[i]));
  }
  return AddScalar(Neg(Div(dot, Sqrt(Mul(aa, bb)))), 1.0);
}

Tensor TotalVariation(const Tensor& x, double eps) {
  if (x.ndim() < 2) {
    throw ShapeError("total_variation: expected an image tensor, got " +
                     ShapeToString(x.shape()));
  }
  const std::size_t h_axis = x.ndim() - 2;
  const std::size_t w_axis = x.ndim() - 1;
  auto smooth_abs_sum = [&](const Tensor& d) {
    // sqrt(d^2 + eps^2) - eps: smooth at 0 and exactly zero there.
    Tensor s = Sum(Sqrt(AddScalar(Square(d), eps * eps)));
    return AddScalar(s, -eps * static_cast<double>(d.numel()));
  };
  Tensor total = Tensor::Scalar(0.0);
  const std::int64_t h = x.dim(h_axis), w = x.dim(w_axis);
  if (h > 1) {
    Tensor d = Sub(Narrow(x, h_axis, 1, h - 1), Narrow(x, h_axis, 0, h - 1));
    total = Add(total, smooth_abs_sum(d));
  }
  if (w > 1) {
    Tensor d = Sub(Narrow(x, w_axis, 1, w - 1), Narrow(x, w_axis, 0, w - 1));
    total = Add(total, smooth_abs_sum(d));
  }
  return total;
}

}  // namespace glab::ops
