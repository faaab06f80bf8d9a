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

#include "glab/metrics.hpp"

#include <cmath>

#include "glab/errors.hpp"

namespace glab {
namespace {

constexpr int kWindow = 7;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

struct Moments {
  double mx = 0, my = 0, vx = 0, vy = 0, cov = 0;
};

// Sample (N-1) moments over an arbitrary set of paired pixels.
template <typename Get>
Moments WindowMoments(std::int64_t count, Get get) {
  Moments m;
  for (std::int64_t i = 0; i < count; ++i) {
    auto [a, b] = get(i);
    m.mx += a;
    m.my += b;
  }
  const double n = static_cast<double>(count);
  m.mx /= n;
  m.my /= n;
  for (std::int64_t i = 0; i < count; ++i) {
    auto [a, b] = get(i);
    m.vx += (a - m.mx) * (a - m.mx);
    m.vy += (b - m.my) * (b - m.my);
    m.cov += (a - m.mx) * (b - m.my);
  }
  const double denom = count > 1 ? n - 1.0 : 1.0;
  m.vx /= denom;
  m.vy /= denom;
  m.cov /= denom;
  return m;
}

double SsimFromMoments(const Moments& m) {
  return ((2 * m.mx * m.my + kC1) * (2 * m.cov + kC2)) /
         ((m.mx * m.mx + m.my * m.my + kC1) * (m.vx + m.vy + kC2));
}

}  // namespace

double Mse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) {
    throw ShapeError("mse: sizes " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

double Psnr(std::span<const double> x, std::span<const double> y) {
  const double mse = Mse(x, y);
  if (mse == 0.0) return kPsnrInfinite;
  return 10.0 * std::log10(1.0 / mse);
}

double Psnr(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) {
    throw ShapeError("psnr: shape mismatch " + ShapeToString(x.shape()) +
                     " vs " + ShapeToString(y.shape()));
  }
  return Psnr(x.values(), y.values());
}

double CappedPsnr(double psnr) { return std::min(psnr, kPsnrCap); }

SsimResult Ssim(const Tensor& x, const Tensor& y) {
  if (x.shape() != y.shape()) {
    throw ShapeError("ssim: shape mismatch " + ShapeToString(x.shape()) +
                     " vs " + ShapeToString(y.shape()));
  }
  if (x.ndim() != 3 && x.ndim() != 4) {
    throw ShapeError("ssim: expected (c,h,w) or (n,c,h,w), got " +
                     ShapeToString(x.shape()));
  }
  const std::size_t off = x.ndim() - 3;
  const std::int64_t images = x.ndim() == 4 ? x.dim(0) : 1;
  const std::int64_t c = x.dim(off), h = x.dim(off + 1), w = x.dim(off + 2);
  auto xv = x.values();
  auto yv = y.values();
  SsimResult result;
  result.global_fallback = h < kWindow || w < kWindow;
  double total = 0.0;
  for (std::int64_t img = 0; img < images; ++img) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const std::int64_t plane = (img * c + ch) * h * w;
      double channel_sum = 0.0;
      if (result.global_fallback) {
        channel_sum = SsimFromMoments(WindowMoments(h * w, [&](std::int64_t i) {
          return std::pair{xv[plane + i], yv[plane + i]};
        }));
      } else {
        std::int64_t windows = 0;
        for (std::int64_t r = 0; r + kWindow <= h; ++r) {
          for (std::int64_t q = 0; q + kWindow <= w; ++q) {
            channel_sum += SsimFromMoments(
                WindowMoments(kWindow * kWindow, [&](std::int64_t i) {
                  const std::int64_t at =
                      plane + (r + i / kWindow) * w + q + i % kWindow;
                  return std::pair{xv[at], yv[at]};
                }));
            ++windows;
          }
        }
        channel_sum /= static_cast<double>(windows);
      }
      total += channel_sum;
    }
  }
  result.value = total / static_cast<double>(images * c);
  return result;
}

double Pmm(double defense_acc, double original_acc) {
  if (!(original_acc > 0.0)) {
    throw NumericError("pmm: original accuracy must be > 0");
  }
  return defense_acc / original_acc * 100.0;
}

}  // namespace glab
