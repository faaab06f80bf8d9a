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

#ifndef GLAB_METRICS_HPP_
#define GLAB_METRICS_HPP_

#include <limits>
#include <optional>
#include <span>

#include "glab/tensor.hpp"

namespace glab {

// Reported in place of a PSNR when the images are identical.
inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();
// Value used for an infinite PSNR when averaging over trials.
inline constexpr double kPsnrCap = 100.0;

double Mse(std::span<const double> x, std::span<const double> y);

// 10 log10(1 / MSE) for pixels in [0,1]; kPsnrInfinite when MSE is 0.
double Psnr(const Tensor& x, const Tensor& y);
double Psnr(std::span<const double> x, std::span<const double> y);
double CappedPsnr(double psnr);

struct SsimResult {
  double value = 0.0;
  // True when the image was smaller than the window and a single global
  // window was used instead.
  bool global_fallback = false;
};

// Windowed SSIM with a 7x7 uniform window, K1=0.01, K2=0.03, L=1, averaged
// over windows and channels. Shapes (c,h,w) or (n,c,h,w); batches average
// over images.
SsimResult Ssim(const Tensor& x, const Tensor& y);

// Performance-maintenance metric: defended / original accuracy x 100.
double Pmm(double defense_acc, double original_acc);

struct MetricReport {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double eval_net_score = 0.0;
  std::optional<double> pmm;
};

}  // namespace glab

#endif  // GLAB_METRICS_HPP_
