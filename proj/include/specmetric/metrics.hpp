// Copyright 2026 The Specmetric Authors. All Rights Reserved.
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
//
// Reference metrics computed directly on mel spectrograms: MSE, SSIM,
// MS-SSIM and NSIM (the luminance*structure variant used by speech-quality
// models).

#ifndef SPECMETRIC_METRICS_HPP_
#define SPECMETRIC_METRICS_HPP_

#include <array>

#include "specmetric/matrix.hpp"
#include "specmetric/spectrogram.hpp"

namespace specmetric {

struct SsimConfig {
  int window_size = 11;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  // Dynamic range; <= 0 means "compute per pair" (max over both inputs
  // minus min over both). Spectrograms in dB are not bounded like 8-bit
  // images, so the per-pair form is the default.
  double dynamic_range = 0.0;
  std::array<double, 5> msssim_weights = default_msssim_weights();

  void validate() const;

  // The published five-scale weights normalized to sum exactly to 1 (the
  // printed constants add up to 1.0001).
  static std::array<double, 5> default_msssim_weights();
};

double mse(const Matrix& a, const Matrix& b);
double ssim(const Matrix& a, const Matrix& b, const SsimConfig& cfg = {});
double ms_ssim(const Matrix& a, const Matrix& b, const SsimConfig& cfg = {});
double nsim(const Matrix& a, const Matrix& b, const SsimConfig& cfg = {});

inline double mse(const MelSpectrogram& a, const MelSpectrogram& b) {
  return mse(a.values, b.values);
}
inline double ssim(const MelSpectrogram& a, const MelSpectrogram& b,
                   const SsimConfig& cfg = {}) {
  return ssim(a.values, b.values, cfg);
}
inline double ms_ssim(const MelSpectrogram& a, const MelSpectrogram& b,
                      const SsimConfig& cfg = {}) {
  return ms_ssim(a.values, b.values, cfg);
}
inline double nsim(const MelSpectrogram& a, const MelSpectrogram& b,
                   const SsimConfig& cfg = {}) {
  return nsim(a.values, b.values, cfg);
}

// Scale count actually used by ms_ssim for a given shape: largest m <= 5
// such that after m-1 mean-pool halvings both dims still fit the window.
int ms_ssim_scale_count(std::size_t rows, std::size_t cols,
                        const SsimConfig& cfg = {});

// 2x2 mean pooling, truncating a trailing odd row/column.
Matrix mean_pool2(const Matrix& in);

}  // namespace specmetric

#endif  // SPECMETRIC_METRICS_HPP_
