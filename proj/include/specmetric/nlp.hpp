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
// Normalised Laplacian Pyramid: multiscale residual decomposition with a
// divisive normalization stage, and the distance it induces between two
// spectrograms. The normalization filters and constants are the fittable
// state; see fitting.hpp for the two ways of fitting them.

#ifndef SPECMETRIC_NLP_HPP_
#define SPECMETRIC_NLP_HPP_

#include <string>
#include <vector>

#include "specmetric/matrix.hpp"
#include "specmetric/spectrogram.hpp"

namespace specmetric {

enum class DnMode { kImageDefault, kNone, kOnes, kStatistical, kPerceptual };

std::string dn_mode_name(DnMode mode);

// 5x5 binomial low-pass: outer product of [1 4 6 4 1]/16.
Matrix binomial_lowpass5();

struct NlpParams {
  int n_stages = 6;
  Matrix lowpass = binomial_lowpass5();
  std::vector<Matrix> dn_filters;    // one 5x5 non-negative kernel per stage
  std::vector<double> dn_constants;  // one positive sigma per stage
  DnMode dn_mode = DnMode::kImageDefault;

  // Plain Laplacian pyramid, no normalization.
  static NlpParams none(int n_stages);
  // All-ones 5x5 normalization filters (equal contribution of neighbours).
  static NlpParams ones(int n_stages, double sigma = 1.0);

  void validate() const;
};

struct PyramidOutputs {
  std::vector<Matrix> bands_z;      // pre-normalization residuals
  std::vector<Matrix> bands_y;      // normalized outputs
  std::vector<std::size_t> sizes;   // coefficient count per stage
};

// Builds the pyramid: for k < N, low = down2(L (*) x); z = x - 4*(L (*)
// up2(low)); x_{k+1} = low; final stage z_N = x_N. Normalization divides
// each z by sigma_k + P_k (*) |z| except in kNone mode. All convolutions
// mirror at the boundary.
PyramidOutputs build_pyramid(const Matrix& x, const NlpParams& p);

// Inverts the residual decomposition from the z bands alone. Exact by
// construction; exposed for the reconstruction property.
Matrix reconstruct_from_bands(const std::vector<Matrix>& bands_z,
                              const Matrix& lowpass);

// Eq-style distance: mean over stages of ||y1 - y2||_2 / sqrt(N_s).
double nlpd(const PyramidOutputs& a, const PyramidOutputs& b);
double nlpd(const MelSpectrogram& x1, const MelSpectrogram& x2,
            const NlpParams& p);

// Versioned JSON-shaped parameter file; round-trips bit-exact.
std::string serialize_nlp_params(const NlpParams& p);
NlpParams parse_nlp_params(const std::string& text);
void save_nlp_params(const NlpParams& p, const std::string& path);
NlpParams load_nlp_params(const std::string& path);

}  // namespace specmetric

#endif  // SPECMETRIC_NLP_HPP_
