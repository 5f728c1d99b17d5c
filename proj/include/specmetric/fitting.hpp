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
// Two ways of fitting the divisive-normalization parameters:
// statistically, predicting each pyramid coefficient magnitude from its
// neighbourhood, and perceptually, maximizing the Pearson correlation
// between the pyramid distance and human ratings. Both run on the
// reverse-mode tape with a plain ADAM loop.

#ifndef SPECMETRIC_FITTING_HPP_
#define SPECMETRIC_FITTING_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "specmetric/matrix.hpp"
#include "specmetric/nlp.hpp"
#include "specmetric/spectrogram.hpp"

namespace specmetric {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 100;
  int batch_size = 1;
  std::uint64_t seed = 0;

  void validate() const;

  static AdamConfig statistical_defaults() {
    AdamConfig c;
    c.learning_rate = 0.01;
    c.epochs = 10;
    c.batch_size = 1;
    return c;
  }
  static AdamConfig perceptual_defaults() {
    AdamConfig c;
    c.learning_rate = 0.001;
    c.epochs = 100;
    return c;
  }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

// One bias-corrected ADAM update in place. Throws NumericError naming the
// offending index on a non-finite gradient.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const AdamConfig& cfg);

enum class ObjectiveKind { kCenterPixelMse, kPearson };

struct FitTraceEntry {
  int epoch = 0;
  std::string batch_tag;
  double objective = 0.0;
};

struct FitTrace {
  std::vector<double> epoch_objectives;  // one value per epoch
  std::vector<FitTraceEntry> entries;    // per batch/stage rows
  NlpParams final_params;
  ObjectiveKind objective_kind = ObjectiveKind::kCenterPixelMse;
};

// CSV: epoch,batch_tag,objective.
void write_fit_trace_csv(const FitTrace& trace, const std::string& path);

// Per-stage mean absolute coefficient value, floored at 1e-6 so silent
// bands never produce a zero divisor.
std::vector<double> sigma_init(const std::vector<Matrix>& bands_z);
// Training-set variant: mean over clips of the per-clip per-stage means.
std::vector<double> sigma_init_mean(
    const std::vector<std::vector<Matrix>>& per_clip_bands);

// Per-stage center-prediction loss (mean squared residual per coefficient)
// of `params` over the given spectrogram matrices.
std::vector<double> statistical_stage_losses(const std::vector<Matrix>& clips,
                                             const NlpParams& params);

// Fits each stage's filter to predict |z| at the center from the 5x5
// neighbourhood around it (center tap structurally zero). Sigma is held at
// its initialization; filters are projected to >= 0 after every step.
FitTrace fit_statistical(const std::vector<Matrix>& train,
                         const NlpParams& base, const AdamConfig& opt);
FitTrace fit_statistical(const std::vector<MelSpectrogram>& train,
                         const NlpParams& base, const AdamConfig& opt);

struct PerceptualPair {
  MelSpectrogram reference;
  MelSpectrogram degraded;
  double rating = 0.0;
  std::string degradation;  // batch grouping tag
};

struct PerceptualOptions {
  // Train the per-stage constants along with the filters.
  bool train_sigma = true;
  // Ratings are quality scores (larger = better); the objective then
  // maximizes Pearson(distance, -rating). Set false when the passed values
  // are already distance-like.
  bool ratings_are_quality = true;
};

// Maximizes the per-batch Pearson correlation between the pyramid distance
// and the (sign-mapped) ratings; one batch per degradation tag per epoch,
// in fixed tag order. Filters start from `base`; sigmas from sigma_init
// over the unique reference clips.
FitTrace fit_perceptual(const std::vector<PerceptualPair>& pairs,
                        const NlpParams& base, const AdamConfig& opt,
                        const PerceptualOptions& popt = {});

// Single-batch Pearson objective with its reverse-mode gradients, for
// gradient verification and diagnostics. Gradients are of the correlation
// itself (the fit descends on its negation).
struct PerceptualObjective {
  double pearson = 0.0;
  std::vector<Matrix> filter_grads;
  std::vector<double> sigma_grads;
};
PerceptualObjective perceptual_objective(
    const std::vector<PerceptualPair>& batch, const NlpParams& params,
    const PerceptualOptions& popt = {});

}  // namespace specmetric

#endif  // SPECMETRIC_FITTING_HPP_
