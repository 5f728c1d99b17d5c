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
// Regenerates data/nlp_image_default.json: normalization filters fit
// statistically to synthetic natural-image-like patches (1/f spectrum,
// random-phase gratings) rescaled to the dB range log-power spectrograms
// occupy. Deterministic; rerun only when the fitting pipeline changes.

#include <cmath>
#include <iostream>
#include <numbers>
#include <vector>

#include "specmetric/fitting.hpp"
#include "specmetric/matrix.hpp"
#include "specmetric/nlp.hpp"
#include "specmetric/rng.hpp"

namespace {

using namespace specmetric;

// Random-phase grating mixture with 1/f amplitudes.
Matrix natural_patch(CounterRng& rng, std::size_t size) {
  Matrix patch(size, size, 0.0);
  constexpr int kGratings = 64;
  for (int g = 0; g < kGratings; ++g) {
    const double freq = 0.5 * std::pow(size / 2.0, -rng.next_unit());
    const double theta = rng.next_uniform(0.0, std::numbers::pi);
    const double phase = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
    const double amp = 1.0 / std::max(freq * size, 1.0);
    const double fx = freq * std::cos(theta);
    const double fy = freq * std::sin(theta);
    for (std::size_t i = 0; i < size; ++i) {
      for (std::size_t j = 0; j < size; ++j) {
        patch(i, j) += amp * std::cos(2.0 * std::numbers::pi *
                                          (fx * static_cast<double>(i) +
                                           fy * static_cast<double>(j)) +
                                      phase);
      }
    }
  }
  // Rescale to a log-power-spectrogram-like range: mean -40 dB, std 20 dB.
  double mean = 0.0;
  for (double v : patch.storage()) mean += v;
  mean /= static_cast<double>(patch.size());
  double var = 0.0;
  for (double v : patch.storage()) var += (v - mean) * (v - mean);
  const double std_dev =
      std::sqrt(var / static_cast<double>(patch.size()));
  for (double& v : patch.storage()) {
    v = -40.0 + 20.0 * (v - mean) / std_dev;
  }
  return patch;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out =
      argc > 1 ? argv[1]
               : std::string(SPECMETRIC_DATA_DIR) + "/nlp_image_default.json";

  CounterRng rng(20260101);
  std::vector<Matrix> patches;
  for (int i = 0; i < 24; ++i) patches.push_back(natural_patch(rng, 128));

  NlpParams base = NlpParams::none(6);
  AdamConfig opt = AdamConfig::statistical_defaults();
  opt.epochs = 40;
  opt.seed = 7;

  const FitTrace trace = fit_statistical(patches, base, opt);
  std::cerr << "loss first epoch " << trace.epoch_objectives.front()
            << " -> last epoch " << trace.epoch_objectives.back() << "\n";
  save_nlp_params(trace.final_params, out);
  std::cerr << "wrote " << out << "\n";
  return 0;
}
