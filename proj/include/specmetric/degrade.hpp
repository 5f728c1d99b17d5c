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
// Synthesizes the four degradation families (waveshape distortion, low-pass
// filtering, limiting, additive noise) on a normalized [0, 1] intensity
// axis so severity sweeps are uniform across kinds.

#ifndef SPECMETRIC_DEGRADE_HPP_
#define SPECMETRIC_DEGRADE_HPP_

#include <cstdint>
#include <string>

#include "specmetric/audio_io.hpp"

namespace specmetric {

enum class DegradationKind { kWaveshape, kLowpass, kLimiter, kNoise };

DegradationKind degradation_kind_from_name(const std::string& name);
std::string degradation_kind_name(DegradationKind kind);

struct DegradationSpec {
  DegradationKind kind = DegradationKind::kNoise;
  double intensity = 0.0;   // in [0, 1]
  std::uint64_t seed = 0;   // noise only

  void validate() const;
};

// Applies the degradation; output keeps the input's length and rate.
// Intensity 0 is the identity for every kind (noise: 40 dB SNR).
//   waveshape: y = tanh(g x)/tanh(g), g = 15 * intensity
//   lowpass:   4th-order Butterworth (two biquads), cutoff
//              Nyquist * (1 - 0.9 * intensity)
//   limiter:   hard clip at 1 - 0.9 * intensity, peak rescaled back
//   noise:     seeded white Gaussian at SNR (40 - 36 * intensity) dB
Waveform apply(const Waveform& w, const DegradationSpec& spec);

}  // namespace specmetric

#endif  // SPECMETRIC_DEGRADE_HPP_
