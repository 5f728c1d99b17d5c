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

#include "specmetric/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "specmetric/error.hpp"
#include "specmetric/rng.hpp"

namespace specmetric {

namespace {

double rms(const std::vector<double>& samples) {
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

double peak(const std::vector<double>& samples) {
  double p = 0.0;
  for (double s : samples) p = std::max(p, std::fabs(s));
  return p;
}

Waveform apply_waveshape(const Waveform& w, double intensity) {
  Waveform out = w;
  const double g = 15.0 * intensity;
  if (g <= 0.0) return out;  // tanh(gx)/tanh(g) -> x as g -> 0
  const double norm = std::tanh(g);
  for (double& s : out.samples) s = std::tanh(g * s) / norm;
  return out;
}

struct Biquad {
  double b0, b1, b2, a1, a2;

  // RBJ low-pass section. At cutoff == Nyquist the coefficients collapse to
  // b == a, i.e. a pass-through.
  static Biquad lowpass(double cutoff_hz, double sample_rate, double q) {
    const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double cos_w0 = std::cos(w0);
    const double a0 = 1.0 + alpha;
    Biquad s;
    s.b0 = (1.0 - cos_w0) / 2.0 / a0;
    s.b1 = (1.0 - cos_w0) / a0;
    s.b2 = s.b0;
    s.a1 = -2.0 * cos_w0 / a0;
    s.a2 = (1.0 - alpha) / a0;
    return s;
  }

  void process(std::vector<double>& x) const {
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (double& v : x) {
      const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }
};

Waveform apply_lowpass(const Waveform& w, double intensity) {
  Waveform out = w;
  const double nyquist = w.sample_rate / 2.0;
  const double cutoff = nyquist * (1.0 - 0.9 * intensity);
  if (cutoff >= nyquist * 0.9999) return out;
  // 4th-order Butterworth: section Qs 1/(2 cos(pi/8)), 1/(2 cos(3 pi/8)).
  const double q1 = 1.0 / (2.0 * std::cos(std::numbers::pi / 8.0));
  const double q2 = 1.0 / (2.0 * std::cos(3.0 * std::numbers::pi / 8.0));
  Biquad::lowpass(cutoff, w.sample_rate, q1).process(out.samples);
  Biquad::lowpass(cutoff, w.sample_rate, q2).process(out.samples);
  return out;
}

Waveform apply_limiter(const Waveform& w, double intensity) {
  Waveform out = w;
  const double threshold = 1.0 - 0.9 * intensity;
  const double in_peak = peak(w.samples);
  for (double& s : out.samples) s = std::clamp(s, -threshold, threshold);
  const double out_peak = peak(out.samples);
  if (out_peak > 0.0 && in_peak > out_peak) {
    const double gain = in_peak / out_peak;
    for (double& s : out.samples) s *= gain;
  }
  return out;
}

Waveform apply_noise(const Waveform& w, double intensity, std::uint64_t seed) {
  Waveform out = w;
  const double snr_db = 40.0 - 36.0 * intensity;
  const double signal_rms = rms(w.samples);
  if (signal_rms == 0.0) return out;
  const double noise_std = signal_rms * std::pow(10.0, -snr_db / 20.0);
  CounterRng rng(seed);
  for (double& s : out.samples) s += noise_std * rng.next_gaussian();
  return out;
}

}  // namespace

DegradationKind degradation_kind_from_name(const std::string& name) {
  if (name == "waveshape") return DegradationKind::kWaveshape;
  if (name == "lowpass") return DegradationKind::kLowpass;
  if (name == "limiter") return DegradationKind::kLimiter;
  if (name == "noise") return DegradationKind::kNoise;
  throw DataError("unknown degradation kind '" + name +
                  "' (expected waveshape, lowpass, limiter or noise)");
}

std::string degradation_kind_name(DegradationKind kind) {
  switch (kind) {
    case DegradationKind::kWaveshape: return "waveshape";
    case DegradationKind::kLowpass: return "lowpass";
    case DegradationKind::kLimiter: return "limiter";
    case DegradationKind::kNoise: return "noise";
  }
  return "unknown";
}

void DegradationSpec::validate() const {
  if (!(intensity >= 0.0 && intensity <= 1.0)) {
    throw DataError("degradation intensity must lie in [0, 1], got " +
                    std::to_string(intensity));
  }
}

Waveform apply(const Waveform& w, const DegradationSpec& spec) {
  spec.validate();
  if (w.samples.empty()) throw DataError("degrade: empty waveform");
  switch (spec.kind) {
    case DegradationKind::kWaveshape:
      return apply_waveshape(w, spec.intensity);
    case DegradationKind::kLowpass:
      return apply_lowpass(w, spec.intensity);
    case DegradationKind::kLimiter:
      return apply_limiter(w, spec.intensity);
    case DegradationKind::kNoise:
      return apply_noise(w, spec.intensity, spec.seed);
  }
  throw DataError("degrade: invalid kind");
}

}  // namespace specmetric
