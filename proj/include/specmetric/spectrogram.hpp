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

#ifndef SPECMETRIC_SPECTROGRAM_HPP_
#define SPECMETRIC_SPECTROGRAM_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "specmetric/audio_io.hpp"
#include "specmetric/matrix.hpp"

namespace specmetric {

enum class SpectrogramScale { kPower, kLogPower };

// Log floor applied under kLogPower: 10*log10(max(v, 1e-10)) = -100 dB.
constexpr double kLogPowerFloorDb = -100.0;

struct SpectrogramConfig {
  int n_fft = 2048;
  int hop_length = 64;
  int n_mels = 512;
  int sample_rate = 16050;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 means sample_rate / 2
  SpectrogramScale scale = SpectrogramScale::kLogPower;

  double fmax_or_default() const {
    return fmax > 0.0 ? fmax : sample_rate / 2.0;
  }
  void validate() const;
  bool operator==(const SpectrogramConfig&) const = default;

  // "key=value key=value ..." summary, echoed into reports.
  std::string fingerprint() const;
};

// The 2-d "image" every metric consumes: mel bands x frames.
struct MelSpectrogram {
  Matrix values;
  SpectrogramConfig config;
  std::string source_id;
};

// Number of frames under no-padding framing; frame t covers samples
// [t*hop, t*hop + n_fft).
std::size_t stft_frame_count(std::size_t n_samples, const SpectrogramConfig&);

// Hann-windowed magnitude-squared STFT, (n_fft/2 + 1) x n_frames.
Matrix stft_power(const Waveform& w, const SpectrogramConfig& cfg);

// Triangular mel filterbank, Slaney-style scale, area-normalized. Rows are
// stored sparse: each filter covers a contiguous bin range.
class MelFilterbank {
 public:
  MelFilterbank(int n_mels, int n_fft, double sample_rate, double fmin,
                double fmax);

  // power: (n_fft/2 + 1) x n_frames -> (n_mels x n_frames).
  Matrix apply(const Matrix& power) const;

  // Dense n_mels x (n_fft/2 + 1) weights, for tests and inspection.
  Matrix dense() const;

  static double hz_to_mel(double hz);
  static double mel_to_hz(double mel);

 private:
  struct Row {
    std::size_t start = 0;
    std::vector<double> weights;
  };
  std::vector<Row> rows_;
  std::size_t n_bins_;
};

MelSpectrogram mel_spectrogram(const Waveform& w, const SpectrogramConfig& cfg);

// Flat binary cache: 8-byte magic, u32 rows, u32 cols, row-major f32,
// little-endian; config in a key=value sidecar at path + ".cfg".
void save_spectrogram_cache(const MelSpectrogram& m, const std::string& path);
MelSpectrogram load_spectrogram_cache(const std::string& path);

// Parses the sidecar/overlay key=value format into a config.
SpectrogramConfig parse_spectrogram_config(const std::string& text);

}  // namespace specmetric

#endif  // SPECMETRIC_SPECTROGRAM_HPP_
