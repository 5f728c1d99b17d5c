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

#ifndef SPECMETRIC_AUDIO_IO_HPP_
#define SPECMETRIC_AUDIO_IO_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace specmetric {

// Canonical mono clip. Every metric in this library consumes audio through
// this type.
struct Waveform {
  std::vector<double> samples;  // amplitudes, nominally in [-1, 1]
  int sample_rate = 0;          // Hz
  std::string source_id;

  // Checks the decoded-clip invariants: finite samples, |s| <= 1 + 1e-6,
  // positive rate. Throws DataError on violation.
  void validate() const;
};

// Decodes a RIFF/WAVE container. Accepts PCM 16-bit, PCM 32-bit integer and
// IEEE float 32-bit, mono or stereo; stereo is downmixed to the per-sample
// channel mean. Integer samples are scaled by the type's max magnitude
// (32768 resp. 2147483648).
Waveform decode_wav(const std::vector<std::uint8_t>& bytes,
                    const std::string& source_id = "");

// Reads the file and decodes it; source_id defaults to the path.
Waveform decode_wav_file(const std::string& path);

// Encodes to PCM 16-bit mono: samples clamped to [-1, 1], scaled by 32767
// and rounded to nearest.
std::vector<std::uint8_t> encode_wav_16bit(const Waveform& w);

void write_wav_16bit_file(const Waveform& w, const std::string& path);

// Band-limited resampling: windowed sinc with a Kaiser window (beta 8.6,
// 64 zero-crossings per side at the lower of the two rates), cutoff at the
// smaller Nyquist frequency. Output length is
// round(input_length * target_rate / input_rate).
Waveform resample(const Waveform& w, int target_rate);

}  // namespace specmetric

#endif  // SPECMETRIC_AUDIO_IO_HPP_
