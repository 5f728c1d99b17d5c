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

#include "specmetric/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "specmetric/error.hpp"

namespace specmetric {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatIeeeFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct ByteReader {
  const std::uint8_t* p;
  std::size_t size;
  std::size_t pos = 0;

  bool has(std::size_t n) const { return pos + n <= size; }

  std::uint32_t u32() {
    std::uint32_t v = static_cast<std::uint32_t>(p[pos]) |
                      static_cast<std::uint32_t>(p[pos + 1]) << 8 |
                      static_cast<std::uint32_t>(p[pos + 2]) << 16 |
                      static_cast<std::uint32_t>(p[pos + 3]) << 24;
    pos += 4;
    return v;
  }
  std::uint16_t u16() {
    std::uint16_t v = static_cast<std::uint16_t>(
        p[pos] | static_cast<std::uint16_t>(p[pos + 1]) << 8);
    pos += 2;
    return v;
  }
  std::string tag() {
    std::string t(reinterpret_cast<const char*>(p + pos), 4);
    pos += 4;
    return t;
  }
};

double decode_sample(const std::uint8_t* p, std::uint16_t format,
                     std::uint16_t bits) {
  if (format == kFormatPcm && bits == 16) {
    std::int16_t v;
    std::memcpy(&v, p, 2);
    return static_cast<double>(v) / 32768.0;
  }
  if (format == kFormatPcm && bits == 32) {
    std::int32_t v;
    std::memcpy(&v, p, 4);
    return static_cast<double>(v) / 2147483648.0;
  }
  // IEEE float 32
  float v;
  std::memcpy(&v, p, 4);
  return static_cast<double>(v);
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
}

// Zeroth-order modified Bessel function, power series. Converges in a few
// dozen terms for the arguments a Kaiser window needs.
double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace

void Waveform::validate() const {
  if (sample_rate <= 0) {
    throw DataError("waveform sample_rate must be positive, got " +
                    std::to_string(sample_rate));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double s = samples[i];
    if (!std::isfinite(s)) {
      throw DataError("waveform sample " + std::to_string(i) +
                      " is not finite");
    }
    if (std::fabs(s) > 1.0 + 1e-6) {
      throw DataError("waveform sample " + std::to_string(i) +
                      " exceeds full scale: " + std::to_string(s));
    }
  }
}

Waveform decode_wav(const std::vector<std::uint8_t>& bytes,
                    const std::string& source_id) {
  ByteReader r{bytes.data(), bytes.size()};
  if (!r.has(12)) throw DataError("WAV: file too short for RIFF header");
  if (r.tag() != "RIFF") throw DataError("WAV: missing RIFF magic");
  r.u32();  // declared riff size; trust actual buffer instead
  if (r.tag() != "WAVE") throw DataError("WAV: missing WAVE form type");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data_ptr = nullptr;
  std::size_t data_size = 0;

  while (r.has(8)) {
    const std::string id = r.tag();
    const std::uint32_t chunk_size = r.u32();
    if (!r.has(chunk_size)) {
      throw DataError("WAV: chunk '" + id + "' overruns file");
    }
    const std::size_t chunk_start = r.pos;
    if (id == "fmt ") {
      if (chunk_size < 16) throw DataError("WAV: fmt chunk too short");
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      if (format == kFormatExtensible) {
        // Resolve the real format from the extension's subformat GUID.
        if (chunk_size < 40) {
          throw DataError("WAV: extensible fmt chunk too short");
        }
        r.u16();  // extension size
        r.u16();  // valid bits
        r.u32();  // channel mask
        format = r.u16();
      }
      have_fmt = true;
    } else if (id == "data") {
      data_ptr = bytes.data() + chunk_start;
      data_size = chunk_size;
    }
    // Chunks are word-aligned; skip the pad byte on odd sizes.
    r.pos = chunk_start + chunk_size + (chunk_size & 1);
  }

  if (!have_fmt) throw DataError("WAV: missing fmt chunk");
  if (data_ptr == nullptr) throw DataError("WAV: missing data chunk");
  if (format != kFormatPcm && format != kFormatIeeeFloat) {
    throw DataError("WAV: unsupported format tag " + std::to_string(format) +
                    " (only PCM and IEEE float are supported)");
  }
  if (format == kFormatPcm && bits != 16 && bits != 32) {
    throw DataError("WAV: unsupported PCM bit depth " + std::to_string(bits) +
                    " (expected 16 or 32)");
  }
  if (format == kFormatIeeeFloat && bits != 32) {
    throw DataError("WAV: unsupported float bit depth " +
                    std::to_string(bits) + " (expected 32)");
  }
  if (channels != 1 && channels != 2) {
    throw DataError("WAV: unsupported channel count " +
                    std::to_string(channels) + " (expected 1 or 2)");
  }
  if (rate == 0) throw DataError("WAV: sample rate is zero");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_size = bytes_per_sample * channels;
  if (frame_size == 0 || data_size % frame_size != 0) {
    throw DataError("WAV: data chunk size not a whole number of frames");
  }
  const std::size_t n_frames = data_size / frame_size;
  if (n_frames == 0) throw DataError("WAV: data chunk holds no samples");

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.source_id = source_id;
  w.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const std::uint8_t* frame = data_ptr + i * frame_size;
    if (channels == 1) {
      w.samples[i] = decode_sample(frame, format, bits);
    } else {
      const double l = decode_sample(frame, format, bits);
      const double rch = decode_sample(frame + bytes_per_sample, format, bits);
      w.samples[i] = 0.5 * (l + rch);
    }
  }
  w.validate();
  return w;
}

Waveform decode_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open audio file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_wav(bytes, path);
}

std::vector<std::uint8_t> encode_wav_16bit(const Waveform& w) {
  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const std::uint32_t data_size = n * 2;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);

  const auto push_tag = [&out](const char* t) {
    out.insert(out.end(), t, t + 4);
  };
  push_tag("RIFF");
  append_u32(out, 36 + data_size);
  push_tag("WAVE");
  push_tag("fmt ");
  append_u32(out, 16);
  append_u16(out, kFormatPcm);
  append_u16(out, 1);  // mono
  append_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  append_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  append_u16(out, 2);   // block align
  append_u16(out, 16);  // bits
  push_tag("data");
  append_u32(out, data_size);
  for (double s : w.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    append_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void write_wav_16bit_file(const Waveform& w, const std::string& path) {
  const std::vector<std::uint8_t> bytes = encode_wav_16bit(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing output file: " + path);
}

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0) {
    throw DataError("resample target rate must be positive, got " +
                    std::to_string(target_rate));
  }
  if (w.sample_rate <= 0) {
    throw DataError("resample input has invalid sample rate");
  }
  if (target_rate == w.sample_rate) {
    Waveform out = w;
    return out;
  }

  const double ratio =
      static_cast<double>(target_rate) / static_cast<double>(w.sample_rate);
  const std::size_t out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(w.samples.size()) * ratio));

  // Cutoff at the lower Nyquist: when downsampling, the sinc is dilated by
  // the rate ratio and the kernel support widens accordingly.
  const double scale = std::min(1.0, ratio);
  const double half_width = 64.0 / scale;
  constexpr double kBeta = 8.6;
  const double i0_beta = bessel_i0(kBeta);

  Waveform out;
  out.sample_rate = target_rate;
  out.source_id = w.source_id;
  out.samples.assign(out_len, 0.0);

  const long in_len = static_cast<long>(w.samples.size());
  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const long m_lo = static_cast<long>(std::ceil(t - half_width));
    const long m_hi = static_cast<long>(std::floor(t + half_width));
    double acc = 0.0;
    for (long m = std::max(0L, m_lo); m <= std::min(in_len - 1, m_hi); ++m) {
      const double tau = static_cast<double>(m) - t;
      const double x = scale * tau;
      const double sinc =
          x == 0.0 ? 1.0
                   : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double frac = tau / half_width;
      const double window =
          bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - frac * frac))) /
          i0_beta;
      acc += w.samples[static_cast<std::size_t>(m)] * scale * sinc * window;
    }
    out.samples[n] = acc;
  }
  return out;
}

}  // namespace specmetric
