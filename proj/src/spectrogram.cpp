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

#include "specmetric/spectrogram.hpp"

#include <fftw3.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>

#include "specmetric/error.hpp"

namespace specmetric {

namespace {

// FFTW planning is not thread-safe; execution of a private plan is.
std::mutex g_fftw_plan_mutex;

constexpr char kCacheMagic[8] = {'S', 'M', 'E', 'L', 'S', 'P', 'C', '1'};

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

void SpectrogramConfig::validate() const {
  if (hop_length <= 0) {
    throw DataError("spectrogram config: hop_length must be positive");
  }
  if (n_fft < hop_length) {
    throw DataError("spectrogram config: n_fft must be >= hop_length");
  }
  if (n_mels <= 0) {
    throw DataError("spectrogram config: n_mels must be positive");
  }
  if (sample_rate <= 0) {
    throw DataError("spectrogram config: sample_rate must be positive");
  }
  const double fm = fmax_or_default();
  if (!(fmin < fm) || fm > sample_rate / 2.0 + 1e-9) {
    throw DataError(
        "spectrogram config: need fmin < fmax <= sample_rate/2, got fmin=" +
        std::to_string(fmin) + " fmax=" + std::to_string(fm));
  }
  if (fmin < 0.0) {
    throw DataError("spectrogram config: fmin must be non-negative");
  }
}

std::string SpectrogramConfig::fingerprint() const {
  std::ostringstream os;
  os << "n_fft=" << n_fft << " hop_length=" << hop_length
     << " n_mels=" << n_mels << " sample_rate=" << sample_rate
     << " fmin=" << format_double(fmin) << " fmax="
     << format_double(fmax_or_default()) << " scale="
     << (scale == SpectrogramScale::kPower ? "power" : "log_power");
  return os.str();
}

std::size_t stft_frame_count(std::size_t n_samples,
                             const SpectrogramConfig& cfg) {
  if (n_samples < static_cast<std::size_t>(cfg.n_fft)) return 0;
  return 1 + (n_samples - static_cast<std::size_t>(cfg.n_fft)) /
                 static_cast<std::size_t>(cfg.hop_length);
}

Matrix stft_power(const Waveform& w, const SpectrogramConfig& cfg) {
  cfg.validate();
  const std::size_t n_fft = static_cast<std::size_t>(cfg.n_fft);
  const std::size_t hop = static_cast<std::size_t>(cfg.hop_length);
  const std::size_t n_frames = stft_frame_count(w.samples.size(), cfg);
  if (n_frames == 0) {
    throw DataError("input too short: " + std::to_string(w.samples.size()) +
                    " samples, need at least one full window of " +
                    std::to_string(n_fft));
  }
  const std::size_t n_bins = n_fft / 2 + 1;

  // Periodic Hann.
  std::vector<double> window(n_fft);
  for (std::size_t n = 0; n < n_fft; ++n) {
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                     static_cast<double>(n) /
                                     static_cast<double>(n_fft));
  }

  double* in = fftw_alloc_real(n_fft);
  fftw_complex* out = fftw_alloc_complex(n_bins);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), in, out,
                                FFTW_ESTIMATE);
  }
  if (plan == nullptr) {
    fftw_free(in);
    fftw_free(out);
    throw NumericError("FFTW failed to create a plan for n_fft=" +
                       std::to_string(n_fft));
  }

  Matrix result(n_bins, n_frames);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double* frame = w.samples.data() + t * hop;
    for (std::size_t n = 0; n < n_fft; ++n) in[n] = frame[n] * window[n];
    fftw_execute(plan);
    for (std::size_t k = 0; k < n_bins; ++k) {
      result(k, t) = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
  }

  {
    std::lock_guard<std::mutex> lock(g_fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return result;
}

double MelFilterbank::hz_to_mel(double hz) {
  // Slaney: linear below 1 kHz, logarithmic above.
  constexpr double kLinearStep = 200.0 / 3.0;
  constexpr double kMinLogHz = 1000.0;
  constexpr double kMinLogMel = kMinLogHz / kLinearStep;
  if (hz < kMinLogHz) return hz / kLinearStep;
  const double log_step = std::log(6.4) / 27.0;
  return kMinLogMel + std::log(hz / kMinLogHz) / log_step;
}

double MelFilterbank::mel_to_hz(double mel) {
  constexpr double kLinearStep = 200.0 / 3.0;
  constexpr double kMinLogHz = 1000.0;
  constexpr double kMinLogMel = kMinLogHz / kLinearStep;
  if (mel < kMinLogMel) return mel * kLinearStep;
  const double log_step = std::log(6.4) / 27.0;
  return kMinLogHz * std::exp(log_step * (mel - kMinLogMel));
}

MelFilterbank::MelFilterbank(int n_mels, int n_fft, double sample_rate,
                             double fmin, double fmax)
    : n_bins_(static_cast<std::size_t>(n_fft) / 2 + 1) {
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t m = 0; m < edges.size(); ++m) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) /
                                    static_cast<double>(n_mels + 1);
    edges[m] = mel_to_hz(mel);
  }

  const double hz_per_bin = sample_rate / static_cast<double>(n_fft);
  rows_.resize(static_cast<std::size_t>(n_mels));
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m) + 1];
    const double right = edges[static_cast<std::size_t>(m) + 2];
    const double area_norm = 2.0 / (right - left);

    const std::size_t k_lo = static_cast<std::size_t>(
        std::max(0.0, std::ceil(left / hz_per_bin)));
    const std::size_t k_hi = std::min(
        n_bins_ - 1,
        static_cast<std::size_t>(std::max(0.0, std::floor(right / hz_per_bin))));
    Row row;
    row.start = k_lo;
    for (std::size_t k = k_lo; k <= k_hi && k < n_bins_; ++k) {
      const double f = static_cast<double>(k) * hz_per_bin;
      const double up = (f - left) / (center - left);
      const double down = (right - f) / (right - center);
      const double weight = std::max(0.0, std::min(up, down));
      row.weights.push_back(weight * area_norm);
    }
    // Trim zero tails so the stored range is genuinely the support.
    while (!row.weights.empty() && row.weights.back() == 0.0) {
      row.weights.pop_back();
    }
    while (!row.weights.empty() && row.weights.front() == 0.0) {
      row.weights.erase(row.weights.begin());
      ++row.start;
    }
    rows_[static_cast<std::size_t>(m)] = std::move(row);
  }
}

Matrix MelFilterbank::apply(const Matrix& power) const {
  if (power.rows() != n_bins_) {
    throw DataError("filterbank expects " + std::to_string(n_bins_) +
                    " bins, got " + std::to_string(power.rows()));
  }
  Matrix out(rows_.size(), power.cols(), 0.0);
  for (std::size_t m = 0; m < rows_.size(); ++m) {
    const Row& row = rows_[m];
    for (std::size_t i = 0; i < row.weights.size(); ++i) {
      const double wgt = row.weights[i];
      const std::size_t k = row.start + i;
      for (std::size_t t = 0; t < power.cols(); ++t) {
        out(m, t) += wgt * power(k, t);
      }
    }
  }
  return out;
}

Matrix MelFilterbank::dense() const {
  Matrix out(rows_.size(), n_bins_, 0.0);
  for (std::size_t m = 0; m < rows_.size(); ++m) {
    for (std::size_t i = 0; i < rows_[m].weights.size(); ++i) {
      out(m, rows_[m].start + i) = rows_[m].weights[i];
    }
  }
  return out;
}

MelSpectrogram mel_spectrogram(const Waveform& w,
                               const SpectrogramConfig& cfg) {
  cfg.validate();
  const Matrix power = stft_power(w, cfg);
  const MelFilterbank bank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.fmin,
                           cfg.fmax_or_default());
  Matrix mel = bank.apply(power);
  if (cfg.scale == SpectrogramScale::kLogPower) {
    for (double& v : mel.storage()) {
      v = 10.0 * std::log10(std::max(v, 1e-10));
    }
  }
  MelSpectrogram out;
  out.values = std::move(mel);
  out.config = cfg;
  out.source_id = w.source_id;
  return out;
}

void save_spectrogram_cache(const MelSpectrogram& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open cache file for writing: " + path);
  out.write(kCacheMagic, 8);
  const std::uint32_t rows = static_cast<std::uint32_t>(m.values.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(m.values.cols());
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  std::vector<float> buf(m.values.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<float>(m.values.data()[i]);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw DataError("failed writing cache file: " + path);

  std::ofstream cfg(path + ".cfg");
  if (!cfg) throw DataError("cannot open cache sidecar for writing: " + path);
  cfg << "n_fft=" << m.config.n_fft << "\n"
      << "hop_length=" << m.config.hop_length << "\n"
      << "n_mels=" << m.config.n_mels << "\n"
      << "sample_rate=" << m.config.sample_rate << "\n"
      << "fmin=" << format_double(m.config.fmin) << "\n"
      << "fmax=" << format_double(m.config.fmax) << "\n"
      << "scale="
      << (m.config.scale == SpectrogramScale::kPower ? "power" : "log_power")
      << "\n"
      << "source_id=" << m.source_id << "\n";
}

SpectrogramConfig parse_spectrogram_config(const std::string& text) {
  SpectrogramConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("config line " + std::to_string(line_no) +
                      ": expected key=value, got '" + line + "'");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "n_fft") {
        cfg.n_fft = std::stoi(value);
      } else if (key == "hop_length") {
        cfg.hop_length = std::stoi(value);
      } else if (key == "n_mels") {
        cfg.n_mels = std::stoi(value);
      } else if (key == "sample_rate") {
        cfg.sample_rate = std::stoi(value);
      } else if (key == "fmin") {
        cfg.fmin = std::stod(value);
      } else if (key == "fmax") {
        cfg.fmax = std::stod(value);
      } else if (key == "scale") {
        if (value == "power") {
          cfg.scale = SpectrogramScale::kPower;
        } else if (value == "log_power") {
          cfg.scale = SpectrogramScale::kLogPower;
        } else {
          throw DataError("config line " + std::to_string(line_no) +
                          ": unknown scale '" + value + "'");
        }
      } else if (key == "source_id") {
        // Sidecar metadata, ignored here.
      } else {
        throw DataError("config line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw DataError("config line " + std::to_string(line_no) +
                      ": cannot parse value '" + value + "' for " + key);
    } catch (const std::out_of_range&) {
      throw DataError("config line " + std::to_string(line_no) +
                      ": value out of range for " + key);
    }
  }
  return cfg;
}

MelSpectrogram load_spectrogram_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cache file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCacheMagic, 8) != 0) {
    throw DataError("bad cache magic in " + path);
  }
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  if (!in) throw DataError("truncated cache header in " + path);
  std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw DataError("truncated cache payload in " + path);

  MelSpectrogram m;
  m.values = Matrix(rows, cols);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    m.values.data()[i] = static_cast<double>(buf[i]);
  }

  std::ifstream cfg_file(path + ".cfg");
  if (cfg_file) {
    std::stringstream ss;
    ss << cfg_file.rdbuf();
    m.config = parse_spectrogram_config(ss.str());
    // Recover source_id from the sidecar if present.
    std::istringstream again(ss.str());
    std::string line;
    while (std::getline(again, line)) {
      if (line.rfind("source_id=", 0) == 0) {
        m.source_id = line.substr(10);
      }
    }
  }
  return m;
}

}  // namespace specmetric
