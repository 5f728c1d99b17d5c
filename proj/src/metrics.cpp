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

#include "specmetric/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "specmetric/error.hpp"

namespace specmetric {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DataError(std::string(op) + ": shape mismatch: " +
                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
}

std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable valid-region filtering: output dims shrink by window-1.
Matrix filter_valid(const Matrix& in, const std::vector<double>& taps) {
  const std::size_t w = taps.size();
  const std::size_t out_rows = in.rows() - w + 1;
  const std::size_t out_cols = in.cols() - w + 1;
  Matrix tmp(out_rows, in.cols());
  for (std::size_t i = 0; i < out_rows; ++i) {
    for (std::size_t j = 0; j < in.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t u = 0; u < w; ++u) acc += taps[u] * in(i + u, j);
      tmp(i, j) = acc;
    }
  }
  Matrix out(out_rows, out_cols);
  for (std::size_t i = 0; i < out_rows; ++i) {
    for (std::size_t j = 0; j < out_cols; ++j) {
      double acc = 0.0;
      for (std::size_t v = 0; v < w; ++v) acc += taps[v] * tmp(i, j + v);
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix elem_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = a.data()[i] * b.data()[i];
  }
  return out;
}

double pair_dynamic_range(const Matrix& a, const Matrix& b,
                          const SsimConfig& cfg) {
  if (cfg.dynamic_range > 0.0) return cfg.dynamic_range;
  double lo = a.data()[0], hi = a.data()[0];
  for (double v : a.storage()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : b.storage()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return std::max(hi - lo, 1e-12);
}

struct LocalStats {
  Matrix mu_a, mu_b, var_a, var_b, cov;
};

LocalStats local_stats(const Matrix& a, const Matrix& b,
                       const SsimConfig& cfg) {
  const std::vector<double> taps =
      gaussian_taps(cfg.window_size, cfg.window_sigma);
  LocalStats s;
  s.mu_a = filter_valid(a, taps);
  s.mu_b = filter_valid(b, taps);
  const Matrix e_aa = filter_valid(elem_product(a, a), taps);
  const Matrix e_bb = filter_valid(elem_product(b, b), taps);
  const Matrix e_ab = filter_valid(elem_product(a, b), taps);
  const std::size_t n = s.mu_a.size();
  s.var_a = Matrix(s.mu_a.rows(), s.mu_a.cols());
  s.var_b = Matrix(s.mu_a.rows(), s.mu_a.cols());
  s.cov = Matrix(s.mu_a.rows(), s.mu_a.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const double ma = s.mu_a.data()[i];
    const double mb = s.mu_b.data()[i];
    s.var_a.data()[i] = e_aa.data()[i] - ma * ma;
    s.var_b.data()[i] = e_bb.data()[i] - mb * mb;
    s.cov.data()[i] = e_ab.data()[i] - ma * mb;
  }
  return s;
}

void check_window_fit(const Matrix& a, const SsimConfig& cfg,
                      const char* op) {
  if (a.rows() < static_cast<std::size_t>(cfg.window_size) ||
      a.cols() < static_cast<std::size_t>(cfg.window_size)) {
    throw DataError(std::string(op) + ": input " + std::to_string(a.rows()) +
                    "x" + std::to_string(a.cols()) +
                    " smaller than the " + std::to_string(cfg.window_size) +
                    "x" + std::to_string(cfg.window_size) + " window");
  }
}

// Mean luminance and contrast*structure terms over the valid map.
struct SsimTerms {
  double luminance = 0.0;
  double cs = 0.0;
  double full = 0.0;  // mean of l*cs per window (plain SSIM)
};

SsimTerms ssim_terms(const Matrix& a, const Matrix& b, const SsimConfig& cfg,
                     double dynamic_range) {
  const LocalStats s = local_stats(a, b, cfg);
  const double c1 = cfg.k1 * dynamic_range * cfg.k1 * dynamic_range;
  const double c2 = cfg.k2 * dynamic_range * cfg.k2 * dynamic_range;
  SsimTerms t;
  const std::size_t n = s.mu_a.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ma = s.mu_a.data()[i];
    const double mb = s.mu_b.data()[i];
    const double l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    const double cs = (2.0 * s.cov.data()[i] + c2) /
                      (s.var_a.data()[i] + s.var_b.data()[i] + c2);
    t.luminance += l;
    t.cs += cs;
    t.full += l * cs;
  }
  t.luminance /= static_cast<double>(n);
  t.cs /= static_cast<double>(n);
  t.full /= static_cast<double>(n);
  return t;
}

}  // namespace

std::array<double, 5> SsimConfig::default_msssim_weights() {
  std::array<double, 5> w = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  double sum = 0.0;
  for (double v : w) sum += v;
  for (double& v : w) v /= sum;
  return w;
}

void SsimConfig::validate() const {
  if (window_size < 1 || window_size % 2 == 0) {
    throw DataError("ssim config: window size must be odd and positive");
  }
  if (!(k1 > 0.0) || !(k2 > 0.0)) {
    throw DataError("ssim config: k1 and k2 must be positive");
  }
  double sum = 0.0;
  for (double w : msssim_weights) sum += w;
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw DataError("ssim config: ms-ssim weights must sum to 1");
  }
}

double mse(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double ssim(const Matrix& a, const Matrix& b, const SsimConfig& cfg) {
  cfg.validate();
  check_same_shape(a, b, "ssim");
  check_window_fit(a, cfg, "ssim");
  return ssim_terms(a, b, cfg, pair_dynamic_range(a, b, cfg)).full;
}

double nsim(const Matrix& a, const Matrix& b, const SsimConfig& cfg) {
  cfg.validate();
  check_same_shape(a, b, "nsim");
  check_window_fit(a, cfg, "nsim");
  const double range = pair_dynamic_range(a, b, cfg);
  const LocalStats s = local_stats(a, b, cfg);
  const double c1 = cfg.k1 * range * cfg.k1 * range;
  const double c3 = cfg.k2 * range * cfg.k2 * range / 2.0;
  double acc = 0.0;
  const std::size_t n = s.mu_a.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ma = s.mu_a.data()[i];
    const double mb = s.mu_b.data()[i];
    const double sa = std::sqrt(std::max(s.var_a.data()[i], 0.0));
    const double sb = std::sqrt(std::max(s.var_b.data()[i], 0.0));
    const double l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    const double st = (s.cov.data()[i] + c3) / (sa * sb + c3);
    acc += l * st;
  }
  return acc / static_cast<double>(n);
}

int ms_ssim_scale_count(std::size_t rows, std::size_t cols,
                        const SsimConfig& cfg) {
  int scales = 0;
  std::size_t r = rows, c = cols;
  while (scales < 5 &&
         r >= static_cast<std::size_t>(cfg.window_size) &&
         c >= static_cast<std::size_t>(cfg.window_size)) {
    ++scales;
    r /= 2;
    c /= 2;
  }
  return scales;
}

Matrix mean_pool2(const Matrix& in) {
  const std::size_t rows = in.rows() / 2;
  const std::size_t cols = in.cols() / 2;
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out(i, j) = 0.25 * (in(2 * i, 2 * j) + in(2 * i, 2 * j + 1) +
                          in(2 * i + 1, 2 * j) + in(2 * i + 1, 2 * j + 1));
    }
  }
  return out;
}

double ms_ssim(const Matrix& a, const Matrix& b, const SsimConfig& cfg) {
  cfg.validate();
  check_same_shape(a, b, "ms_ssim");
  check_window_fit(a, cfg, "ms_ssim");

  const int scales = ms_ssim_scale_count(a.rows(), a.cols(), cfg);
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) {
    weight_sum += cfg.msssim_weights[static_cast<std::size_t>(s)];
  }

  // Range is fixed from the original pair so every scale sees the same
  // stabilizers.
  const double range = pair_dynamic_range(a, b, cfg);

  Matrix cur_a = a, cur_b = b;
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    const double weight =
        cfg.msssim_weights[static_cast<std::size_t>(s)] / weight_sum;
    const SsimTerms terms = ssim_terms(cur_a, cur_b, cfg, range);
    // Negative mean terms are clamped before exponentiation.
    const double cs = std::max(terms.cs, 0.0);
    result *= std::pow(cs, weight);
    if (s + 1 == scales) {
      result *= std::pow(std::max(terms.luminance, 0.0), weight);
    } else {
      cur_a = mean_pool2(cur_a);
      cur_b = mean_pool2(cur_b);
    }
  }
  return result;
}

}  // namespace specmetric
