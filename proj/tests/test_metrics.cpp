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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "specmetric/error.hpp"
#include "specmetric/metrics.hpp"
#include "specmetric/rng.hpp"

using namespace specmetric;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, CounterRng& rng,
                     double offset = 0.0, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.storage()) v = offset + scale * rng.next_gaussian();
  return m;
}

// ---------------------------------------------------------------------------
// Sliding-window oracle: direct per-window weighted statistics, no separable
// filtering, its own Gaussian weights.

struct WindowStats {
  double mu_a, mu_b, var_a, var_b, cov;
};

std::vector<std::vector<double>> oracle_gaussian(int size, double sigma) {
  std::vector<std::vector<double>> w(
      static_cast<std::size_t>(size),
      std::vector<double>(static_cast<std::size_t>(size)));
  double sum = 0.0;
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
      w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          std::exp(-d2 / (2.0 * sigma * sigma));
      sum += w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  for (auto& row : w) {
    for (double& v : row) v /= sum;
  }
  return w;
}

WindowStats oracle_window_stats(const Matrix& a, const Matrix& b,
                                std::size_t top, std::size_t left,
                                const std::vector<std::vector<double>>& w) {
  WindowStats s{0, 0, 0, 0, 0};
  const std::size_t n = w.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      s.mu_a += w[i][j] * a(top + i, left + j);
      s.mu_b += w[i][j] * b(top + i, left + j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double da = a(top + i, left + j) - s.mu_a;
      const double db = b(top + i, left + j) - s.mu_b;
      s.var_a += w[i][j] * da * da;
      s.var_b += w[i][j] * db * db;
      s.cov += w[i][j] * da * db;
    }
  }
  return s;
}

double oracle_range(const Matrix& a, const Matrix& b) {
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

double oracle_ssim(const Matrix& a, const Matrix& b, double range) {
  const auto w = oracle_gaussian(11, 1.5);
  const double c1 = 0.01 * range * 0.01 * range;
  const double c2 = 0.03 * range * 0.03 * range;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + 11 <= a.rows(); ++i) {
    for (std::size_t j = 0; j + 11 <= a.cols(); ++j) {
      const WindowStats s = oracle_window_stats(a, b, i, j, w);
      const double l =
          (2.0 * s.mu_a * s.mu_b + c1) / (s.mu_a * s.mu_a + s.mu_b * s.mu_b +
                                          c1);
      const double cs = (2.0 * s.cov + c2) / (s.var_a + s.var_b + c2);
      acc += l * cs;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

double oracle_nsim(const Matrix& a, const Matrix& b) {
  const auto w = oracle_gaussian(11, 1.5);
  const double range = oracle_range(a, b);
  const double c1 = 0.01 * range * 0.01 * range;
  const double c3 = 0.03 * range * 0.03 * range / 2.0;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + 11 <= a.rows(); ++i) {
    for (std::size_t j = 0; j + 11 <= a.cols(); ++j) {
      const WindowStats s = oracle_window_stats(a, b, i, j, w);
      const double l =
          (2.0 * s.mu_a * s.mu_b + c1) / (s.mu_a * s.mu_a + s.mu_b * s.mu_b +
                                          c1);
      const double st = (s.cov + c3) /
                        (std::sqrt(std::max(s.var_a, 0.0)) *
                             std::sqrt(std::max(s.var_b, 0.0)) +
                         c3);
      acc += l * st;
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

Matrix oracle_pool(const Matrix& in) {
  Matrix out(in.rows() / 2, in.cols() / 2);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out(i, j) = (in(2 * i, 2 * j) + in(2 * i, 2 * j + 1) +
                   in(2 * i + 1, 2 * j) + in(2 * i + 1, 2 * j + 1)) /
                  4.0;
    }
  }
  return out;
}

double oracle_ms_ssim(Matrix a, Matrix b) {
  const std::vector<double> weights = {0.0448, 0.2856, 0.3001, 0.2363,
                                       0.1333};
  const auto w = oracle_gaussian(11, 1.5);
  const double range = oracle_range(a, b);
  const double c1 = 0.01 * range * 0.01 * range;
  const double c2 = 0.03 * range * 0.03 * range;

  int scales = 0;
  {
    std::size_t r = a.rows(), c = a.cols();
    while (scales < 5 && r >= 11 && c >= 11) {
      ++scales;
      r /= 2;
      c /= 2;
    }
  }
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += weights[std::size_t(s)];

  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    double cs_acc = 0.0, l_acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 11 <= a.rows(); ++i) {
      for (std::size_t j = 0; j + 11 <= a.cols(); ++j) {
        const WindowStats st = oracle_window_stats(a, b, i, j, w);
        cs_acc += (2.0 * st.cov + c2) / (st.var_a + st.var_b + c2);
        l_acc += (2.0 * st.mu_a * st.mu_b + c1) /
                 (st.mu_a * st.mu_a + st.mu_b * st.mu_b + c1);
        ++count;
      }
    }
    const double weight = weights[std::size_t(s)] / weight_sum;
    result *= std::pow(std::max(cs_acc / count, 0.0), weight);
    if (s + 1 == scales) {
      result *= std::pow(std::max(l_acc / count, 0.0), weight);
    } else {
      a = oracle_pool(a);
      b = oracle_pool(b);
    }
  }
  return result;
}

}  // namespace

TEST_CASE("mse basics") {
  CounterRng rng(1);
  const Matrix x = random_matrix(4, 4, rng);
  CHECK(mse(x, x) == 0.0);

  const Matrix zeros(2, 2, 0.0);
  const Matrix ones(2, 2, 1.0);
  CHECK(mse(zeros, ones) == 1.0);

  const Matrix a = random_matrix(4, 4, rng);
  const Matrix b = random_matrix(4, 4, rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      acc += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    }
  }
  CHECK(mse(a, b) == doctest::Approx(acc / 16.0).epsilon(1e-12));
}

TEST_CASE("mse scales quadratically") {
  CounterRng rng(2);
  const Matrix a = random_matrix(6, 5, rng);
  const Matrix b = random_matrix(6, 5, rng);
  Matrix a3 = a, b3 = b;
  for (double& v : a3.storage()) v *= 3.0;
  for (double& v : b3.storage()) v *= 3.0;
  CHECK(mse(a3, b3) == doctest::Approx(9.0 * mse(a, b)).epsilon(1e-9));
}

TEST_CASE("mse rejects shape mismatch") {
  CHECK_THROWS_WITH_AS(mse(Matrix(2, 2, 0.0), Matrix(2, 3, 0.0)),
                       doctest::Contains("2x3"), DataError);
}

TEST_CASE("ssim identity and anti-correlation signs") {
  CounterRng rng(3);
  const Matrix x = random_matrix(16, 16, rng, 0.0, 1.0);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));

  // Locally zero-mean pattern: luminance stays ~1 and the negated copy
  // flips the structure term.
  Matrix checker(16, 16);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      checker(i, j) = ((i + j) % 2 == 0) ? 0.5 : -0.5;
    }
  }
  Matrix neg = checker;
  for (double& v : neg.storage()) v = -v;
  CHECK(ssim(checker, neg) < 0.0);
}

TEST_CASE("ssim matches the sliding-window oracle") {
  CounterRng rng(4);
  const Matrix a = random_matrix(16, 16, rng, 0.5, 0.3);
  const Matrix b = random_matrix(16, 16, rng, 0.5, 0.3);
  const double expected = oracle_ssim(a, b, oracle_range(a, b));
  CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("ssim honors a fixed dynamic range override") {
  CounterRng rng(5);
  const Matrix a = random_matrix(16, 16, rng, 0.5, 0.1);
  const Matrix b = random_matrix(16, 16, rng, 0.5, 0.1);
  SsimConfig cfg;
  cfg.dynamic_range = 1.0;
  CHECK(ssim(a, b, cfg) == doctest::Approx(oracle_ssim(a, b, 1.0))
                               .epsilon(1e-9));
}

TEST_CASE("ssim rejects inputs smaller than the window") {
  CHECK_THROWS_WITH_AS(ssim(Matrix(8, 16, 0.0), Matrix(8, 16, 0.0)),
                       doctest::Contains("window"), DataError);
}

TEST_CASE("nsim identity, offset pairs and the oracle") {
  CounterRng rng(6);
  const Matrix a = random_matrix(16, 16, rng, 1.0, 0.4);
  CHECK(nsim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

  // Constant offset: centered values are identical so structure is 1 and
  // only luminance moves the score.
  Matrix b = a;
  for (double& v : b.storage()) v += 0.5;
  const double got = nsim(a, b);
  CHECK(got == doctest::Approx(oracle_nsim(a, b)).epsilon(1e-9));
  CHECK(got < 1.0);

  const Matrix c = random_matrix(16, 16, rng, 1.0, 0.4);
  CHECK(nsim(a, c) == doctest::Approx(oracle_nsim(a, c)).epsilon(1e-9));
}

TEST_CASE("ms_ssim identity and scale fallback") {
  CounterRng rng(7);
  const Matrix x = random_matrix(32, 32, rng, 0.5, 0.2);
  CHECK(ms_ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ms_ssim_scale_count(32, 32) == 2);
  CHECK(ms_ssim_scale_count(256, 256) == 5);
  CHECK(ms_ssim_scale_count(11, 11) == 1);
}

TEST_CASE("ms_ssim matches the direct-formula oracle") {
  CounterRng rng(8);
  SUBCASE("two-scale fallback input") {
    const Matrix a = random_matrix(32, 32, rng, 0.5, 0.2);
    const Matrix b = random_matrix(32, 32, rng, 0.5, 0.2);
    CHECK(ms_ssim(a, b) == doctest::Approx(oracle_ms_ssim(a, b))
                               .epsilon(1e-6));
  }
  SUBCASE("full five scales") {
    Matrix a = random_matrix(256, 256, rng, 0.5, 0.2);
    Matrix b = a;
    // Correlated pair: the degraded side is a noisy copy.
    for (double& v : b.storage()) v += 0.05 * rng.next_gaussian();
    CHECK(ms_ssim(a, b) == doctest::Approx(oracle_ms_ssim(a, b))
                               .epsilon(1e-6));
  }
}

TEST_CASE("windowed metrics are symmetric") {
  CounterRng rng(9);
  const Matrix a = random_matrix(32, 32, rng, 0.3, 0.25);
  const Matrix b = random_matrix(32, 32, rng, 0.3, 0.25);
  CHECK(mse(a, b) == mse(b, a));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  CHECK(nsim(a, b) == doctest::Approx(nsim(b, a)).epsilon(1e-12));
  CHECK(ms_ssim(a, b) == doctest::Approx(ms_ssim(b, a)).epsilon(1e-12));
}

TEST_CASE("ssim config validation") {
  SsimConfig cfg;
  cfg.msssim_weights = {0.2, 0.2, 0.2, 0.2, 0.1};  // sums to 0.9
  CHECK_THROWS_WITH_AS(ssim(Matrix(16, 16, 0.0), Matrix(16, 16, 0.0), cfg),
                       doctest::Contains("sum to 1"), DataError);
  cfg = SsimConfig{};
  cfg.k1 = 0.0;
  CHECK_THROWS_AS(ssim(Matrix(16, 16, 0.0), Matrix(16, 16, 0.0), cfg),
                  DataError);
}
