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

#include "specmetric/image_ops.hpp"

#include "specmetric/error.hpp"

namespace specmetric {

namespace {

void check_odd_kernel(const Matrix& kernel) {
  if (kernel.rows() % 2 == 0 || kernel.cols() % 2 == 0 || kernel.empty()) {
    throw DataError("convolution kernel dims must be odd, got " +
                    std::to_string(kernel.rows()) + "x" +
                    std::to_string(kernel.cols()));
  }
}

}  // namespace

Matrix conv2_reflect(const Matrix& in, const Matrix& kernel) {
  check_odd_kernel(kernel);
  const long pr = static_cast<long>(kernel.rows() / 2);
  const long pc = static_cast<long>(kernel.cols() / 2);
  const std::size_t rows = in.rows(), cols = in.cols();
  Matrix out(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (long u = -pr; u <= pr; ++u) {
        const std::size_t ri = reflect_index(static_cast<long>(i) + u, rows);
        for (long v = -pc; v <= pc; ++v) {
          const std::size_t rj =
              reflect_index(static_cast<long>(j) + v, cols);
          acc += kernel(static_cast<std::size_t>(u + pr),
                        static_cast<std::size_t>(v + pc)) *
                 in(ri, rj);
        }
      }
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix conv2_reflect_input_grad(const Matrix& out_grad, const Matrix& kernel) {
  check_odd_kernel(kernel);
  const long pr = static_cast<long>(kernel.rows() / 2);
  const long pc = static_cast<long>(kernel.cols() / 2);
  const std::size_t rows = out_grad.rows(), cols = out_grad.cols();
  Matrix in_grad(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double g = out_grad(i, j);
      for (long u = -pr; u <= pr; ++u) {
        const std::size_t ri = reflect_index(static_cast<long>(i) + u, rows);
        for (long v = -pc; v <= pc; ++v) {
          const std::size_t rj =
              reflect_index(static_cast<long>(j) + v, cols);
          in_grad(ri, rj) += g * kernel(static_cast<std::size_t>(u + pr),
                                        static_cast<std::size_t>(v + pc));
        }
      }
    }
  }
  return in_grad;
}

Matrix conv2_reflect_kernel_grad(const Matrix& out_grad, const Matrix& in,
                                 std::size_t k_rows, std::size_t k_cols) {
  const long pr = static_cast<long>(k_rows / 2);
  const long pc = static_cast<long>(k_cols / 2);
  const std::size_t rows = in.rows(), cols = in.cols();
  Matrix k_grad(k_rows, k_cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double g = out_grad(i, j);
      for (long u = -pr; u <= pr; ++u) {
        const std::size_t ri = reflect_index(static_cast<long>(i) + u, rows);
        for (long v = -pc; v <= pc; ++v) {
          const std::size_t rj =
              reflect_index(static_cast<long>(j) + v, cols);
          k_grad(static_cast<std::size_t>(u + pr),
                 static_cast<std::size_t>(v + pc)) += g * in(ri, rj);
        }
      }
    }
  }
  return k_grad;
}

Matrix downsample2(const Matrix& in) {
  const std::size_t rows = (in.rows() + 1) / 2;
  const std::size_t cols = (in.cols() + 1) / 2;
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out(i, j) = in(2 * i, 2 * j);
    }
  }
  return out;
}

Matrix upsample2(const Matrix& in, std::size_t target_rows,
                 std::size_t target_cols) {
  if ((target_rows + 1) / 2 != in.rows() ||
      (target_cols + 1) / 2 != in.cols()) {
    throw DataError("upsample2 target " + std::to_string(target_rows) + "x" +
                    std::to_string(target_cols) + " inconsistent with input " +
                    std::to_string(in.rows()) + "x" +
                    std::to_string(in.cols()));
  }
  Matrix out(target_rows, target_cols, 0.0);
  for (std::size_t i = 0; i < in.rows(); ++i) {
    for (std::size_t j = 0; j < in.cols(); ++j) {
      out(2 * i, 2 * j) = in(i, j);
    }
  }
  return out;
}

Matrix downsample2_grad(const Matrix& out_grad, std::size_t in_rows,
                        std::size_t in_cols) {
  Matrix in_grad(in_rows, in_cols, 0.0);
  for (std::size_t i = 0; i < out_grad.rows(); ++i) {
    for (std::size_t j = 0; j < out_grad.cols(); ++j) {
      in_grad(2 * i, 2 * j) = out_grad(i, j);
    }
  }
  return in_grad;
}

Matrix upsample2_grad(const Matrix& out_grad) {
  const std::size_t rows = (out_grad.rows() + 1) / 2;
  const std::size_t cols = (out_grad.cols() + 1) / 2;
  Matrix in_grad(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      in_grad(i, j) = out_grad(2 * i, 2 * j);
    }
  }
  return in_grad;
}

}  // namespace specmetric
