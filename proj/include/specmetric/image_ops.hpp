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

#ifndef SPECMETRIC_IMAGE_OPS_HPP_
#define SPECMETRIC_IMAGE_OPS_HPP_

#include "specmetric/matrix.hpp"

namespace specmetric {

// 2-d cross-correlation with an odd-sized kernel and mirror (half-sample
// symmetric) boundary handling. Output has the input's shape.
Matrix conv2_reflect(const Matrix& in, const Matrix& kernel);

// Adjoints of conv2_reflect, used by the reverse-mode tape.
Matrix conv2_reflect_input_grad(const Matrix& out_grad, const Matrix& kernel);
Matrix conv2_reflect_kernel_grad(const Matrix& out_grad, const Matrix& in,
                                 std::size_t k_rows, std::size_t k_cols);

// Keeps even-indexed rows/cols; output dims are ceil(in/2).
Matrix downsample2(const Matrix& in);

// Zero-stuffing upsample to an explicit target shape (the recorded
// pre-downsample dims); requires ceil(target/2) == in dims.
Matrix upsample2(const Matrix& in, std::size_t target_rows,
                 std::size_t target_cols);

// Adjoints: scatter for downsample2, gather for upsample2.
Matrix downsample2_grad(const Matrix& out_grad, std::size_t in_rows,
                        std::size_t in_cols);
Matrix upsample2_grad(const Matrix& out_grad);

}  // namespace specmetric

#endif  // SPECMETRIC_IMAGE_OPS_HPP_
