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
// Minimal reverse-mode tape over matrix-valued nodes. The op set is exactly
// what the pyramid / divisive-normalization / distance / correlation graph
// needs; scalars travel as 1x1 matrices.

#ifndef SPECMETRIC_AUTODIFF_HPP_
#define SPECMETRIC_AUTODIFF_HPP_

#include <cstddef>
#include <vector>

#include "specmetric/matrix.hpp"

namespace specmetric::autodiff {

using NodeId = int;

class Tape {
 public:
  // Leaf without gradient tracking.
  NodeId constant(Matrix value);
  // Leaf tracked for gradients.
  NodeId param(Matrix value);
  NodeId scalar_constant(double value);

  NodeId conv5_reflect(NodeId input, NodeId kernel);
  NodeId downsample(NodeId a);
  NodeId upsample(NodeId a, std::size_t target_rows, std::size_t target_cols);
  NodeId abs(NodeId a);  // subgradient 0 at 0
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId div(NodeId a, NodeId b);  // elementwise
  NodeId add_scalar(NodeId scalar, NodeId m);  // broadcast 1x1 over m
  NodeId scale(NodeId a, double c);
  NodeId sum(NodeId a);   // -> 1x1
  NodeId sqrt(NodeId a);  // elementwise; derivative treated as 0 at 0

  const Matrix& value(NodeId id) const { return nodes_[std::size_t(id)].value; }
  double scalar_value(NodeId id) const {
    return nodes_[std::size_t(id)].value(0, 0);
  }

  // Accumulates adjoints of every node reachable from `output`, seeding the
  // output (which must be 1x1) with 1.
  void backward(NodeId output);

  // Gradient of the last backward() output w.r.t. a leaf.
  const Matrix& grad(NodeId id) const { return grads_[std::size_t(id)]; }

  std::size_t node_count() const { return nodes_.size(); }
  void reset();

 private:
  enum class Op {
    kConst,
    kParam,
    kConv,
    kDown,
    kUp,
    kAbs,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kAddScalar,
    kScale,
    kSum,
    kSqrt,
  };
  struct Node {
    Op op;
    NodeId a = -1;
    NodeId b = -1;
    double c = 0.0;
    Matrix value;
  };

  NodeId push(Node n);
  const Matrix& val(NodeId id) const { return nodes_[std::size_t(id)].value; }

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
};

}  // namespace specmetric::autodiff

#endif  // SPECMETRIC_AUTODIFF_HPP_
