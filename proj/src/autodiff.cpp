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

#include "specmetric/autodiff.hpp"

#include <cmath>

#include "specmetric/error.hpp"
#include "specmetric/image_ops.hpp"

namespace specmetric::autodiff {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DataError(std::string("tape ") + op + ": shape mismatch: " +
                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()));
  }
}

}  // namespace

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(Matrix value) {
  return push({Op::kConst, -1, -1, 0.0, std::move(value)});
}

NodeId Tape::param(Matrix value) {
  return push({Op::kParam, -1, -1, 0.0, std::move(value)});
}

NodeId Tape::scalar_constant(double value) {
  return constant(Matrix(1, 1, value));
}

NodeId Tape::conv5_reflect(NodeId input, NodeId kernel) {
  Matrix out = conv2_reflect(val(input), val(kernel));
  return push({Op::kConv, input, kernel, 0.0, std::move(out)});
}

NodeId Tape::downsample(NodeId a) {
  return push({Op::kDown, a, -1, 0.0, downsample2(val(a))});
}

NodeId Tape::upsample(NodeId a, std::size_t target_rows,
                      std::size_t target_cols) {
  return push({Op::kUp, a, -1, 0.0, upsample2(val(a), target_rows,
                                              target_cols)});
}

NodeId Tape::abs(NodeId a) {
  Matrix out = val(a);
  for (double& v : out.storage()) v = std::fabs(v);
  return push({Op::kAbs, a, -1, 0.0, std::move(out)});
}

NodeId Tape::add(NodeId a, NodeId b) {
  check_same_shape(val(a), val(b), "add");
  Matrix out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += val(b).data()[i];
  return push({Op::kAdd, a, b, 0.0, std::move(out)});
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check_same_shape(val(a), val(b), "sub");
  Matrix out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= val(b).data()[i];
  return push({Op::kSub, a, b, 0.0, std::move(out)});
}

NodeId Tape::mul(NodeId a, NodeId b) {
  check_same_shape(val(a), val(b), "mul");
  Matrix out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= val(b).data()[i];
  return push({Op::kMul, a, b, 0.0, std::move(out)});
}

NodeId Tape::div(NodeId a, NodeId b) {
  check_same_shape(val(a), val(b), "div");
  Matrix out = val(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] /= val(b).data()[i];
  return push({Op::kDiv, a, b, 0.0, std::move(out)});
}

NodeId Tape::add_scalar(NodeId scalar, NodeId m) {
  if (val(scalar).size() != 1) {
    throw DataError("tape add_scalar: first operand must be 1x1");
  }
  const double s = val(scalar)(0, 0);
  Matrix out = val(m);
  for (double& v : out.storage()) v += s;
  return push({Op::kAddScalar, scalar, m, 0.0, std::move(out)});
}

NodeId Tape::scale(NodeId a, double c) {
  Matrix out = val(a);
  for (double& v : out.storage()) v *= c;
  return push({Op::kScale, a, -1, c, std::move(out)});
}

NodeId Tape::sum(NodeId a) {
  double acc = 0.0;
  for (double v : val(a).storage()) acc += v;
  return push({Op::kSum, a, -1, 0.0, Matrix(1, 1, acc)});
}

NodeId Tape::sqrt(NodeId a) {
  Matrix out = val(a);
  for (double& v : out.storage()) v = std::sqrt(v);
  return push({Op::kSqrt, a, -1, 0.0, std::move(out)});
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
}

void Tape::backward(NodeId output) {
  const Matrix& out_val = val(output);
  if (out_val.size() != 1) {
    throw DataError("tape backward: output must be 1x1");
  }
  grads_.assign(nodes_.size(), Matrix());
  auto adj = [this](NodeId id) -> Matrix& {
    Matrix& g = grads_[std::size_t(id)];
    if (g.empty()) {
      const Matrix& v = val(id);
      g = Matrix(v.rows(), v.cols(), 0.0);
    }
    return g;
  };

  adj(output)(0, 0) = 1.0;

  for (NodeId id = static_cast<NodeId>(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = nodes_[std::size_t(id)];
    Matrix& g = grads_[std::size_t(id)];
    if (g.empty()) continue;  // unreachable from output
    switch (n.op) {
      case Op::kConst:
      case Op::kParam:
        break;
      case Op::kConv: {
        Matrix gi = conv2_reflect_input_grad(g, val(n.b));
        Matrix& ga = adj(n.a);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          ga.data()[i] += gi.data()[i];
        }
        Matrix gk = conv2_reflect_kernel_grad(g, val(n.a), val(n.b).rows(),
                                              val(n.b).cols());
        Matrix& gb = adj(n.b);
        for (std::size_t i = 0; i < gb.size(); ++i) {
          gb.data()[i] += gk.data()[i];
        }
        break;
      }
      case Op::kDown: {
        Matrix gi = downsample2_grad(g, val(n.a).rows(), val(n.a).cols());
        Matrix& ga = adj(n.a);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          ga.data()[i] += gi.data()[i];
        }
        break;
      }
      case Op::kUp: {
        Matrix gi = upsample2_grad(g);
        Matrix& ga = adj(n.a);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          ga.data()[i] += gi.data()[i];
        }
        break;
      }
      case Op::kAbs: {
        Matrix& ga = adj(n.a);
        const Matrix& av = val(n.a);
        for (std::size_t i = 0; i < ga.size(); ++i) {
          const double x = av.data()[i];
          const double sign = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
          ga.data()[i] += g.data()[i] * sign;
        }
        break;
      }
      case Op::kAdd: {
        Matrix& ga = adj(n.a);
        Matrix& gb = adj(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i];
          gb.data()[i] += g.data()[i];
        }
        break;
      }
      case Op::kSub: {
        Matrix& ga = adj(n.a);
        Matrix& gb = adj(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i];
          gb.data()[i] -= g.data()[i];
        }
        break;
      }
      case Op::kMul: {
        Matrix& ga = adj(n.a);
        Matrix& gb = adj(n.b);
        const Matrix& av = val(n.a);
        const Matrix& bv = val(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i] * bv.data()[i];
          gb.data()[i] += g.data()[i] * av.data()[i];
        }
        break;
      }
      case Op::kDiv: {
        Matrix& ga = adj(n.a);
        Matrix& gb = adj(n.b);
        const Matrix& av = val(n.a);
        const Matrix& bv = val(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double inv_b = 1.0 / bv.data()[i];
          ga.data()[i] += g.data()[i] * inv_b;
          gb.data()[i] -= g.data()[i] * av.data()[i] * inv_b * inv_b;
        }
        break;
      }
      case Op::kAddScalar: {
        Matrix& gs = adj(n.a);
        Matrix& gm = adj(n.b);
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
          acc += g.data()[i];
          gm.data()[i] += g.data()[i];
        }
        gs(0, 0) += acc;
        break;
      }
      case Op::kScale: {
        Matrix& ga = adj(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga.data()[i] += g.data()[i] * n.c;
        }
        break;
      }
      case Op::kSum: {
        Matrix& ga = adj(n.a);
        const double gv = g(0, 0);
        for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += gv;
        break;
      }
      case Op::kSqrt: {
        Matrix& ga = adj(n.a);
        const Matrix& ov = n.value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double root = ov.data()[i];
          if (root > 0.0) {
            ga.data()[i] += g.data()[i] * 0.5 / root;
          }
          // Derivative at 0 treated as 0, mirroring the |.| convention.
        }
        break;
      }
    }
  }
}

}  // namespace specmetric::autodiff
