// Copyright 2026 The spalab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPALAB_GRAPH_HPP
#define SPALAB_GRAPH_HPP

#include <functional>
#include <vector>

#include "spalab/tensor.hpp"

namespace spalab {

/// Reverse-mode compute graph. Nodes are appended in topological order and
/// forward values are computed eagerly; backward() fills adjoints for every
/// node reachable from a scalar root. A graph is confined to one worker;
/// parallelism lives inside the kernels and across graphs.
class Graph {
 public:
  using NodeId = int;

  enum class Op {
    kInput,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAffine,
    kSum,
    kDot,
    kMatmul,
    kBiasAddRow,
    kConv2d,
    kConvBiasAdd,
    kAvgPool2,
    kFlatten,
    kSoftplus,
    kRelu,
    kSigmoid,
    kCrossEntropy,
    kKlDivLogits,
  };

  NodeId input(Tensor value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId affine(NodeId a, double s, double shift);  // s*a + shift elementwise
  NodeId sum(NodeId a);
  NodeId dot(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId bias_add_row(NodeId a, NodeId bias);
  NodeId conv2d(NodeId x, NodeId k, int stride);
  NodeId conv_bias_add(NodeId x, NodeId bias);
  NodeId avgpool2(NodeId x);
  NodeId flatten(NodeId x);
  NodeId softplus(NodeId x);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  /// Mean over the batch of -log softmax probability of the true class.
  NodeId cross_entropy(NodeId logits, std::vector<int> labels);
  /// Mean over the batch of KL(softmax(p) || softmax(q)); gradients flow to both.
  NodeId kl_div_logits(NodeId p, NodeId q);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor& adjoint(NodeId id) const { return nodes_[static_cast<size_t>(id)].adjoint; }

  /// Reverse pass from a scalar root. Throws if the root is not scalar.
  void backward(NodeId root);

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Op op;
    int a = -1, b = -1;
    double scalar_arg = 0.0;
    double scalar_arg2 = 0.0;
    int int_arg = 0;          // conv stride, flatten original h
    int int_arg2 = 0, int_arg3 = 0;
    std::vector<int> labels;  // cross entropy
    Tensor value;
    Tensor adjoint;
  };

  NodeId push(Node n);
  void accumulate(NodeId id, const Tensor& g);

  std::vector<Node> nodes_;
};

/// Result of comparing reverse-mode gradients against central differences.
struct GradCheckReport {
  double max_rel_err = 0.0;
  int64_t checked = 0;
  bool pass = false;
};

/// Checks d(build(x))/dx at x against central finite differences with the
/// given step. `build` appends the function body to a fresh graph and returns
/// the scalar root. Components near zero are measured against the overall
/// gradient scale rather than themselves, so cancellation does not inflate
/// the reported error. The function must be smooth at x; kinked activations
/// (relu at 0) are out of contract.
GradCheckReport grad_check(const std::function<Graph::NodeId(Graph&, Graph::NodeId)>& build,
                           const Tensor& x, double tol, double fd_step = 1e-5);

}  // namespace spalab

#endif  // SPALAB_GRAPH_HPP
