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

#include "spalab/graph.hpp"

#include <algorithm>
#include <cmath>

#include "spalab/kernels.hpp"

namespace spalab {

namespace {

inline double softplus_val(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid_val(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Row-wise log-softmax into `out`; returns nothing. logits [n, c].
void log_softmax_rows(const Tensor& logits, Tensor& out) {
  const int n = logits.dim(0), c = logits.dim(1);
  for (int i = 0; i < n; ++i) {
    double mx = logits.at2(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at2(i, j));
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(logits.at2(i, j) - mx);
    lse = mx + std::log(lse);
    for (int j = 0; j < c; ++j) out.at2(i, j) = logits.at2(i, j) - lse;
  }
}

}  // namespace

Graph::NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::NodeId Graph::input(Tensor value) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(value);
  return push(std::move(n));
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "graph add");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = value(a);
  for (int64_t i = 0; i < n.value.size(); ++i) n.value[i] += value(b)[i];
  return push(std::move(n));
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "graph sub");
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = value(a);
  for (int64_t i = 0; i < n.value.size(); ++i) n.value[i] -= value(b)[i];
  return push(std::move(n));
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "graph mul");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = value(a);
  for (int64_t i = 0; i < n.value.size(); ++i) n.value[i] *= value(b)[i];
  return push(std::move(n));
}

Graph::NodeId Graph::scale(NodeId a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.scalar_arg = s;
  n.value = value(a);
  for (int64_t i = 0; i < n.value.size(); ++i) n.value[i] *= s;
  return push(std::move(n));
}

Graph::NodeId Graph::affine(NodeId a, double s, double shift) {
  Node n;
  n.op = Op::kAffine;
  n.a = a;
  n.scalar_arg = s;
  n.scalar_arg2 = shift;
  n.value = value(a);
  for (int64_t i = 0; i < n.value.size(); ++i) n.value[i] = s * n.value[i] + shift;
  return push(std::move(n));
}

Graph::NodeId Graph::sum(NodeId a) {
  Node n;
  n.op = Op::kSum;
  n.a = a;
  double acc = 0.0;
  for (int64_t i = 0; i < value(a).size(); ++i) acc += value(a)[i];
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

Graph::NodeId Graph::dot(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "graph dot");
  Node n;
  n.op = Op::kDot;
  n.a = a;
  n.b = b;
  double acc = 0.0;
  for (int64_t i = 0; i < value(a).size(); ++i) acc += value(a)[i] * value(b)[i];
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMatmul;
  n.a = a;
  n.b = b;
  n.value = spalab::matmul(value(a), value(b));
  return push(std::move(n));
}

Graph::NodeId Graph::bias_add_row(NodeId a, NodeId bias) {
  const Tensor& x = value(a);
  const Tensor& bv = value(bias);
  if (x.rank() != 2 || bv.rank() != 1 || bv.dim(0) != x.dim(1))
    throw std::invalid_argument("bias_add_row: shapes");
  Node n;
  n.op = Op::kBiasAddRow;
  n.a = a;
  n.b = bias;
  n.value = x;
  for (int i = 0; i < x.dim(0); ++i)
    for (int j = 0; j < x.dim(1); ++j) n.value.at2(i, j) += bv[j];
  return push(std::move(n));
}

Graph::NodeId Graph::conv2d(NodeId x, NodeId k, int stride) {
  Node n;
  n.op = Op::kConv2d;
  n.a = x;
  n.b = k;
  n.int_arg = stride;
  n.value = conv2d_nhwc(value(x), value(k), stride);
  return push(std::move(n));
}

Graph::NodeId Graph::conv_bias_add(NodeId x, NodeId bias) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(bias);
  if (xv.rank() != 4 || bv.rank() != 1 || bv.dim(0) != xv.dim(3))
    throw std::invalid_argument("conv_bias_add: shapes");
  Node n;
  n.op = Op::kConvBiasAdd;
  n.a = x;
  n.b = bias;
  n.value = xv;
  const int c = xv.dim(3);
  for (int64_t i = 0; i < xv.size(); ++i) n.value[i] += bv[i % c];
  return push(std::move(n));
}

Graph::NodeId Graph::avgpool2(NodeId x) {
  Node n;
  n.op = Op::kAvgPool2;
  n.a = x;
  n.int_arg = value(x).dim(1);
  n.int_arg2 = value(x).dim(2);
  n.value = spalab::avgpool2(value(x));
  return push(std::move(n));
}

Graph::NodeId Graph::flatten(NodeId x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4) throw std::invalid_argument("flatten: expects rank-4");
  Node n;
  n.op = Op::kFlatten;
  n.a = x;
  n.value = xv.reshaped({xv.dim(0), xv.dim(1) * xv.dim(2) * xv.dim(3)});
  return push(std::move(n));
}

Graph::NodeId Graph::softplus(NodeId x) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = x;
  n.value = value(x);
  for (int64_t i = 0; i < n.value.size(); ++i) n.value[i] = softplus_val(n.value[i]);
  return push(std::move(n));
}

Graph::NodeId Graph::relu(NodeId x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x;
  n.value = value(x);
  for (int64_t i = 0; i < n.value.size(); ++i) n.value[i] = std::max(0.0, n.value[i]);
  return push(std::move(n));
}

Graph::NodeId Graph::sigmoid(NodeId x) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = x;
  n.value = value(x);
  for (int64_t i = 0; i < n.value.size(); ++i) n.value[i] = sigmoid_val(n.value[i]);
  return push(std::move(n));
}

Graph::NodeId Graph::cross_entropy(NodeId logits, std::vector<int> labels) {
  const Tensor& lg = value(logits);
  if (lg.rank() != 2 || static_cast<int>(labels.size()) != lg.dim(0))
    throw std::invalid_argument("cross_entropy: shapes");
  for (int y : labels)
    if (y < 0 || y >= lg.dim(1)) throw std::out_of_range("cross_entropy: label out of range");
  Node n;
  n.op = Op::kCrossEntropy;
  n.a = logits;
  n.labels = std::move(labels);
  Tensor ls(lg.shape());
  log_softmax_rows(lg, ls);
  double acc = 0.0;
  for (int i = 0; i < lg.dim(0); ++i) acc -= ls.at2(i, n.labels[static_cast<size_t>(i)]);
  n.value = Tensor::scalar(acc / lg.dim(0));
  return push(std::move(n));
}

Graph::NodeId Graph::kl_div_logits(NodeId p, NodeId q) {
  const Tensor& pv = value(p);
  const Tensor& qv = value(q);
  require_same_shape(pv, qv, "kl_div_logits");
  Node n;
  n.op = Op::kKlDivLogits;
  n.a = p;
  n.b = q;
  Tensor lp(pv.shape()), lq(qv.shape());
  log_softmax_rows(pv, lp);
  log_softmax_rows(qv, lq);
  double acc = 0.0;
  const int nrows = pv.dim(0), c = pv.dim(1);
  for (int i = 0; i < nrows; ++i)
    for (int j = 0; j < c; ++j) acc += std::exp(lp.at2(i, j)) * (lp.at2(i, j) - lq.at2(i, j));
  n.value = Tensor::scalar(acc / nrows);
  return push(std::move(n));
}

void Graph::accumulate(NodeId id, const Tensor& g) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.adjoint.empty()) n.adjoint = Tensor(n.value.shape());
  for (int64_t i = 0; i < g.size(); ++i) n.adjoint[i] += g[i];
}

void Graph::backward(NodeId root) {
  Node& rn = nodes_[static_cast<size_t>(root)];
  if (rn.value.size() != 1)
    throw std::invalid_argument("backward: root must be scalar");
  for (auto& n : nodes_) n.adjoint = Tensor();
  rn.adjoint = Tensor::scalar(1.0);

  for (int id = root; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.adjoint.empty()) continue;
    const Tensor& g = n.adjoint;
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kSub: {
        accumulate(n.a, g);
        Tensor ng(g.shape());
        for (int64_t i = 0; i < g.size(); ++i) ng[i] = -g[i];
        accumulate(n.b, ng);
        break;
      }
      case Op::kMul: {
        Tensor ga(g.shape()), gb(g.shape());
        const Tensor& av = value(n.a);
        const Tensor& bv = value(n.b);
        for (int64_t i = 0; i < g.size(); ++i) {
          ga[i] = g[i] * bv[i];
          gb[i] = g[i] * av[i];
        }
        accumulate(n.a, ga);
        accumulate(n.b, gb);
        break;
      }
      case Op::kScale:
      case Op::kAffine: {
        Tensor ga(g.shape());
        for (int64_t i = 0; i < g.size(); ++i) ga[i] = g[i] * n.scalar_arg;
        accumulate(n.a, ga);
        break;
      }
      case Op::kSum: {
        Tensor ga(value(n.a).shape());
        for (int64_t i = 0; i < ga.size(); ++i) ga[i] = g[0];
        accumulate(n.a, ga);
        break;
      }
      case Op::kDot: {
        Tensor ga(value(n.a).shape()), gb(value(n.b).shape());
        for (int64_t i = 0; i < ga.size(); ++i) {
          ga[i] = g[0] * value(n.b)[i];
          gb[i] = g[0] * value(n.a)[i];
        }
        accumulate(n.a, ga);
        accumulate(n.b, gb);
        break;
      }
      case Op::kMatmul:
        accumulate(n.a, matmul_transB(g, value(n.b)));
        accumulate(n.b, matmul_transA(value(n.a), g));
        break;
      case Op::kBiasAddRow: {
        accumulate(n.a, g);
        Tensor gb(value(n.b).shape());
        for (int i = 0; i < g.dim(0); ++i)
          for (int j = 0; j < g.dim(1); ++j) gb[j] += g.at2(i, j);
        accumulate(n.b, gb);
        break;
      }
      case Op::kConv2d: {
        const Tensor& xv = value(n.a);
        accumulate(n.a, conv2d_input_grad(g, value(n.b), n.int_arg, xv.dim(1), xv.dim(2)));
        accumulate(n.b, conv2d_weight_grad(xv, g, n.int_arg, value(n.b).dim(0)));
        break;
      }
      case Op::kConvBiasAdd: {
        accumulate(n.a, g);
        Tensor gb(value(n.b).shape());
        const int c = value(n.b).dim(0);
        for (int64_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
        accumulate(n.b, gb);
        break;
      }
      case Op::kAvgPool2:
        accumulate(n.a, avgpool2_grad(g, n.int_arg, n.int_arg2));
        break;
      case Op::kFlatten:
        accumulate(n.a, g.reshaped(value(n.a).shape()));
        break;
      case Op::kSoftplus: {
        Tensor ga(g.shape());
        const Tensor& xv = value(n.a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] = g[i] * sigmoid_val(xv[i]);
        accumulate(n.a, ga);
        break;
      }
      case Op::kRelu: {
        Tensor ga(g.shape());
        const Tensor& xv = value(n.a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] = xv[i] > 0.0 ? g[i] : 0.0;
        accumulate(n.a, ga);
        break;
      }
      case Op::kSigmoid: {
        Tensor ga(g.shape());
        const Tensor& yv = n.value;
        for (int64_t i = 0; i < g.size(); ++i) ga[i] = g[i] * yv[i] * (1.0 - yv[i]);
        accumulate(n.a, ga);
        break;
      }
      case Op::kCrossEntropy: {
        const Tensor& lg = value(n.a);
        const int rows = lg.dim(0), c = lg.dim(1);
        Tensor ls(lg.shape());
        log_softmax_rows(lg, ls);
        Tensor ga(lg.shape());
        const double gs = g[0] / rows;
        for (int i = 0; i < rows; ++i)
          for (int j = 0; j < c; ++j) {
            const double soft = std::exp(ls.at2(i, j));
            ga.at2(i, j) = gs * (soft - (j == n.labels[static_cast<size_t>(i)] ? 1.0 : 0.0));
          }
        accumulate(n.a, ga);
        break;
      }
      case Op::kKlDivLogits: {
        const Tensor& pv = value(n.a);
        const Tensor& qv = value(n.b);
        const int rows = pv.dim(0), c = pv.dim(1);
        Tensor lp(pv.shape()), lq(qv.shape());
        log_softmax_rows(pv, lp);
        log_softmax_rows(qv, lq);
        Tensor gp(pv.shape()), gq(qv.shape());
        const double gs = g[0] / rows;
        for (int i = 0; i < rows; ++i) {
          double kl_row = 0.0;
          for (int j = 0; j < c; ++j)
            kl_row += std::exp(lp.at2(i, j)) * (lp.at2(i, j) - lq.at2(i, j));
          for (int j = 0; j < c; ++j) {
            const double sp = std::exp(lp.at2(i, j));
            const double sq = std::exp(lq.at2(i, j));
            gp.at2(i, j) = gs * sp * ((lp.at2(i, j) - lq.at2(i, j)) - kl_row);
            gq.at2(i, j) = gs * (sq - sp);
          }
        }
        accumulate(n.a, gp);
        accumulate(n.b, gq);
        break;
      }
    }
  }
}

GradCheckReport grad_check(const std::function<Graph::NodeId(Graph&, Graph::NodeId)>& build,
                           const Tensor& x, double tol, double fd_step) {
  Graph g;
  const Graph::NodeId xid = g.input(x);
  const Graph::NodeId root = build(g, xid);
  g.backward(root);
  const Tensor analytic = g.adjoint(xid);

  auto eval = [&](const Tensor& xt) {
    Graph gg;
    return gg.value(build(gg, gg.input(xt)))[0];
  };

  Tensor fd(x.shape());
  Tensor xt = x;
  for (int64_t i = 0; i < x.size(); ++i) {
    const double orig = xt[i];
    xt[i] = orig + fd_step;
    const double fp = eval(xt);
    xt[i] = orig - fd_step;
    const double fm = eval(xt);
    xt[i] = orig;
    fd[i] = (fp - fm) / (2.0 * fd_step);
  }

  double gmax = 0.0;
  for (int64_t i = 0; i < fd.size(); ++i) gmax = std::max(gmax, std::abs(fd[i]));

  GradCheckReport rep;
  rep.checked = x.size();
  for (int64_t i = 0; i < x.size(); ++i) {
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(fd[i]), 0.01 * gmax, 1e-8});
    rep.max_rel_err = std::max(rep.max_rel_err, std::abs(analytic[i] - fd[i]) / denom);
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace spalab
