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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spalab/graph.hpp"
#include "support.hpp"

using namespace spalab;
using namespace spalab::testing;

TEST_CASE("backward of sum gives all-ones adjoints") {
  RngStream rng(3);
  Graph g;
  const auto x = g.input(random_tensor({3, 4}, rng));
  g.backward(g.sum(x));
  for (int64_t i = 0; i < g.adjoint(x).size(); ++i) CHECK(g.adjoint(x)[i] == 1.0);
}

TEST_CASE("backward of a dot product exchanges the operands") {
  RngStream rng(5);
  Graph g;
  Tensor av = random_tensor({6}, rng), bv = random_tensor({6}, rng);
  const auto a = g.input(av);
  const auto b = g.input(bv);
  g.backward(g.dot(a, b));
  CHECK(bitwise_equal(g.adjoint(a), bv));
  CHECK(bitwise_equal(g.adjoint(b), av));
}

TEST_CASE("backward requires a scalar root") {
  Graph g;
  const auto x = g.input(Tensor::full({2, 2}, 1.0));
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}

TEST_CASE("a node used twice accumulates both adjoint contributions") {
  Graph g;
  Tensor xv({3}, {1.0, -2.0, 0.5});
  const auto x = g.input(xv);
  g.backward(g.dot(x, x));  // d/dx sum(x^2) = 2x
  for (int i = 0; i < 3; ++i) CHECK(g.adjoint(x)[i] == doctest::Approx(2.0 * xv[i]));
}

TEST_CASE("grad_check: sum of squares") {
  Tensor x({2}, {1.0, 2.0});
  const auto rep = grad_check([](Graph& g, Graph::NodeId xid) { return g.dot(xid, xid); }, x, 1e-8);
  CAPTURE(rep.max_rel_err);
  CHECK(rep.pass);

  // Analytic gradient is [2, 4].
  Graph g;
  const auto xid = g.input(x);
  g.backward(g.dot(xid, xid));
  CHECK(g.adjoint(xid)[0] == doctest::Approx(2.0));
  CHECK(g.adjoint(xid)[1] == doctest::Approx(4.0));
}

TEST_CASE("grad_check: softplus MLP passes at 1e-4") {
  RngStream rng(7);
  Model m = Model::mlp(12, 10, 3, 42);
  Tensor x = random_tensor({1, 2, 2, 3}, rng, 0.0, 1.0);
  const auto rep = grad_check(
      [&](Graph& g, Graph::NodeId xid) {
        auto bound = m.bind(g);
        return g.cross_entropy(bound.forward(xid), {1});
      },
      x, 1e-4);
  CAPTURE(rep.max_rel_err);
  CHECK(rep.pass);
}

TEST_CASE("grad_check: small CNN loss against finite differences") {
  RngStream rng(9);
  Model m = tiny_cnn(12, 12, 2, 3, 17);
  Tensor x = random_tensor({1, 12, 12, 2}, rng, 0.0, 1.0);
  const auto rep = grad_check(
      [&](Graph& g, Graph::NodeId xid) {
        auto bound = m.bind(g);
        return g.cross_entropy(bound.forward(xid), {2});
      },
      x, 1e-4);
  CAPTURE(rep.max_rel_err);
  CHECK(rep.pass);
}

TEST_CASE("grad_check: parameter gradients of a CNN") {
  RngStream rng(11);
  Model m = tiny_cnn(12, 12, 1, 2, 23);
  Tensor x = random_tensor({2, 12, 12, 1}, rng, 0.0, 1.0);
  // Check the gradient w.r.t. the first conv weight by treating it as the
  // differentiated input.
  Tensor w0 = m.params()[0].value;
  const auto rep = grad_check(
      [&](Graph& g, Graph::NodeId wid) {
        std::vector<Graph::NodeId> params;
        for (const auto& p : m.params()) params.push_back(g.input(p.value));
        params[0] = wid;
        Model::Bound bound{&g, &m, params};
        return g.cross_entropy(bound.forward(g.input(x)), {0, 1});
      },
      w0, 1e-4);
  CAPTURE(rep.max_rel_err);
  CHECK(rep.pass);
}

TEST_CASE("grad_check: kl divergence of logits flows to both sides") {
  RngStream rng(13);
  Tensor p = random_tensor({3, 4}, rng);
  Tensor q = random_tensor({3, 4}, rng);
  const auto rep_p = grad_check(
      [&](Graph& g, Graph::NodeId pid) { return g.kl_div_logits(pid, g.input(q)); }, p, 1e-5);
  CHECK(rep_p.pass);
  const auto rep_q = grad_check(
      [&](Graph& g, Graph::NodeId qid) { return g.kl_div_logits(g.input(p), qid); }, q, 1e-5);
  CHECK(rep_q.pass);

  Graph g;
  const auto pid = g.input(p);
  const auto kl = g.kl_div_logits(pid, pid);
  CHECK(g.value(kl)[0] == doctest::Approx(0.0));
}

TEST_CASE("relu derivative at the kink uses the zero branch") {
  // Kinked activations are outside grad_check's contract; the implementation
  // pins relu'(0) = 0.
  Graph g;
  const auto x = g.input(Tensor({3}, {-1.0, 0.0, 2.0}));
  g.backward(g.sum(g.relu(x)));
  CHECK(g.adjoint(x)[0] == 0.0);
  CHECK(g.adjoint(x)[1] == 0.0);
  CHECK(g.adjoint(x)[2] == 1.0);
}

TEST_CASE("graph values are finite on finite inputs") {
  RngStream rng(15);
  Model m = tiny_cnn(12, 12, 3, 4, 31);
  Tensor x = random_tensor({2, 12, 12, 3}, rng, 0.0, 1.0);
  Graph g;
  auto bound = m.bind(g);
  const auto logits = bound.forward(g.input(x));
  const auto loss = g.cross_entropy(logits, {0, 3});
  g.backward(loss);
  for (int64_t i = 0; i < g.value(logits).size(); ++i)
    CHECK(std::isfinite(g.value(logits)[i]));
  for (const auto id : bound.params)
    for (int64_t i = 0; i < g.adjoint(id).size(); ++i) CHECK(std::isfinite(g.adjoint(id)[i]));
}
