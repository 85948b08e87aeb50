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

#include "spalab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "spalab/rng.hpp"

namespace spalab {

namespace {

constexpr char kMagic[6] = {'S', 'P', 'A', 'L', 'M', '1'};
constexpr uint64_t kTagShuffle = 0x73687566ULL;
constexpr uint64_t kTagFlip = 0x666c6970ULL;
constexpr uint64_t kTagInit = 0x696e6974ULL;

// Inputs live in [0,1]; the nets see them standardized around zero so the
// softplus activations start in their curved region.
std::vector<Model::Layer> cnn_layers(int pools) {
  using L = Model::Layer;
  if (pools == 1)
    return {
        {L::kNormalize, -1, -1, 1, 4.0, -2.0},
        {L::kConv, 0, 1, 1},  {L::kActivation},
        {L::kConv, 2, 3, 1},  {L::kActivation}, {L::kAvgPool},
        {L::kFlatten},        {L::kLinear, 4, 5}, {L::kActivation},
        {L::kLinear, 6, 7},
    };
  return {
      {L::kNormalize, -1, -1, 1, 4.0, -2.0},
      {L::kConv, 0, 1, 1},  {L::kActivation}, {L::kAvgPool},
      {L::kConv, 2, 3, 1},  {L::kActivation}, {L::kAvgPool},
      {L::kFlatten},        {L::kLinear, 4, 5}, {L::kActivation},
      {L::kLinear, 6, 7},
  };
}

std::vector<Model::Layer> mlp_layers() {
  using L = Model::Layer;
  return {{L::kNormalize, -1, -1, 1, 4.0, -2.0},
          {L::kFlatten},
          {L::kLinear, 0, 1},
          {L::kActivation},
          {L::kLinear, 2, 3}};
}

Tensor glorot_uniform(std::vector<int> shape, int fan_in, int fan_out, RngStream& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

}  // namespace

Model Model::reference_cnn(int in_c, int classes, uint64_t seed, int in_h, int in_w, int hidden,
                           int pools) {
  int p2h, p2w;
  if (pools == 1) {
    p2h = (in_h - 4) / 2;
    p2w = (in_w - 4) / 2;
  } else {
    p2h = ((in_h - 2) / 2 - 2) / 2;
    p2w = ((in_w - 2) / 2 - 2) / 2;
  }
  const int flat = p2h * p2w * 32;
  if (flat <= 0) throw std::invalid_argument("reference_cnn: input too small");

  RngStream rng(mix_seed({seed, kTagInit}));
  Model m;
  m.arch_ = pools == 1 ? kCnnWidePool : kCnn;
  m.classes_ = classes;
  m.params_ = {
      {"conv1.weight", glorot_uniform({3, 3, in_c, 16}, 9 * in_c, 9 * 16, rng)},
      {"conv1.bias", Tensor({16})},
      {"conv2.weight", glorot_uniform({3, 3, 16, 32}, 9 * 16, 9 * 32, rng)},
      {"conv2.bias", Tensor({32})},
      {"fc1.weight", glorot_uniform({flat, hidden}, flat, hidden, rng)},
      {"fc1.bias", Tensor({hidden})},
      {"fc2.weight", glorot_uniform({hidden, classes}, hidden, classes, rng)},
      {"fc2.bias", Tensor({classes})},
  };
  m.layers_ = cnn_layers(pools);
  return m;
}

Model Model::mlp(int in_dim, int hidden, int classes, uint64_t seed) {
  RngStream rng(mix_seed({seed, kTagInit}));
  Model m;
  m.arch_ = kMlp;
  m.classes_ = classes;
  m.params_ = {
      {"fc1.weight", glorot_uniform({in_dim, hidden}, in_dim, hidden, rng)},
      {"fc1.bias", Tensor({hidden})},
      {"fc2.weight", glorot_uniform({hidden, classes}, hidden, classes, rng)},
      {"fc2.bias", Tensor({classes})},
  };
  m.layers_ = mlp_layers();
  return m;
}

Model::Bound Model::bind(Graph& g) const {
  Bound b;
  b.g = &g;
  b.model = this;
  b.params.reserve(params_.size());
  for (const auto& p : params_) b.params.push_back(g.input(p.value));
  return b;
}

Graph::NodeId Model::Bound::forward(Graph::NodeId x) const {
  Graph& g = *this->g;
  Graph::NodeId cur = x;
  for (const auto& layer : model->layers_) {
    switch (layer.kind) {
      case Layer::kConv:
        cur = g.conv2d(cur, params[static_cast<size_t>(layer.w)], layer.stride);
        cur = g.conv_bias_add(cur, params[static_cast<size_t>(layer.b)]);
        break;
      case Layer::kLinear:
        cur = g.matmul(cur, params[static_cast<size_t>(layer.w)]);
        cur = g.bias_add_row(cur, params[static_cast<size_t>(layer.b)]);
        break;
      case Layer::kActivation:
        cur = model->act_ == Act::kSoftplus ? g.softplus(cur) : g.relu(cur);
        break;
      case Layer::kAvgPool:
        cur = g.avgpool2(cur);
        break;
      case Layer::kFlatten:
        cur = g.flatten(cur);
        break;
      case Layer::kNormalize:
        cur = g.affine(cur, layer.scale, layer.shift);
        break;
    }
  }
  return cur;
}

Tensor Model::predict(const Tensor& x) const {
  if (x.rank() != 4) throw std::invalid_argument("predict: expects [n,h,w,c]");
  Graph g;
  Bound b = bind(g);
  return g.value(b.forward(g.input(x)));
}

Tensor Model::logits(const Tensor& x1) const {
  Tensor xb = x1.reshaped({1, x1.dim(0), x1.dim(1), x1.dim(2)});
  Tensor out = predict(xb);
  return out.reshaped({out.dim(1)});
}

int Model::predict_class(const Tensor& x1) const {
  Tensor xb = x1.reshaped({1, x1.dim(0), x1.dim(1), x1.dim(2)});
  return argmax_row(predict(xb), 0);
}

int argmax_row(const Tensor& logits, int row) {
  int best = 0;
  for (int j = 1; j < logits.dim(1); ++j)
    if (logits.at2(row, j) > logits.at2(row, best)) best = j;
  return best;
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2 || static_cast<int>(labels.size()) != logits.dim(0))
    throw std::invalid_argument("cross_entropy: shapes");
  const int n = logits.dim(0), c = logits.dim(1);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= c) throw std::out_of_range("cross_entropy: label out of range");
    double mx = logits.at2(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at2(i, j));
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(logits.at2(i, j) - mx);
    acc += mx + std::log(lse) - logits.at2(i, y);
  }
  return acc / n;
}

// ---------------------------------------------------------------------------
// Checkpoint io

namespace {

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void Model::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(out, static_cast<uint32_t>(arch_));
  write_pod<uint32_t>(out, static_cast<uint32_t>(params_.size()));
  for (const auto& p : params_) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(p.value.rank()));
    for (int d = 0; d < p.value.rank(); ++d) write_pod<int32_t>(out, p.value.dim(d));
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
}

Model Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const auto arch = static_cast<ArchId>(read_pod<uint32_t>(in));
  const uint32_t count = read_pod<uint32_t>(in);

  std::vector<Param> params;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const uint32_t rank = read_pod<uint32_t>(in);
    std::vector<int> shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(read_pod<int32_t>(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated parameter block");
    params.push_back({std::move(name), std::move(t)});
  }

  Model m;
  m.arch_ = arch;
  m.params_ = std::move(params);
  if (arch == kCnn || arch == kCnnWidePool) {
    if (m.params_.size() != 8) throw std::runtime_error("checkpoint: cnn expects 8 parameters");
    m.layers_ = cnn_layers(arch == kCnnWidePool ? 1 : 2);
  } else if (arch == kMlp) {
    if (m.params_.size() != 4) throw std::runtime_error("checkpoint: mlp expects 4 parameters");
    m.layers_ = mlp_layers();
  } else {
    throw std::runtime_error("checkpoint: unknown architecture id");
  }
  m.classes_ = m.params_.back().value.dim(0);
  return m;
}

// ---------------------------------------------------------------------------
// Training

namespace train_detail {

std::vector<int> epoch_permutation(int n, uint64_t seed, int epoch) {
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  RngStream rng(mix_seed({seed, kTagShuffle, static_cast<uint64_t>(epoch)}));
  for (int i = n - 1; i > 0; --i) std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(rng.uniform_int(i + 1))]);
  return perm;
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  double lr = cfg.lr;
  if (epoch >= cfg.epochs * 3 / 4)
    lr *= 0.01;
  else if (epoch >= cfg.epochs / 4)
    lr *= 0.1;
  return lr;
}

void sgd_step(Model& model, const std::vector<Tensor>& grads, std::vector<Tensor>& momentum,
              const TrainConfig& cfg, double lr) {
  auto& params = model.params();
  if (momentum.size() != params.size()) {
    momentum.clear();
    for (const auto& p : params) momentum.push_back(Tensor(p.value.shape()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = params[i].value;
    Tensor& v = momentum[i];
    const Tensor& g = grads[i];
    for (int64_t j = 0; j < theta.size(); ++j) {
      v[j] = cfg.momentum * v[j] + g[j] + cfg.weight_decay * theta[j];
      theta[j] -= lr * v[j];
    }
  }
}

Tensor maybe_flip_batch(const Tensor& xb, const TrainConfig& cfg, int epoch, int batch_start) {
  if (!cfg.flip_augment) return xb;
  Tensor out = xb;
  const int n = xb.dim(0), h = xb.dim(1), w = xb.dim(2), c = xb.dim(3);
  for (int i = 0; i < n; ++i) {
    RngStream rng(mix_seed({cfg.seed, kTagFlip, static_cast<uint64_t>(epoch),
                            static_cast<uint64_t>(batch_start + i)}));
    if (rng.uniform() < 0.5) continue;
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        for (int ch = 0; ch < c; ++ch) out.at4(i, r, col, ch) = xb.at4(i, r, w - 1 - col, ch);
  }
  return out;
}

Tensor gather_batch(const Dataset& data, const std::vector<int>& perm, int start, int count,
                    std::vector<int>& labels_out) {
  Tensor xb({count, data.h(), data.w(), data.c()});
  labels_out.resize(static_cast<size_t>(count));
  const int64_t stride = static_cast<int64_t>(data.h()) * data.w() * data.c();
  for (int i = 0; i < count; ++i) {
    const int src = perm[static_cast<size_t>(start + i)];
    std::copy(data.images.data() + src * stride, data.images.data() + (src + 1) * stride,
              xb.data() + i * stride);
    labels_out[static_cast<size_t>(i)] = data.label(src);
  }
  return xb;
}

}  // namespace train_detail

double accuracy(const Model& model, const Dataset& data) {
  const int n = data.n();
  if (n == 0) return 0.0;
  int correct = 0;
  const int chunk = 256;
  for (int start = 0; start < n; start += chunk) {
    const int count = std::min(chunk, n - start);
    Tensor xb({count, data.h(), data.w(), data.c()});
    const int64_t stride = static_cast<int64_t>(data.h()) * data.w() * data.c();
    std::copy(data.images.data() + start * stride, data.images.data() + (start + count) * stride,
              xb.data());
    const Tensor logits = model.predict(xb);
    for (int i = 0; i < count; ++i)
      if (argmax_row(logits, i) == data.label(start + i)) ++correct;
  }
  return static_cast<double>(correct) / n;
}

std::vector<EpochStats> sgd_train(Model& model, const Dataset& train, const TrainConfig& cfg,
                                  const Dataset* eval) {
  if (train.n() == 0) throw std::invalid_argument("sgd_train: empty dataset");
  std::vector<Tensor> momentum;
  std::vector<EpochStats> history;
  const int n = train.n();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = train_detail::lr_at_epoch(cfg, epoch);
    const auto perm = train_detail::epoch_permutation(n, cfg.seed, epoch);
    double loss_sum = 0.0;
    int correct = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, n - start);
      std::vector<int> yb;
      Tensor xb = train_detail::gather_batch(train, perm, start, count, yb);
      xb = train_detail::maybe_flip_batch(xb, cfg, epoch, start);

      Graph g;
      Model::Bound bound = model.bind(g);
      const Graph::NodeId xid = g.input(xb);
      const Graph::NodeId logits = bound.forward(xid);
      const Graph::NodeId loss = g.cross_entropy(logits, yb);
      g.backward(loss);

      loss_sum += g.value(loss)[0] * count;
      for (int i = 0; i < count; ++i)
        if (argmax_row(g.value(logits), i) == yb[static_cast<size_t>(i)]) ++correct;

      std::vector<Tensor> grads;
      grads.reserve(bound.params.size());
      for (const auto id : bound.params) grads.push_back(g.adjoint(id));
      train_detail::sgd_step(model, grads, momentum, cfg, lr);
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / n;
    st.train_acc = static_cast<double>(correct) / n;
    if (eval) st.eval_acc = accuracy(model, *eval);
    history.push_back(st);
  }
  return history;
}

LossEval loss_and_input_grad(const Model& model, const Tensor& x1, int label) {
  Graph g;
  Model::Bound bound = model.bind(g);
  const Graph::NodeId xid = g.input(x1.reshaped({1, x1.dim(0), x1.dim(1), x1.dim(2)}));
  const Graph::NodeId logits = bound.forward(xid);
  const Graph::NodeId loss = g.cross_entropy(logits, {label});
  g.backward(loss);

  LossEval ev;
  ev.loss = g.value(loss)[0];
  ev.pred = argmax_row(g.value(logits), 0);
  ev.logits = g.value(logits).reshaped({g.value(logits).dim(1)});
  ev.input_grad = g.adjoint(xid).reshaped(x1.shape());
  return ev;
}

}  // namespace spalab
