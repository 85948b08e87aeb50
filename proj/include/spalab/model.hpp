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

#ifndef SPALAB_MODEL_HPP
#define SPALAB_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spalab/dataset.hpp"
#include "spalab/graph.hpp"
#include "spalab/tensor.hpp"

namespace spalab {

enum class Act { kSoftplus, kRelu };

/// Small classifier: an ordered layer list over named parameter tensors.
/// Two architectures are provided: an MLP and the reference CNN
/// (two 3x3 conv layers with 16/32 channels, softplus, 2x2 average pooling,
/// one hidden linear layer).
class Model {
 public:
  enum ArchId : uint32_t { kMlp = 0, kCnn = 1, kCnnWidePool = 2 };

  struct Param {
    std::string name;
    Tensor value;
  };

  struct Layer {
    enum Kind { kConv, kLinear, kActivation, kAvgPool, kFlatten, kNormalize } kind;
    int w = -1;
    int b = -1;
    int stride = 1;
    double scale = 1.0;   // kNormalize: scale * x + shift
    double shift = 0.0;
  };

  static Model reference_cnn(int in_c, int classes, uint64_t seed, int in_h = 16, int in_w = 16,
                             int hidden = 64, int pools = 2);
  static Model mlp(int in_dim, int hidden, int classes, uint64_t seed);

  /// Parameters bound into a graph once; forward() may be called several
  /// times (clean and adversarial branches share the same parameter nodes).
  struct Bound {
    Graph* g = nullptr;
    const Model* model = nullptr;
    std::vector<Graph::NodeId> params;
    Graph::NodeId forward(Graph::NodeId x) const;
  };
  Bound bind(Graph& g) const;

  /// Deterministic logits for a batch [n,h,w,c]; row i depends only on input i.
  Tensor predict(const Tensor& x) const;
  /// Logits for one image [h,w,c].
  Tensor logits(const Tensor& x1) const;
  /// Predicted class for one image, lowest-index argmax tie-break.
  int predict_class(const Tensor& x1) const;

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  const std::vector<Layer>& layers() const { return layers_; }
  ArchId arch() const { return arch_; }
  Act activation() const { return act_; }
  int num_classes() const { return classes_; }

  /// Flat binary checkpoint: magic "SPALM1", arch id, parameter count, then
  /// named blocks (name length, name, rank, dims as 32-bit LE, float64 LE
  /// data). Round-trips bit-exactly.
  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  ArchId arch_ = kMlp;
  Act act_ = Act::kSoftplus;
  int classes_ = 0;
  std::vector<Layer> layers_;
  std::vector<Param> params_;
};

/// Lowest-index argmax of row `row` of a [n,classes] tensor.
int argmax_row(const Tensor& logits, int row);

/// Mean over the batch of -log softmax probability of the true class
/// (direct formula, independent of the graph op).
double cross_entropy(const Tensor& logits, const std::vector<int>& labels);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 128;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  uint64_t seed = 0;
  bool flip_augment = false;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double eval_acc = -1.0;
};

/// Plain SGD with momentum and the step-decay schedule (lr / 10 at 1/4 and
/// 3/4 of the epochs). Deterministic given the seed, for any worker count.
std::vector<EpochStats> sgd_train(Model& model, const Dataset& train, const TrainConfig& cfg,
                                  const Dataset* eval = nullptr);

/// Fraction of `data` classified correctly.
double accuracy(const Model& model, const Dataset& data);

/// Loss, prediction and input gradient at one image; the attacks' view of
/// the model.
struct LossEval {
  double loss = 0.0;
  int pred = -1;
  Tensor logits;
  Tensor input_grad;  // same shape as the input image
};
LossEval loss_and_input_grad(const Model& model, const Tensor& x1, int label);

namespace train_detail {
// Shared by sgd_train and the adversarial trainers so that their batch
// streams coincide exactly.
std::vector<int> epoch_permutation(int n, uint64_t seed, int epoch);
double lr_at_epoch(const TrainConfig& cfg, int epoch);
void sgd_step(Model& model, const std::vector<Tensor>& grads, std::vector<Tensor>& momentum,
              const TrainConfig& cfg, double lr);
Tensor maybe_flip_batch(const Tensor& xb, const TrainConfig& cfg, int epoch, int batch_start);
Tensor gather_batch(const Dataset& data, const std::vector<int>& perm, int start, int count,
                    std::vector<int>& labels_out);
}  // namespace train_detail

}  // namespace spalab

#endif  // SPALAB_MODEL_HPP
