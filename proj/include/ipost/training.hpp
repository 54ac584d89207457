#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ipost/layers.hpp"
#include "ipost/tensor.hpp"

namespace ipost {

enum class LossKind { binary_cross_entropy, categorical_cross_entropy, triplet };

const char* loss_name(LossKind kind);

struct BceResult {
    double loss = 0.0;
    double dloss_dp = 0.0;
};

// Binary cross-entropy on a single predicted probability. p is clamped to
// [eps, 1-eps] with eps = 1e-7 before the logs.
BceResult bce_loss(double p, int label);

struct CceResult {
    double loss = 0.0;
    Tensor dloss_dprobs;  // same shape as probs
};

// Categorical cross-entropy -ln p[label] with the same probability clamp.
CceResult cce_loss(const Tensor& probs, int label);

struct TripletResult {
    double loss = 0.0;
    Tensor grad_anchor;
    Tensor grad_positive;
    Tensor grad_negative;
};

// max(0, d(a,p)^2 - d(a,n)^2 + margin) with Euclidean d; gradients are zero
// in the inactive region.
TripletResult triplet_loss(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
                           double margin);

// Bias-corrected Adam over the parameter tensors of one network.
struct AdamState {
    std::vector<LayerParams> m;  // first moments, parallel to net.params
    std::vector<LayerParams> v;  // second moments
    long long step = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam_state(const NetworkGraph& net, double learning_rate = 1e-3);

void adam_step(AdamState& state, std::vector<LayerParams>& params,
               const std::vector<LayerParams>& grads);

struct TrainConfig {
    int epochs = 10;
    int batch_size = 16;
    std::uint32_t seed = 0;
    double learning_rate = 1e-3;
    LossKind loss = LossKind::categorical_cross_entropy;
    double triplet_margin = 0.2;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double f1 = 0.0;
};

// Images with integer class labels; label_names maps label index -> name.
struct LabeledDataset {
    std::vector<Tensor> images;
    std::vector<int> labels;
    std::vector<std::string> label_names;

    std::size_t size() const { return images.size(); }
};

struct TrainValSplit {
    LabeledDataset train;
    LabeledDataset val;
};

// Seeded stratified split: about val_fraction of each class moves to val,
// and every class keeps at least one training sample.
TrainValSplit split_dataset(const LabeledDataset& data, double val_fraction, std::uint32_t seed);

// One full pass over data.train in seeded-shuffled batches, then metric
// evaluation on both splits. Deterministic given (net params, adam state,
// config.seed, epoch index).
EpochMetrics train_epoch(NetworkGraph& net, const TrainValSplit& data, const TrainConfig& config,
                         AdamState& adam, int epoch_index);

struct EvalResult {
    double accuracy = 0.0;
    double f1 = 0.0;
    double mean_loss = 0.0;
};

// Classifier evaluation: accuracy by argmax, F1 on the positive class for
// two-class data and macro-averaged otherwise.
EvalResult evaluate(const NetworkGraph& net, const LabeledDataset& dataset,
                    LossKind loss = LossKind::categorical_cross_entropy);

// Embedding evaluation: nearest-neighbor identity over reference embeddings.
// exclude_self skips reference i for probe i (probes aliasing the reference).
EvalResult evaluate_embedder(const NetworkGraph& net, const LabeledDataset& reference,
                             const LabeledDataset& probes, double margin,
                             bool exclude_self = false);

std::string metrics_header_line();
std::string metrics_line(const EpochMetrics& m);
void write_metrics_file(const std::string& path, const std::vector<EpochMetrics>& metrics);

}  // namespace ipost
