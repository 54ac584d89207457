#include "ipost/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ipost {

namespace {

constexpr double kProbClamp = 1e-7;

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument(msg);
}

double clamp_prob(double p) {
    return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

}  // namespace

const char* loss_name(LossKind kind) {
    switch (kind) {
        case LossKind::binary_cross_entropy: return "bce";
        case LossKind::categorical_cross_entropy: return "cce";
        case LossKind::triplet: return "triplet";
    }
    return "?";
}

BceResult bce_loss(double p, int label) {
    if (label != 0 && label != 1) {
        fail("bce_loss: label " + std::to_string(label) + " outside {0,1}");
    }
    const double q = clamp_prob(p);
    BceResult result;
    result.loss = -(label * std::log(q) + (1 - label) * std::log(1.0 - q));
    result.dloss_dp = -label / q + (1 - label) / (1.0 - q);
    return result;
}

CceResult cce_loss(const Tensor& probs, int label) {
    if (probs.shape().rank() != 1) fail("cce_loss: probs must be rank 1");
    if (label < 0 || label >= probs.shape().extent(0)) {
        fail("cce_loss: label " + std::to_string(label) + " out of range for " +
             std::to_string(probs.shape().extent(0)) + " classes");
    }
    const double q = clamp_prob(probs[static_cast<std::size_t>(label)]);
    CceResult result;
    result.loss = -std::log(q);
    result.dloss_dprobs = Tensor(probs.shape());
    result.dloss_dprobs[static_cast<std::size_t>(label)] = static_cast<float>(-1.0 / q);
    return result;
}

TripletResult triplet_loss(const Tensor& anchor, const Tensor& positive, const Tensor& negative,
                           double margin) {
    if (anchor.shape() != positive.shape() || anchor.shape() != negative.shape()) {
        fail("triplet_loss: embedding dimension mismatch " + anchor.shape().to_string() + " / " +
             positive.shape().to_string() + " / " + negative.shape().to_string());
    }
    if (!(margin > 0.0)) fail("triplet_loss: margin must be > 0");

    double d_ap = 0.0;
    double d_an = 0.0;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        const double dp = static_cast<double>(anchor[i]) - positive[i];
        const double dn = static_cast<double>(anchor[i]) - negative[i];
        d_ap += dp * dp;
        d_an += dn * dn;
    }

    TripletResult result;
    result.grad_anchor = Tensor(anchor.shape());
    result.grad_positive = Tensor(anchor.shape());
    result.grad_negative = Tensor(anchor.shape());

    const double raw = d_ap - d_an + margin;
    if (raw <= 0.0) return result;  // satisfied margin: zero loss, zero gradients

    result.loss = raw;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        result.grad_anchor[i] = 2.0f * (negative[i] - positive[i]);
        result.grad_positive[i] = 2.0f * (positive[i] - anchor[i]);
        result.grad_negative[i] = 2.0f * (anchor[i] - negative[i]);
    }
    return result;
}

AdamState make_adam_state(const NetworkGraph& net, double learning_rate) {
    AdamState state;
    state.learning_rate = learning_rate;
    state.m.resize(net.params.size());
    state.v.resize(net.params.size());
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        if (!net.params[i].weights.empty()) {
            state.m[i].weights = Tensor(net.params[i].weights.shape());
            state.v[i].weights = Tensor(net.params[i].weights.shape());
            state.m[i].bias = Tensor(net.params[i].bias.shape());
            state.v[i].bias = Tensor(net.params[i].bias.shape());
        }
    }
    return state;
}

namespace {

void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                        const AdamState& state, double bias1, double bias2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        if (!std::isfinite(g)) fail("adam_step: non-finite gradient");
        const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
        const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double m_hat = mi / bias1;
        const double v_hat = vi / bias2;
        param[i] = static_cast<float>(param[i] -
                                      state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
}

}  // namespace

void adam_step(AdamState& state, std::vector<LayerParams>& params,
               const std::vector<LayerParams>& grads) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        fail("adam_step: parameter/gradient/state layer counts do not align");
    }
    state.step += 1;
    const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].weights.empty()) continue;
        if (grads[i].weights.shape() != params[i].weights.shape()) {
            fail("adam_step: gradient shape mismatch at layer " + std::to_string(i));
        }
        adam_update_tensor(params[i].weights, grads[i].weights, state.m[i].weights,
                           state.v[i].weights, state, bias1, bias2);
        adam_update_tensor(params[i].bias, grads[i].bias, state.m[i].bias, state.v[i].bias, state,
                           bias1, bias2);
    }
}

namespace {

void accumulate_grads(std::vector<LayerParams>& total, const std::vector<LayerParams>& part) {
    if (total.empty()) {
        total = part;
        return;
    }
    for (std::size_t i = 0; i < total.size(); ++i) {
        if (part[i].weights.empty()) continue;
        if (total[i].weights.empty()) {
            total[i] = part[i];
            continue;
        }
        for (std::size_t j = 0; j < total[i].weights.size(); ++j) {
            total[i].weights[j] += part[i].weights[j];
        }
        for (std::size_t j = 0; j < total[i].bias.size(); ++j) {
            total[i].bias[j] += part[i].bias[j];
        }
    }
}

void scale_grads(std::vector<LayerParams>& grads, float s, const NetworkGraph& net) {
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].weights.empty() && !net.params[i].weights.empty()) {
            // layer never saw a gradient this batch; treat as zero
            grads[i].weights = Tensor(net.params[i].weights.shape());
            grads[i].bias = Tensor(net.params[i].bias.shape());
            continue;
        }
        for (std::size_t j = 0; j < grads[i].weights.size(); ++j) grads[i].weights[j] *= s;
        for (std::size_t j = 0; j < grads[i].bias.size(); ++j) grads[i].bias[j] *= s;
    }
}

int argmax_index(const Tensor& t) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(t.size()); ++i) {
        if (t[static_cast<std::size_t>(i)] > t[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

double per_example_loss(const Tensor& probs, int label, LossKind loss) {
    if (loss == LossKind::binary_cross_entropy) {
        return bce_loss(probs[1], label).loss;
    }
    return cce_loss(probs, label).loss;
}

Tensor loss_gradient(const Tensor& probs, int label, LossKind loss) {
    if (loss == LossKind::binary_cross_entropy) {
        Tensor g(probs.shape());
        g[1] = static_cast<float>(bce_loss(probs[1], label).dloss_dp);
        return g;
    }
    return cce_loss(probs, label).dloss_dprobs;
}

struct F1Counts {
    double tp = 0, fp = 0, fn = 0;

    double f1() const {
        const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    }
};

double f1_score(const std::vector<int>& predictions, const std::vector<int>& labels,
                int num_classes) {
    if (num_classes == 2) {
        F1Counts c;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (predictions[i] == 1 && labels[i] == 1) c.tp += 1;
            if (predictions[i] == 1 && labels[i] == 0) c.fp += 1;
            if (predictions[i] == 0 && labels[i] == 1) c.fn += 1;
        }
        return c.f1();
    }
    double sum = 0.0;
    for (int cls = 0; cls < num_classes; ++cls) {
        F1Counts c;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (predictions[i] == cls && labels[i] == cls) c.tp += 1;
            if (predictions[i] == cls && labels[i] != cls) c.fp += 1;
            if (predictions[i] != cls && labels[i] == cls) c.fn += 1;
        }
        sum += c.f1();
    }
    return sum / num_classes;
}

int dataset_num_classes(const LabeledDataset& dataset) {
    int n = 0;
    for (int label : dataset.labels) n = std::max(n, label + 1);
    if (!dataset.label_names.empty()) {
        n = std::max(n, static_cast<int>(dataset.label_names.size()));
    }
    return n;
}

LayerKind head_kind(const NetworkGraph& net) {
    if (net.layers.empty()) fail("train_epoch: network has no layers");
    return net.layers.back().kind;
}

void check_head_loss_pairing(const NetworkGraph& net, LossKind loss) {
    const LayerKind head = head_kind(net);
    if (loss == LossKind::triplet) {
        if (head != LayerKind::l2norm) {
            fail("train_epoch: triplet loss requires an embedding (l2norm) head, network ends in " +
                 std::string(kind_name(head)));
        }
        return;
    }
    if (head != LayerKind::softmax) {
        fail("train_epoch: cross-entropy losses require a softmax head, network ends in " +
             std::string(kind_name(head)));
    }
    if (loss == LossKind::binary_cross_entropy) {
        const LayerSpec& logits = net.layers[net.layers.size() - 2];
        if (logits.kind != LayerKind::dense || logits.dense_out != 2) {
            fail("train_epoch: binary cross-entropy requires a 2-class head");
        }
    }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.uniform_int(static_cast<std::uint32_t>(i))]);
    }
    return idx;
}

EpochMetrics train_epoch_classifier(NetworkGraph& net, const TrainValSplit& data,
                                    const TrainConfig& config, AdamState& adam, int epoch_index) {
    Rng rng(config.seed + 0x9E3779B9u * static_cast<std::uint32_t>(epoch_index + 1));
    const std::vector<std::size_t> order = shuffled_indices(data.train.size(), rng);

    net.mode = Mode::train;
    double loss_sum = 0.0;
    std::size_t seen = 0;
    while (seen < order.size()) {
        const std::size_t batch_end =
            std::min(order.size(), seen + static_cast<std::size_t>(config.batch_size));
        std::vector<LayerParams> batch_grads;
        int batch_count = 0;
        for (std::size_t k = seen; k < batch_end; ++k) {
            const std::size_t idx = order[k];
            TrainForwardResult fwd = forward_train(net, data.train.images[idx], rng);
            const int label = data.train.labels[idx];
            loss_sum += per_example_loss(fwd.output, label, config.loss);
            const Tensor grad = loss_gradient(fwd.output, label, config.loss);
            BackwardResult bwd = network_backward(net, fwd.cache, grad);
            accumulate_grads(batch_grads, bwd.param_grads);
            ++batch_count;
        }
        scale_grads(batch_grads, 1.0f / static_cast<float>(batch_count), net);
        adam_step(adam, net.params, batch_grads);
        seen = batch_end;
    }
    net.mode = Mode::eval;

    EpochMetrics metrics;
    metrics.epoch = epoch_index;
    metrics.train_loss = loss_sum / static_cast<double>(order.size());
    const EvalResult train_eval = evaluate(net, data.train, config.loss);
    metrics.train_accuracy = train_eval.accuracy;
    if (data.val.size() > 0) {
        const EvalResult val_eval = evaluate(net, data.val, config.loss);
        metrics.val_loss = val_eval.mean_loss;
        metrics.val_accuracy = val_eval.accuracy;
        metrics.f1 = val_eval.f1;
    }
    return metrics;
}

// Batches of K images for each of up to P identities; every anchor is paired
// with its hardest in-batch positive and negative.
EpochMetrics train_epoch_triplet(NetworkGraph& net, const TrainValSplit& data,
                                 const TrainConfig& config, AdamState& adam, int epoch_index) {
    const int num_classes = dataset_num_classes(data.train);
    if (num_classes < 2) fail("train_epoch: triplet training needs >= 2 identities");

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < data.train.size(); ++i) {
        by_class[static_cast<std::size_t>(data.train.labels[i])].push_back(i);
    }
    std::size_t min_class = data.train.size();
    for (const auto& group : by_class) {
        if (group.empty()) fail("train_epoch: identity without images");
        min_class = std::min(min_class, group.size());
    }

    Rng rng(config.seed + 0x9E3779B9u * static_cast<std::uint32_t>(epoch_index + 1));
    for (auto& group : by_class) {
        const std::vector<std::size_t> order = shuffled_indices(group.size(), rng);
        std::vector<std::size_t> shuffled(group.size());
        for (std::size_t i = 0; i < group.size(); ++i) shuffled[i] = group[order[i]];
        group = std::move(shuffled);
    }

    const int images_per_class =
        std::max(2, std::min<int>(4, static_cast<int>(min_class)));
    const int classes_per_batch =
        std::max(2, std::min(num_classes, config.batch_size / images_per_class));
    const int rounds = std::max<int>(1, static_cast<int>(min_class) / images_per_class);

    net.mode = Mode::train;
    double loss_sum = 0.0;
    std::size_t anchor_count = 0;

    for (int round = 0; round < rounds; ++round) {
        // fresh class ordering per round so chunk pairings vary
        const std::vector<std::size_t> class_order =
            shuffled_indices(static_cast<std::size_t>(num_classes), rng);
        for (int first = 0; first < num_classes; first += classes_per_batch) {
            std::vector<int> batch_classes;
            for (int k = first; k < std::min(num_classes, first + classes_per_batch); ++k) {
                batch_classes.push_back(static_cast<int>(class_order[static_cast<std::size_t>(k)]));
            }
            if (batch_classes.size() == 1) {
                // borrow a partner so the trailing chunk still forms triplets
                batch_classes.push_back(static_cast<int>(
                    class_order[static_cast<std::size_t>((first + num_classes - 1) % num_classes)]));
            }

            std::vector<std::size_t> batch;
            std::vector<int> batch_labels;
            for (int c : batch_classes) {
                const auto& group = by_class[static_cast<std::size_t>(c)];
                for (int j = 0; j < images_per_class; ++j) {
                    batch.push_back(group[(static_cast<std::size_t>(round) * images_per_class + j) %
                                          group.size()]);
                    batch_labels.push_back(c);
                }
            }

            std::vector<TrainForwardResult> fwd;
            fwd.reserve(batch.size());
            for (std::size_t idx : batch) {
                fwd.push_back(forward_train(net, data.train.images[idx], rng));
            }

            const std::size_t n = batch.size();
            std::vector<double> dist2(n * n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) {
                    double d = 0.0;
                    const Tensor& a = fwd[i].output;
                    const Tensor& b = fwd[j].output;
                    for (std::size_t t = 0; t < a.size(); ++t) {
                        const double diff = static_cast<double>(a[t]) - b[t];
                        d += diff * diff;
                    }
                    dist2[i * n + j] = d;
                    dist2[j * n + i] = d;
                }
            }

            std::vector<Tensor> emb_grads(n);
            std::size_t batch_anchors = 0;
            for (std::size_t i = 0; i < n; ++i) {
                std::ptrdiff_t hardest_pos = -1;
                std::ptrdiff_t hardest_neg = -1;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i) continue;
                    if (batch_labels[j] == batch_labels[i]) {
                        if (hardest_pos < 0 ||
                            dist2[i * n + j] > dist2[i * n + static_cast<std::size_t>(hardest_pos)]) {
                            hardest_pos = static_cast<std::ptrdiff_t>(j);
                        }
                    } else {
                        if (hardest_neg < 0 ||
                            dist2[i * n + j] < dist2[i * n + static_cast<std::size_t>(hardest_neg)]) {
                            hardest_neg = static_cast<std::ptrdiff_t>(j);
                        }
                    }
                }
                if (hardest_pos < 0 || hardest_neg < 0) continue;
                TripletResult trip =
                    triplet_loss(fwd[i].output, fwd[static_cast<std::size_t>(hardest_pos)].output,
                                 fwd[static_cast<std::size_t>(hardest_neg)].output,
                                 config.triplet_margin);
                loss_sum += trip.loss;
                ++batch_anchors;
                ++anchor_count;
                if (trip.loss == 0.0) continue;
                auto add_into = [](Tensor& dst, const Tensor& src) {
                    if (dst.empty()) {
                        dst = src;
                    } else {
                        for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += src[t];
                    }
                };
                add_into(emb_grads[i], trip.grad_anchor);
                add_into(emb_grads[static_cast<std::size_t>(hardest_pos)], trip.grad_positive);
                add_into(emb_grads[static_cast<std::size_t>(hardest_neg)], trip.grad_negative);
            }
            if (batch_anchors == 0) continue;

            std::vector<LayerParams> batch_grads;
            for (std::size_t i = 0; i < n; ++i) {
                if (emb_grads[i].empty()) continue;
                BackwardResult bwd = network_backward(net, fwd[i].cache, emb_grads[i]);
                accumulate_grads(batch_grads, bwd.param_grads);
            }
            if (batch_grads.empty()) continue;  // every triplet already satisfied
            scale_grads(batch_grads, 1.0f / static_cast<float>(batch_anchors), net);
            adam_step(adam, net.params, batch_grads);
        }
    }
    net.mode = Mode::eval;

    EpochMetrics metrics;
    metrics.epoch = epoch_index;
    metrics.train_loss =
        anchor_count > 0 ? loss_sum / static_cast<double>(anchor_count) : 0.0;
    const EvalResult train_eval =
        evaluate_embedder(net, data.train, data.train, config.triplet_margin, true);
    metrics.train_accuracy = train_eval.accuracy;
    if (data.val.size() > 0) {
        const EvalResult val_eval =
            evaluate_embedder(net, data.train, data.val, config.triplet_margin);
        metrics.val_loss = val_eval.mean_loss;
        metrics.val_accuracy = val_eval.accuracy;
        metrics.f1 = val_eval.f1;
    }
    return metrics;
}

}  // namespace

EpochMetrics train_epoch(NetworkGraph& net, const TrainValSplit& data, const TrainConfig& config,
                         AdamState& adam, int epoch_index) {
    if (data.train.size() == 0) fail("train_epoch: empty training set");
    if (config.batch_size < 1) fail("train_epoch: batch size must be >= 1");
    check_head_loss_pairing(net, config.loss);
    adam.learning_rate = config.learning_rate;
    if (config.loss == LossKind::triplet) {
        return train_epoch_triplet(net, data, config, adam, epoch_index);
    }
    return train_epoch_classifier(net, data, config, adam, epoch_index);
}

EvalResult evaluate(const NetworkGraph& net, const LabeledDataset& dataset, LossKind loss) {
    if (dataset.size() == 0) fail("evaluate: empty dataset");
    if (loss == LossKind::triplet) fail("evaluate: use evaluate_embedder for triplet nets");

    const int num_classes = dataset_num_classes(dataset);
    std::vector<int> predictions(dataset.size());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Tensor probs = forward_eval(net, dataset.images[i]);
        predictions[i] = argmax_index(probs);
        loss_sum += per_example_loss(probs, dataset.labels[i], loss);
        if (predictions[i] == dataset.labels[i]) ++correct;
    }

    EvalResult result;
    result.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    result.f1 = f1_score(predictions, dataset.labels, num_classes);
    result.mean_loss = loss_sum / static_cast<double>(dataset.size());
    return result;
}

EvalResult evaluate_embedder(const NetworkGraph& net, const LabeledDataset& reference,
                             const LabeledDataset& probes, double margin, bool exclude_self) {
    if (reference.size() == 0 || probes.size() == 0) fail("evaluate_embedder: empty dataset");
    if (exclude_self && reference.size() != probes.size()) {
        fail("evaluate_embedder: exclude_self requires probes to be the reference set");
    }

    std::vector<Tensor> ref_emb(reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i) {
        ref_emb[i] = forward_eval(net, reference.images[i]);
    }
    std::vector<Tensor> probe_emb(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
        probe_emb[i] = forward_eval(net, probes.images[i]);
    }

    auto sq_dist = [](const Tensor& a, const Tensor& b) {
        double d = 0.0;
        for (std::size_t t = 0; t < a.size(); ++t) {
            const double diff = static_cast<double>(a[t]) - b[t];
            d += diff * diff;
        }
        return d;
    };

    std::vector<int> predictions(probes.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        std::ptrdiff_t best = -1;
        double best_d = 0.0;
        for (std::size_t j = 0; j < reference.size(); ++j) {
            if (exclude_self && j == i) continue;
            const double d = sq_dist(probe_emb[i], ref_emb[j]);
            if (best < 0 || d < best_d) {
                best_d = d;
                best = static_cast<std::ptrdiff_t>(j);
            }
        }
        if (best < 0) fail("evaluate_embedder: no reference left to match against");
        predictions[i] = reference.labels[static_cast<std::size_t>(best)];
        if (predictions[i] == probes.labels[i]) ++correct;
    }

    // batch-hard triplet loss over the probe set itself
    double loss_sum = 0.0;
    std::size_t anchors = 0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        double hardest_pos = -1.0;
        double hardest_neg = -1.0;
        for (std::size_t j = 0; j < probes.size(); ++j) {
            if (j == i) continue;
            const double d = sq_dist(probe_emb[i], probe_emb[j]);
            if (probes.labels[j] == probes.labels[i]) {
                hardest_pos = std::max(hardest_pos, d);
            } else if (hardest_neg < 0.0 || d < hardest_neg) {
                hardest_neg = d;
            }
        }
        if (hardest_pos < 0.0 || hardest_neg < 0.0) continue;
        loss_sum += std::max(0.0, hardest_pos - hardest_neg + margin);
        ++anchors;
    }

    EvalResult result;
    result.accuracy = static_cast<double>(correct) / static_cast<double>(probes.size());
    result.f1 = f1_score(predictions, probes.labels, dataset_num_classes(probes));
    result.mean_loss = anchors > 0 ? loss_sum / static_cast<double>(anchors) : 0.0;
    return result;
}

std::string metrics_header_line() {
    return "epoch\ttrain_loss\tval_loss\ttrain_acc\tval_acc\tf1";
}

std::string metrics_line(const EpochMetrics& m) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%d\t%.8e\t%.8e\t%.8e\t%.8e\t%.8e", m.epoch, m.train_loss,
                  m.val_loss, m.train_accuracy, m.val_accuracy, m.f1);
    return std::string(buf);
}

void write_metrics_file(const std::string& path, const std::vector<EpochMetrics>& metrics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("write_metrics_file: cannot open " + path);
    for (const auto& m : metrics) {
        out << metrics_line(m) << "\n";
    }
}

TrainValSplit split_dataset(const LabeledDataset& data, double val_fraction, std::uint32_t seed) {
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
        fail("split_dataset: val_fraction must be in [0,1)");
    }
    if (data.images.empty()) fail("split_dataset: empty dataset");
    const int num_classes = dataset_num_classes(data);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }
    Rng rng(seed);
    TrainValSplit split;
    split.train.label_names = data.label_names;
    split.val.label_names = data.label_names;
    for (auto& members : by_class) {
        if (members.empty()) continue;
        const std::vector<std::size_t> order = shuffled_indices(members.size(), rng);
        std::size_t val_count =
            static_cast<std::size_t>(val_fraction * static_cast<double>(members.size()));
        if (val_count >= members.size()) val_count = members.size() - 1;
        for (std::size_t k = 0; k < members.size(); ++k) {
            const std::size_t idx = members[order[k]];
            LabeledDataset& side = k < val_count ? split.val : split.train;
            side.images.push_back(data.images[idx]);
            side.labels.push_back(data.labels[idx]);
        }
    }
    return split;
}

}  // namespace ipost
