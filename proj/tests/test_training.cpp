#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "fd_check.hpp"
#include "ipost/dataset.hpp"
#include "ipost/training.hpp"

using namespace ipost;
using fdcheck::central_diff;

namespace {

CnnOptions tiny_options() {
    CnnOptions options;
    options.filters = {2, 3, 4};
    options.kernel = 2;
    options.pool_window = 2;
    options.pool_stride = 1;
    options.dense_width = 8;
    options.dropout_rate = 0.0f;
    return options;
}

SyntheticDatasetSpec tiny_items(int samples, std::uint32_t seed) {
    SyntheticDatasetSpec spec = make_items_spec({"cross", "disc"});
    spec.image_size = 12;
    spec.samples_per_class = samples;
    spec.noise = 0.15f;
    spec.seed = seed;
    return spec;
}

bool params_equal(const NetworkGraph& a, const NetworkGraph& b) {
    for (std::size_t layer = 0; layer < a.params.size(); ++layer) {
        for (std::size_t i = 0; i < a.params[layer].weights.size(); ++i) {
            if (a.params[layer].weights[i] != b.params[layer].weights[i]) return false;
        }
        for (std::size_t i = 0; i < a.params[layer].bias.size(); ++i) {
            if (a.params[layer].bias[i] != b.params[layer].bias[i]) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("bce value oracle and clamp") {
    CHECK(bce_loss(0.5, 1).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss(0.5, 0).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss(0.999999, 1).loss == doctest::Approx(1e-6).epsilon(1e-2));
    // clamped at 1e-7 instead of log(0)
    CHECK(bce_loss(0.0, 1).loss == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
    CHECK(std::isfinite(bce_loss(1.0, 0).loss));
    CHECK_THROWS(bce_loss(0.5, 2));
    // a poisoned probability propagates instead of being masked by the clamp
    CHECK(std::isnan(bce_loss(std::numeric_limits<double>::quiet_NaN(), 0).loss));
}

TEST_CASE("bce gradient matches central differences on 500 draws") {
    Rng rng(201);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const double p = 0.02 + 0.96 * rng.uniform_double();
        const int label = rng.bernoulli(0.5) ? 1 : 0;
        const BceResult r = bce_loss(p, label);
        const double eps = 1e-4;
        const double numeric = (bce_loss(p + eps, label).loss - bce_loss(p - eps, label).loss) /
                               (2.0 * eps);
        worst = std::max(worst, std::fabs(numeric - r.dloss_dp) /
                                    std::max(1.0, std::fabs(r.dloss_dp)));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("cce value and gradient") {
    const Tensor uniform(Shape({4}), {0.25f, 0.25f, 0.25f, 0.25f});
    CHECK(cce_loss(uniform, 2).loss == doctest::Approx(std::log(4.0)).epsilon(1e-6));
    const Tensor hot(Shape({3}), {0.0f, 1.0f, 0.0f});
    CHECK(cce_loss(hot, 1).loss == doctest::Approx(0.0).epsilon(1e-6));
    CHECK_THROWS(cce_loss(uniform, 4));
    CHECK_THROWS(cce_loss(uniform, -1));

    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        Tensor probs = softmax(fdcheck::random_tensor(Shape({5}), rng, -2.0f, 2.0f));
        const int label = static_cast<int>(rng.uniform_int(5));
        const CceResult r = cce_loss(probs, label);
        for (int i = 0; i < 5; ++i) {
            const double numeric = central_diff(probs[static_cast<std::size_t>(i)], 1e-4, [&]() {
                return cce_loss(probs, label).loss;
            });
            worst = std::max(worst,
                             std::fabs(numeric - r.dloss_dprobs[static_cast<std::size_t>(i)]) /
                                 std::max(1.0, std::fabs(numeric)));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("triplet hand oracle, nonnegativity, and inactive region") {
    const Tensor a(Shape({2}), {0.0f, 0.0f});
    const Tensor p(Shape({2}), {0.0f, 1.0f});
    const Tensor n(Shape({2}), {1.0f, 0.0f});
    const TripletResult r = triplet_loss(a, p, n, 0.2);
    CHECK(r.loss == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(r.grad_anchor.at(0) == doctest::Approx(2.0f));
    CHECK(r.grad_anchor.at(1) == doctest::Approx(-2.0f));
    CHECK(r.grad_positive.at(0) == doctest::Approx(0.0f));
    CHECK(r.grad_positive.at(1) == doctest::Approx(2.0f));
    CHECK(r.grad_negative.at(0) == doctest::Approx(-2.0f));
    CHECK(r.grad_negative.at(1) == doctest::Approx(0.0f));

    // far negative: loss 0 and exactly zero gradients
    const Tensor far(Shape({2}), {10.0f, 10.0f});
    const TripletResult inactive = triplet_loss(a, p, far, 0.2);
    CHECK(inactive.loss == 0.0);
    for (int i = 0; i < 2; ++i) {
        CHECK(inactive.grad_anchor.at(i) == 0.0f);
        CHECK(inactive.grad_positive.at(i) == 0.0f);
        CHECK(inactive.grad_negative.at(i) == 0.0f);
    }

    Rng rng(203);
    for (int trial = 0; trial < 100; ++trial) {
        const TripletResult any = triplet_loss(fdcheck::random_tensor(Shape({4}), rng),
                                               fdcheck::random_tensor(Shape({4}), rng),
                                               fdcheck::random_tensor(Shape({4}), rng), 0.2);
        CHECK(any.loss >= 0.0);
    }
}

TEST_CASE("triplet gradients match central differences on 500 draws") {
    Rng rng(204);
    double worst = 0.0;
    int checked = 0;
    while (checked < 500) {
        Tensor a = fdcheck::random_tensor(Shape({3}), rng);
        Tensor p = fdcheck::random_tensor(Shape({3}), rng);
        Tensor n = fdcheck::random_tensor(Shape({3}), rng);
        const TripletResult r = triplet_loss(a, p, n, 0.2);
        // stay away from the hinge kink where FD straddles both branches
        double d_ap = 0.0;
        double d_an = 0.0;
        for (int i = 0; i < 3; ++i) {
            d_ap += (a.at(i) - p.at(i)) * (a.at(i) - p.at(i));
            d_an += (a.at(i) - n.at(i)) * (a.at(i) - n.at(i));
        }
        if (std::fabs(d_ap - d_an + 0.2) < 1e-2) continue;
        ++checked;
        const auto objective = [&]() { return triplet_loss(a, p, n, 0.2).loss; };
        for (int i = 0; i < 3; ++i) {
            const double ga = central_diff(a[static_cast<std::size_t>(i)], 1e-4, objective);
            const double gp = central_diff(p[static_cast<std::size_t>(i)], 1e-4, objective);
            const double gn = central_diff(n[static_cast<std::size_t>(i)], 1e-4, objective);
            worst = std::max(worst, std::fabs(ga - r.grad_anchor.at(i)) / std::max(1.0, std::fabs(ga)));
            worst = std::max(worst, std::fabs(gp - r.grad_positive.at(i)) / std::max(1.0, std::fabs(gp)));
            worst = std::max(worst, std::fabs(gn - r.grad_negative.at(i)) / std::max(1.0, std::fabs(gn)));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("adam zero gradient is a parameter fixed point") {
    NetworkGraph net = build_ipost_cnn(Shape({1, 12, 12}), 2, std::nullopt, tiny_options(), 1);
    const NetworkGraph before = net;
    AdamState adam = make_adam_state(net);
    std::vector<LayerParams> zero_grads;
    for (const auto& p : net.params) {
        LayerParams g;
        if (!p.weights.empty()) {
            g.weights = Tensor::zeros(p.weights.shape());
            g.bias = Tensor::zeros(p.bias.shape());
        }
        zero_grads.push_back(std::move(g));
    }
    for (int step = 0; step < 5; ++step) adam_step(adam, net.params, zero_grads);
    CHECK(adam.step == 5);
    CHECK(params_equal(net, before));
}

TEST_CASE("adam first step magnitude is about the learning rate") {
    // single scalar parameter wrapped in a 1x1 dense layer
    NetworkGraph net = assemble_network({dense_layer(1, 1)}, Shape({1}));
    net.params[0].weights[0] = 0.7f;
    AdamState adam = make_adam_state(net, 0.1);
    std::vector<LayerParams> grads(1);
    grads[0].weights = Tensor(Shape({1, 1}), {2.0f * 0.7f});
    grads[0].bias = Tensor::zeros(Shape({1}));
    adam_step(adam, net.params, grads);
    CHECK(std::fabs(0.7f - net.params[0].weights[0]) == doctest::Approx(0.1).epsilon(1e-4));
}

TEST_CASE("adam drives w^2 from 1.0 to under 0.05 in 200 steps at lr 0.1") {
    NetworkGraph net = assemble_network({dense_layer(1, 1)}, Shape({1}));
    net.params[0].weights[0] = 1.0f;
    AdamState adam = make_adam_state(net, 0.1);
    std::vector<LayerParams> grads(1);
    grads[0].weights = Tensor::zeros(Shape({1, 1}));
    grads[0].bias = Tensor::zeros(Shape({1}));
    for (int step = 0; step < 200; ++step) {
        grads[0].weights[0] = 2.0f * net.params[0].weights[0];
        adam_step(adam, net.params, grads);
    }
    CHECK(std::fabs(net.params[0].weights[0]) < 0.05f);
    CHECK(std::fabs(net.params[0].weights[0]) < 0.01f);  // reference run lands near 1e-5
}

TEST_CASE("adam rejects non-finite gradients") {
    NetworkGraph net = assemble_network({dense_layer(1, 1)}, Shape({1}));
    AdamState adam = make_adam_state(net);
    std::vector<LayerParams> grads(1);
    grads[0].weights = Tensor::zeros(Shape({1, 1}));
    grads[0].bias = Tensor::zeros(Shape({1}));
    grads[0].weights[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS(adam_step(adam, net.params, grads));
}

TEST_CASE("learning rate zero leaves parameters unchanged over an epoch") {
    const LabeledDataset data = generate_dataset_in_memory(tiny_items(6, 11));
    const TrainValSplit split = split_dataset(data, 0.25, 1);
    NetworkGraph net = build_ipost_cnn(Shape({1, 12, 12}), 2, std::nullopt, tiny_options(), 7);
    const NetworkGraph before = net;
    AdamState adam = make_adam_state(net, 0.0);
    TrainConfig config;
    config.seed = 3;
    config.learning_rate = 0.0;
    config.batch_size = 4;
    train_epoch(net, split, config, adam, 0);
    CHECK(params_equal(net, before));
}

TEST_CASE("training is reproducible and loss decreases on separable data") {
    const LabeledDataset data = generate_dataset_in_memory(tiny_items(12, 21));
    const TrainValSplit split = split_dataset(data, 0.25, 2);
    TrainConfig config;
    config.seed = 5;
    config.batch_size = 6;
    config.learning_rate = 1e-3;

    NetworkGraph net_a = build_ipost_cnn(Shape({1, 12, 12}), 2, std::nullopt, tiny_options(), 9);
    NetworkGraph net_b = build_ipost_cnn(Shape({1, 12, 12}), 2, std::nullopt, tiny_options(), 9);
    AdamState adam_a = make_adam_state(net_a, config.learning_rate);
    AdamState adam_b = make_adam_state(net_b, config.learning_rate);

    std::vector<EpochMetrics> history;
    for (int epoch = 0; epoch < 3; ++epoch) {
        const EpochMetrics ma = train_epoch(net_a, split, config, adam_a, epoch);
        const EpochMetrics mb = train_epoch(net_b, split, config, adam_b, epoch);
        CHECK(ma.train_loss == mb.train_loss);
        CHECK(ma.val_accuracy == mb.val_accuracy);
        history.push_back(ma);
    }
    CHECK(params_equal(net_a, net_b));  // bit-identical after three epochs
    CHECK(history[1].train_loss < history[0].train_loss);
    CHECK(history[2].train_loss < history[1].train_loss);
}

TEST_CASE("head and loss pairing is enforced") {
    const LabeledDataset data = generate_dataset_in_memory(tiny_items(3, 31));
    TrainValSplit split;
    split.train = data;
    NetworkGraph softmax_net =
        build_ipost_cnn(Shape({1, 12, 12}), 2, std::nullopt, tiny_options(), 1);
    NetworkGraph embed_net = build_ipost_cnn(Shape({1, 12, 12}), 0, 4, tiny_options(), 1);
    AdamState adam = make_adam_state(softmax_net);
    TrainConfig config;
    config.loss = LossKind::triplet;
    CHECK_THROWS(train_epoch(softmax_net, split, config, adam, 0));
    AdamState adam2 = make_adam_state(embed_net);
    TrainConfig config2;
    config2.loss = LossKind::categorical_cross_entropy;
    CHECK_THROWS(train_epoch(embed_net, split, config2, adam2, 0));

    // bce needs a two-way head
    NetworkGraph three_way =
        build_ipost_cnn(Shape({1, 12, 12}), 3, std::nullopt, tiny_options(), 1);
    AdamState adam3 = make_adam_state(three_way);
    TrainConfig config3;
    config3.loss = LossKind::binary_cross_entropy;
    CHECK_THROWS(train_epoch(three_way, split, config3, adam3, 0));
}

TEST_CASE("evaluate accuracy and f1 against controlled predictions") {
    // identity dense layer with softmax: the argmax is the hot input index
    NetworkGraph net = assemble_network({dense_layer(2, 2), softmax_layer()}, Shape({2}));
    net.params[0].weights = Tensor(Shape({2, 2}), {1.0f, 0.0f, 0.0f, 1.0f});

    const Tensor says0(Shape({2}), {1.0f, 0.0f});
    const Tensor says1(Shape({2}), {0.0f, 1.0f});

    LabeledDataset all_correct;
    all_correct.label_names = {"a", "b"};
    all_correct.images = {says0, says1};
    all_correct.labels = {0, 1};
    const EvalResult perfect = evaluate(net, all_correct);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f1 == 1.0);

    LabeledDataset all_wrong = all_correct;
    all_wrong.labels = {1, 0};
    const EvalResult zero = evaluate(net, all_wrong);
    CHECK(zero.accuracy == 0.0);
    CHECK(zero.f1 == 0.0);

    // TP=1, FP=1, FN=1 on the positive class -> F1 = 0.5
    LabeledDataset mixed;
    mixed.label_names = {"a", "b"};
    mixed.images = {says1, says1, says0};
    mixed.labels = {1, 0, 1};
    const EvalResult half = evaluate(net, mixed);
    CHECK(half.f1 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("evaluate_embedder excludes the probe itself when asked") {
    NetworkGraph net = assemble_network({dense_layer(2, 2), l2norm_layer()}, Shape({2}));
    net.params[0].weights = Tensor(Shape({2, 2}), {1.0f, 0.0f, 0.0f, 1.0f});
    LabeledDataset data;
    data.label_names = {"a", "b"};
    // two tight clusters on the unit circle
    data.images = {Tensor(Shape({2}), {1.0f, 0.05f}), Tensor(Shape({2}), {1.0f, -0.05f}),
                   Tensor(Shape({2}), {0.05f, 1.0f}), Tensor(Shape({2}), {-0.05f, 1.0f})};
    data.labels = {0, 0, 1, 1};
    const EvalResult honest = evaluate_embedder(net, data, data, 0.2, true);
    CHECK(honest.accuracy == 1.0);  // nearest non-self neighbor shares the identity
    const EvalResult trivial = evaluate_embedder(net, data, data, 0.2, false);
    CHECK(trivial.accuracy == 1.0);  // self-match, tells nothing
    CHECK_THROWS(evaluate_embedder(net, data, LabeledDataset{}, 0.2));
}

TEST_CASE("split_dataset stratifies and is seed stable") {
    const LabeledDataset data = generate_dataset_in_memory(tiny_items(10, 41));
    const TrainValSplit a = split_dataset(data, 0.2, 7);
    const TrainValSplit b = split_dataset(data, 0.2, 7);
    CHECK(a.train.size() == 16);
    CHECK(a.val.size() == 4);
    CHECK(a.train.labels == b.train.labels);
    int val_zero = 0;
    for (const int label : a.val.labels) {
        if (label == 0) ++val_zero;
    }
    CHECK(val_zero == 2);  // two of each class in val

    const TrainValSplit none = split_dataset(data, 0.0, 7);
    CHECK(none.train.size() == data.size());
    CHECK(none.val.size() == 0);
    CHECK_THROWS(split_dataset(data, 1.0, 7));
}

TEST_CASE("metrics line format is tab separated with fixed precision") {
    EpochMetrics m;
    m.epoch = 3;
    m.train_loss = 0.5;
    m.val_loss = 0.25;
    m.train_accuracy = 1.0;
    m.val_accuracy = 0.75;
    m.f1 = 0.8;
    CHECK(metrics_line(m) ==
          "3\t5.00000000e-01\t2.50000000e-01\t1.00000000e+00\t7.50000000e-01\t8.00000000e-01");
}
