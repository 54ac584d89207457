#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "ipost/recognizers.hpp"

using namespace ipost;

namespace {

// identity mapping onto the unit circle: embedding = input / |input|
NetworkGraph unit_embedder() {
    NetworkGraph net = assemble_network({dense_layer(2, 2), l2norm_layer()}, Shape({2}));
    net.params[0].weights = Tensor(Shape({2, 2}), {1.0f, 0.0f, 0.0f, 1.0f});
    return net;
}

NetworkGraph softmax_classifier() {
    NetworkGraph net = assemble_network({dense_layer(3, 3), softmax_layer()}, Shape({3}));
    net.params[0].weights =
        Tensor(Shape({3, 3}), {1, 0, 0, 0, 1, 0, 0, 0, 1});
    return net;
}

}  // namespace

TEST_CASE("embed_face produces unit-norm embeddings and validates inputs") {
    const NetworkGraph net = unit_embedder();
    const Tensor e = embed_face(net, Tensor(Shape({2}), {3.0f, 4.0f}));
    CHECK(e.at(0) == doctest::Approx(0.6f));
    CHECK(e.at(1) == doctest::Approx(0.8f));
    CHECK(std::sqrt(e.at(0) * e.at(0) + e.at(1) * e.at(1)) == doctest::Approx(1.0f));

    CHECK_THROWS(embed_face(net, Tensor::zeros(Shape({3}))));  // wrong input shape
    const NetworkGraph classifier = softmax_classifier();
    CHECK_THROWS(embed_face(classifier, Tensor::zeros(Shape({3}))));  // wrong head

    NetworkGraph training = unit_embedder();
    training.mode = Mode::train;
    CHECK_THROWS(embed_face(training, Tensor::zeros(Shape({2}))));
}

TEST_CASE("enroll appends embeddings and validates labels") {
    const NetworkGraph net = unit_embedder();
    EmbeddingGallery gallery;
    enroll(gallery, "alice", {Tensor(Shape({2}), {1.0f, 0.0f})}, net);
    CHECK(gallery.identity_count() == 1);
    CHECK(gallery.embedding_count() == 1);
    enroll(gallery, "alice", {Tensor(Shape({2}), {0.9f, 0.1f})}, net);
    CHECK(gallery.identity_count() == 1);
    CHECK(gallery.embedding_count() == 2);  // appended, not replaced
    CHECK(gallery.embedding_dim() == 2);

    CHECK_THROWS(enroll(gallery, "", {Tensor(Shape({2}), {1.0f, 0.0f})}, net));
    CHECK_THROWS(enroll(gallery, "with space", {Tensor(Shape({2}), {1.0f, 0.0f})}, net));
    CHECK_THROWS(enroll(gallery, "tab\tbed", {Tensor(Shape({2}), {1.0f, 0.0f})}, net));
    CHECK_THROWS(enroll(gallery, "bob", {}, net));
}

TEST_CASE("match_face nearest neighbor, threshold, and tie-break") {
    const NetworkGraph net = unit_embedder();
    EmbeddingGallery gallery;
    gallery.accept_threshold = 0.6f;
    enroll(gallery, "alice", {Tensor(Shape({2}), {1.0f, 0.0f})}, net);
    enroll(gallery, "bob", {Tensor(Shape({2}), {0.0f, 1.0f})}, net);

    const MatchResult near_alice = match_face(gallery, Tensor(Shape({2}), {0.99f, 0.141f}));
    CHECK(near_alice.decision == MatchDecision::accepted);
    CHECK(near_alice.identity == "alice");
    CHECK(near_alice.best_distance < 0.2);
    CHECK(near_alice.similarity_index == doctest::Approx(1.0 / (1.0 + near_alice.best_distance)));

    // equidistant from both enrolled points (distance 2*sin(pi/8) ~ 0.765,
    // so the threshold must sit above that): lexicographically lower identity
    gallery.accept_threshold = 0.8f;
    const float mid = static_cast<float>(1.0 / std::sqrt(2.0));
    const MatchResult tie = match_face(gallery, Tensor(Shape({2}), {mid, mid}));
    CHECK(tie.decision == MatchDecision::accepted);
    CHECK(tie.identity == "alice");

    // far from both: rejected but distance still reported
    const MatchResult far = match_face(gallery, Tensor(Shape({2}), {-1.0f, 0.0f}));
    CHECK(far.decision == MatchDecision::unknown);
    CHECK(far.identity.empty());
    CHECK(far.best_distance == doctest::Approx(std::sqrt(2.0)));

    // exactly at the threshold counts as accepted
    EmbeddingGallery exact;
    exact.accept_threshold = 1.0f;
    enroll(exact, "carol", {Tensor(Shape({2}), {1.0f, 0.0f})}, net);
    const MatchResult at_threshold = match_face(exact, Tensor(Shape({2}), {0.0f, 0.0f}));
    CHECK(at_threshold.best_distance == doctest::Approx(1.0));
    CHECK(at_threshold.decision == MatchDecision::accepted);

    CHECK_THROWS(match_face(gallery, Tensor::zeros(Shape({3}))));  // dimension mismatch
}

TEST_CASE("match_face on an empty gallery is unknown with infinite distance") {
    const EmbeddingGallery gallery;
    const MatchResult r = match_face(gallery, Tensor(Shape({2}), {1.0f, 0.0f}));
    CHECK(r.decision == MatchDecision::unknown);
    CHECK(std::isinf(r.best_distance));
    CHECK(r.similarity_index == 0.0);
}

TEST_CASE("classify_item argmax, distribution, and tie-break") {
    const NetworkGraph net = softmax_classifier();
    const ItemPrediction p = classify_item(net, Tensor(Shape({3}), {0.0f, 5.0f, 0.0f}));
    CHECK(p.label == 1);
    CHECK(p.probability > 0.9);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.distribution.size(); ++i) sum += p.distribution[i];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

    // identical logits: exact tie resolves to the lowest index
    const ItemPrediction tie = classify_item(net, Tensor(Shape({3}), {2.0f, 2.0f, 2.0f}));
    CHECK(tie.label == 0);
    CHECK(tie.probability == doctest::Approx(1.0 / 3.0));

    const NetworkGraph embedder = unit_embedder();
    CHECK_THROWS(classify_item(embedder, Tensor::zeros(Shape({2}))));  // wrong head
    CHECK_THROWS(classify_item(net, Tensor::zeros(Shape({4}))));       // wrong shape
}

TEST_CASE("similarity index is monotone decreasing from one") {
    CHECK(similarity_index(0.0) == 1.0);
    CHECK(similarity_index(1.0) == 0.5);
    CHECK(similarity_index(3.0) == 0.25);
    CHECK(similarity_index(0.5) > similarity_index(0.6));
    CHECK_THROWS(similarity_index(-0.1));
}
