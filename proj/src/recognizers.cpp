#include "ipost/recognizers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ipost {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument(msg);
}

void require_eval(const NetworkGraph& net, const char* what) {
    if (net.mode != Mode::eval) {
        fail(std::string(what) + ": network must be in eval mode");
    }
}

}  // namespace

std::size_t EmbeddingGallery::embedding_count() const {
    std::size_t n = 0;
    for (const auto& [identity, embeddings] : entries) n += embeddings.size();
    return n;
}

int EmbeddingGallery::embedding_dim() const {
    for (const auto& [identity, embeddings] : entries) {
        if (!embeddings.empty()) return embeddings.front().shape().extent(0);
    }
    return 0;
}

Tensor embed_face(const NetworkGraph& net, const Tensor& image) {
    require_eval(net, "embed_face");
    if (net.layers.empty() || net.layers.back().kind != LayerKind::l2norm) {
        fail("embed_face: network does not end in an embedding (l2norm) head");
    }
    if (image.shape() != net.input_shape) {
        fail("embed_face: image shape " + image.shape().to_string() +
             " does not match network input " + net.input_shape.to_string());
    }
    return forward_eval(net, image);
}

void enroll(EmbeddingGallery& gallery, const std::string& identity,
            const std::vector<Tensor>& images, const NetworkGraph& net) {
    if (identity.empty()) fail("enroll: identity label must be nonempty");
    for (char c : identity) {
        if (c == '\t' || c == '\n' || c == '\r' || c == ' ') {
            fail("enroll: identity label must not contain whitespace");
        }
    }
    if (images.empty()) fail("enroll: at least one image required");
    auto& list = gallery.entries[identity];
    for (const auto& image : images) {
        list.push_back(embed_face(net, image));
    }
}

MatchResult match_face(const EmbeddingGallery& gallery, const Tensor& probe) {
    MatchResult result;
    if (gallery.entries.empty()) {
        result.decision = MatchDecision::unknown;
        result.best_distance = std::numeric_limits<double>::infinity();
        result.similarity_index = 0.0;
        return result;
    }
    if (probe.shape().rank() != 1 || probe.shape().extent(0) != gallery.embedding_dim()) {
        fail("match_face: probe shape " + probe.shape().to_string() +
             " does not match gallery dimension " + std::to_string(gallery.embedding_dim()));
    }

    double best = std::numeric_limits<double>::infinity();
    std::string best_identity;
    for (const auto& [identity, embeddings] : gallery.entries) {  // std::map: lexicographic order
        for (const auto& stored : embeddings) {
            double sq = 0.0;
            for (std::size_t i = 0; i < probe.size(); ++i) {
                const double d = static_cast<double>(probe[i]) - stored[i];
                sq += d * d;
            }
            const double dist = std::sqrt(sq);
            if (dist < best) {  // strict: earlier (lower) identity wins exact ties
                best = dist;
                best_identity = identity;
            }
        }
    }

    result.best_distance = best;
    result.similarity_index = similarity_index(best);
    if (best <= gallery.accept_threshold) {
        result.decision = MatchDecision::accepted;
        result.identity = best_identity;
    }
    return result;
}

ItemPrediction classify_item(const NetworkGraph& net, const Tensor& image) {
    require_eval(net, "classify_item");
    if (net.layers.empty() || net.layers.back().kind != LayerKind::softmax) {
        fail("classify_item: network does not end in a softmax head");
    }
    if (image.shape() != net.input_shape) {
        fail("classify_item: image shape " + image.shape().to_string() +
             " does not match network input " + net.input_shape.to_string());
    }

    ItemPrediction prediction;
    prediction.distribution = forward_eval(net, image);
    for (std::size_t i = 1; i < prediction.distribution.size(); ++i) {
        if (prediction.distribution[i] >
            prediction.distribution[static_cast<std::size_t>(prediction.label)]) {
            prediction.label = static_cast<int>(i);  // strict: first index wins exact ties
        }
    }
    prediction.probability = prediction.distribution[static_cast<std::size_t>(prediction.label)];
    return prediction;
}

double similarity_index(double distance) {
    if (distance < 0.0) fail("similarity_index: negative distance");
    return 1.0 / (1.0 + distance);
}

}  // namespace ipost
