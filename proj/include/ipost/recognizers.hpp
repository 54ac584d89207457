#pragma once

#include <map>
#include <string>
#include <vector>

#include "ipost/layers.hpp"
#include "ipost/tensor.hpp"

namespace ipost {

// Enrolled identities and their unit-norm embeddings, matched by minimum
// Euclidean distance over every stored embedding.
struct EmbeddingGallery {
    std::map<std::string, std::vector<Tensor>> entries;
    float accept_threshold = 0.6f;

    std::size_t identity_count() const { return entries.size(); }
    std::size_t embedding_count() const;
    int embedding_dim() const;  // 0 when empty
};

enum class MatchDecision { accepted, unknown };

struct MatchResult {
    MatchDecision decision = MatchDecision::unknown;
    std::string identity;       // set when accepted
    double best_distance = 0.0; // +inf sentinel for an empty gallery
    double similarity_index = 0.0;
};

struct ItemPrediction {
    int label = 0;
    std::string label_name;  // empty unless the caller maps it
    double probability = 0.0;
    Tensor distribution;
};

// Eval-mode forward through an embedding-head network; output is unit norm.
Tensor embed_face(const NetworkGraph& net, const Tensor& image);

// Appends one embedding per image under the identity; existing embeddings
// are never replaced.
void enroll(EmbeddingGallery& gallery, const std::string& identity,
            const std::vector<Tensor>& images, const NetworkGraph& net);

// Nearest-neighbor match over all stored embeddings; ties between identities
// at exactly equal distance resolve to the lexicographically lowest identity.
MatchResult match_face(const EmbeddingGallery& gallery, const Tensor& probe);

ItemPrediction classify_item(const NetworkGraph& net, const Tensor& image);

// 1/(1+distance): 1 at distance zero, strictly decreasing.
double similarity_index(double distance);

}  // namespace ipost
