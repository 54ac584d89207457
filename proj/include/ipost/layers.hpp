#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipost/rng.hpp"
#include "ipost/tensor.hpp"

namespace ipost {

enum class LayerKind { conv, maxpool, relu, flatten, dense, dropout, softmax, l2norm };

const char* kind_name(LayerKind kind);
std::optional<LayerKind> kind_from_name(const std::string& name);

enum class Mode { train, eval };

// One layer of the network. Only the fields for the given kind are meaningful.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    ConvSpec conv;                          // conv
    int pool_window = 0;                    // maxpool
    int pool_stride = 0;                    // maxpool
    int dense_in = 0;                       // dense
    int dense_out = 0;                      // dense
    float dropout_rate = 0.0f;              // dropout
};

LayerSpec conv_layer(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride);
LayerSpec maxpool_layer(int window, int stride);
LayerSpec relu_layer();
LayerSpec flatten_layer();
LayerSpec dense_layer(int in, int out);
LayerSpec dropout_layer(float rate);
LayerSpec softmax_layer();
LayerSpec l2norm_layer();

// Weights and bias for one layer; both empty for parameter-free kinds.
struct LayerParams {
    Tensor weights;
    Tensor bias;
};

// Saved state from one layer's forward pass, enough to run its backward pass.
struct CacheEntry {
    Tensor input;
    Tensor output;                   // kept for softmax / l2norm
    Tensor mask;                     // dropout keep mask, already scaled
    std::vector<std::size_t> argmax; // maxpool winner indices
};

struct ForwardCache {
    std::vector<CacheEntry> entries;  // one per layer, in forward order
};

// Feed-forward network: ordered layers plus their parameters.
struct NetworkGraph {
    std::vector<LayerSpec> layers;
    std::vector<LayerParams> params;  // parallel to layers
    Shape input_shape;
    Mode mode = Mode::eval;

    std::size_t parameter_count() const;
};

// Shape a layer produces for the given input shape; throws on incompatibility.
Shape infer_output_shape(const LayerSpec& spec, const Shape& input_shape);

// Validates layer-to-layer shape compatibility and allocates zeroed parameters.
NetworkGraph assemble_network(std::vector<LayerSpec> layers, const Shape& input_shape);

// Numerically stable softmax over a rank-1 tensor (max subtraction).
Tensor softmax(const Tensor& logits);

struct DropoutResult {
    Tensor output;
    Tensor mask;
};

// Inverted dropout: kept elements are scaled by 1/(1-rate) in train mode;
// eval mode is the identity with an all-ones mask.
DropoutResult dropout_forward(const Tensor& input, float rate, std::uint32_t seed, Mode mode);

struct LayerForwardResult {
    Tensor output;
    CacheEntry cache;
};

struct LayerBackwardResult {
    Tensor grad_input;
    LayerParams grads;
};

LayerForwardResult layer_forward(const LayerSpec& spec, const LayerParams& params,
                                 const Tensor& input, Mode mode, std::uint32_t seed);

LayerBackwardResult layer_backward(const LayerSpec& spec, const LayerParams& params,
                                   const CacheEntry& cache, const Tensor& grad_out);

// Deterministic, dropout-free evaluation pass.
Tensor forward_eval(const NetworkGraph& net, const Tensor& input);

struct TrainForwardResult {
    Tensor output;
    ForwardCache cache;
};

TrainForwardResult forward_train(const NetworkGraph& net, const Tensor& input, Rng& rng);

struct BackwardResult {
    Tensor grad_input;
    std::vector<LayerParams> param_grads;  // parallel to net.layers
};

BackwardResult network_backward(const NetworkGraph& net, const ForwardCache& cache,
                                const Tensor& grad_out);

// Hyperparameters of the canonical stack; the defaults are the ones used
// throughout training and the CLI.
struct CnnOptions {
    std::vector<int> filters = {8, 16, 32};
    int kernel = 3;
    int pool_window = 2;
    int pool_stride = 2;
    int dense_width = 64;
    float dropout_rate = 0.5f;
};

// The canonical item/face network: [conv, relu, maxpool] x 3, flatten,
// dropout, dense(dense_width), relu, then either dense(num_classes)+softmax
// (classifier) or dense(embedding_dim)+l2norm (embedder).
NetworkGraph build_ipost_cnn(const Shape& input_shape, int num_classes,
                             std::optional<int> embedding_dim = std::nullopt,
                             const CnnOptions& options = CnnOptions{},
                             std::uint32_t init_seed = 0);

}  // namespace ipost
