#include "ipost/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace ipost {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument(msg);
}

}  // namespace

const char* kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::relu: return "relu";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::dropout: return "dropout";
        case LayerKind::softmax: return "softmax";
        case LayerKind::l2norm: return "l2norm";
    }
    return "?";
}

std::optional<LayerKind> kind_from_name(const std::string& name) {
    for (LayerKind k : {LayerKind::conv, LayerKind::maxpool, LayerKind::relu, LayerKind::flatten,
                        LayerKind::dense, LayerKind::dropout, LayerKind::softmax,
                        LayerKind::l2norm}) {
        if (name == kind_name(k)) return k;
    }
    return std::nullopt;
}

LayerSpec conv_layer(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride) {
    LayerSpec spec;
    spec.kind = LayerKind::conv;
    spec.conv = ConvSpec{in_channels, out_channels, kernel_h, kernel_w, stride};
    return spec;
}

LayerSpec maxpool_layer(int window, int stride) {
    LayerSpec spec;
    spec.kind = LayerKind::maxpool;
    spec.pool_window = window;
    spec.pool_stride = stride;
    return spec;
}

LayerSpec relu_layer() {
    LayerSpec spec;
    spec.kind = LayerKind::relu;
    return spec;
}

LayerSpec flatten_layer() {
    LayerSpec spec;
    spec.kind = LayerKind::flatten;
    return spec;
}

LayerSpec dense_layer(int in, int out) {
    LayerSpec spec;
    spec.kind = LayerKind::dense;
    spec.dense_in = in;
    spec.dense_out = out;
    return spec;
}

LayerSpec dropout_layer(float rate) {
    if (!(rate >= 0.0f && rate < 1.0f)) {
        fail("dropout: rate " + std::to_string(rate) + " outside [0,1)");
    }
    LayerSpec spec;
    spec.kind = LayerKind::dropout;
    spec.dropout_rate = rate;
    return spec;
}

LayerSpec softmax_layer() {
    LayerSpec spec;
    spec.kind = LayerKind::softmax;
    return spec;
}

LayerSpec l2norm_layer() {
    LayerSpec spec;
    spec.kind = LayerKind::l2norm;
    return spec;
}

std::size_t NetworkGraph::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.weights.size() + p.bias.size();
    return n;
}

Shape infer_output_shape(const LayerSpec& spec, const Shape& input_shape) {
    switch (spec.kind) {
        case LayerKind::conv: {
            if (input_shape.rank() != 3) {
                fail("conv layer expects rank-3 input, got " + input_shape.to_string());
            }
            if (input_shape.extent(0) != spec.conv.in_channels) {
                fail("conv layer expects " + std::to_string(spec.conv.in_channels) +
                     " input channels, got " + std::to_string(input_shape.extent(0)));
            }
            const int h = conv_output_extent(input_shape.extent(1), spec.conv.kernel_h, spec.conv.stride);
            const int w = conv_output_extent(input_shape.extent(2), spec.conv.kernel_w, spec.conv.stride);
            return Shape{spec.conv.out_channels, h, w};
        }
        case LayerKind::maxpool: {
            if (input_shape.rank() != 3) {
                fail("maxpool layer expects rank-3 input, got " + input_shape.to_string());
            }
            const int h = conv_output_extent(input_shape.extent(1), spec.pool_window, spec.pool_stride);
            const int w = conv_output_extent(input_shape.extent(2), spec.pool_window, spec.pool_stride);
            return Shape{input_shape.extent(0), h, w};
        }
        case LayerKind::relu:
        case LayerKind::dropout:
            return input_shape;
        case LayerKind::flatten:
            return Shape{static_cast<int>(input_shape.element_count())};
        case LayerKind::dense: {
            if (input_shape.rank() != 1 || input_shape.extent(0) != spec.dense_in) {
                fail("dense layer expects rank-1 input of extent " + std::to_string(spec.dense_in) +
                     ", got " + input_shape.to_string());
            }
            return Shape{spec.dense_out};
        }
        case LayerKind::softmax:
        case LayerKind::l2norm: {
            if (input_shape.rank() != 1) {
                fail(std::string(kind_name(spec.kind)) + " layer expects rank-1 input, got " +
                     input_shape.to_string());
            }
            return input_shape;
        }
    }
    fail("infer_output_shape: unknown layer kind");
}

NetworkGraph assemble_network(std::vector<LayerSpec> layers, const Shape& input_shape) {
    NetworkGraph net;
    net.input_shape = input_shape;
    net.layers = std::move(layers);
    net.params.resize(net.layers.size());

    Shape shape = input_shape;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& spec = net.layers[i];
        try {
            shape = infer_output_shape(spec, shape);
        } catch (const std::invalid_argument& e) {
            fail("layer " + std::to_string(i) + " (" + kind_name(spec.kind) + "): " + e.what());
        }
        if (spec.kind == LayerKind::conv) {
            net.params[i].weights = Tensor(Shape{spec.conv.out_channels, spec.conv.in_channels,
                                                 spec.conv.kernel_h, spec.conv.kernel_w});
            net.params[i].bias = Tensor(Shape{spec.conv.out_channels});
        } else if (spec.kind == LayerKind::dense) {
            net.params[i].weights = Tensor(Shape{spec.dense_in, spec.dense_out});
            net.params[i].bias = Tensor(Shape{spec.dense_out});
        }
    }
    return net;
}

Tensor softmax(const Tensor& logits) {
    if (logits.shape().rank() != 1) {
        fail("softmax: expected rank-1 tensor, got " + logits.shape().to_string());
    }
    if (logits.size() == 0) fail("softmax: empty input");
    if (!logits.all_finite()) fail("softmax: non-finite logits");

    float max_logit = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > max_logit) max_logit = logits[i];
    }
    std::vector<double> exps(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        exps[i] = std::exp(static_cast<double>(logits[i]) - max_logit);
        sum += exps[i];
    }
    Tensor out(logits.shape());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = static_cast<float>(exps[i] / sum);
    }
    return out;
}

DropoutResult dropout_forward(const Tensor& input, float rate, std::uint32_t seed, Mode mode) {
    if (!(rate >= 0.0f && rate < 1.0f)) {
        fail("dropout_forward: rate " + std::to_string(rate) + " outside [0,1)");
    }
    DropoutResult result;
    if (mode == Mode::eval || rate == 0.0f) {
        result.output = input;
        result.mask = Tensor::full(input.shape(), 1.0f);
        return result;
    }
    Rng rng(seed);
    const float keep_scale = 1.0f / (1.0f - rate);
    result.output = Tensor(input.shape());
    result.mask = Tensor(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (rng.uniform() >= rate) {
            result.mask[i] = keep_scale;
            result.output[i] = input[i] * keep_scale;
        }
    }
    return result;
}

namespace {

Tensor dense_forward(const LayerParams& params, const Tensor& input) {
    const int in = params.weights.shape().extent(0);
    const int out = params.weights.shape().extent(1);
    if (input.shape().rank() != 1 || input.shape().extent(0) != in) {
        fail("dense: expected rank-1 input of extent " + std::to_string(in) + ", got " +
             input.shape().to_string());
    }
    Tensor y(Shape{out});
    const float* w = params.weights.data();
    for (int j = 0; j < out; ++j) {
        double acc = params.bias[static_cast<std::size_t>(j)];
        for (int i = 0; i < in; ++i) {
            acc += static_cast<double>(input[static_cast<std::size_t>(i)]) *
                   w[static_cast<std::size_t>(i) * out + j];
        }
        y[static_cast<std::size_t>(j)] = static_cast<float>(acc);
    }
    return y;
}

Tensor l2norm_forward(const Tensor& input) {
    double sq = 0.0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        sq += static_cast<double>(input[i]) * input[i];
    }
    const double norm = std::sqrt(sq);
    Tensor out(input.shape());
    if (norm < 1e-12) return out;  // zero vector stays zero
    for (std::size_t i = 0; i < input.size(); ++i) {
        out[i] = static_cast<float>(input[i] / norm);
    }
    return out;
}

}  // namespace

LayerForwardResult layer_forward(const LayerSpec& spec, const LayerParams& params,
                                 const Tensor& input, Mode mode, std::uint32_t seed) {
    LayerForwardResult result;
    result.cache.input = input;
    switch (spec.kind) {
        case LayerKind::conv:
            result.output = conv2d_valid(input, params.weights, params.bias, spec.conv.stride);
            break;
        case LayerKind::maxpool: {
            MaxPoolResult pool = maxpool2d(input, spec.pool_window, spec.pool_stride);
            result.output = std::move(pool.output);
            result.cache.argmax = std::move(pool.argmax);
            break;
        }
        case LayerKind::relu:
            result.output = relu(input);
            break;
        case LayerKind::flatten: {
            result.output = Tensor(Shape{static_cast<int>(input.size())}, input.values());
            break;
        }
        case LayerKind::dense:
            result.output = dense_forward(params, input);
            break;
        case LayerKind::dropout: {
            DropoutResult drop = dropout_forward(input, spec.dropout_rate, seed, mode);
            result.output = std::move(drop.output);
            result.cache.mask = std::move(drop.mask);
            break;
        }
        case LayerKind::softmax:
            result.output = softmax(input);
            result.cache.output = result.output;
            break;
        case LayerKind::l2norm:
            result.output = l2norm_forward(input);
            result.cache.output = result.output;
            break;
    }
    return result;
}

LayerBackwardResult layer_backward(const LayerSpec& spec, const LayerParams& params,
                                   const CacheEntry& cache, const Tensor& grad_out) {
    if (cache.input.empty()) fail("layer_backward: cache has no saved input");
    LayerBackwardResult result;
    switch (spec.kind) {
        case LayerKind::conv: {
            const Tensor& x = cache.input;
            const int c_in = x.shape().extent(0);
            const int h = x.shape().extent(1);
            const int w = x.shape().extent(2);
            const int c_out = spec.conv.out_channels;
            const int kh = spec.conv.kernel_h;
            const int kw = spec.conv.kernel_w;
            const int stride = spec.conv.stride;
            const int h_out = grad_out.shape().extent(1);
            const int w_out = grad_out.shape().extent(2);
            if (grad_out.shape().extent(0) != c_out) {
                fail("conv backward: grad_out channels mismatch");
            }

            result.grads.bias = Tensor(Shape{c_out});
            for (int o = 0; o < c_out; ++o) {
                double acc = 0.0;
                for (int oy = 0; oy < h_out; ++oy) {
                    for (int ox = 0; ox < w_out; ++ox) {
                        acc += grad_out.at(o, oy, ox);
                    }
                }
                result.grads.bias[static_cast<std::size_t>(o)] = static_cast<float>(acc);
            }

            result.grads.weights = Tensor(Shape{c_out, c_in, kh, kw});
            for (int o = 0; o < c_out; ++o) {
                for (int c = 0; c < c_in; ++c) {
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            double acc = 0.0;
                            for (int oy = 0; oy < h_out; ++oy) {
                                for (int ox = 0; ox < w_out; ++ox) {
                                    acc += static_cast<double>(grad_out.at(o, oy, ox)) *
                                           x.at(c, oy * stride + ky, ox * stride + kx);
                                }
                            }
                            result.grads.weights.at(o, c, ky, kx) = static_cast<float>(acc);
                        }
                    }
                }
            }

            std::vector<double> gin(x.size(), 0.0);
            const std::size_t in_hw = static_cast<std::size_t>(h) * w;
            for (int o = 0; o < c_out; ++o) {
                for (int oy = 0; oy < h_out; ++oy) {
                    for (int ox = 0; ox < w_out; ++ox) {
                        const double g = grad_out.at(o, oy, ox);
                        if (g == 0.0) continue;
                        for (int c = 0; c < c_in; ++c) {
                            for (int ky = 0; ky < kh; ++ky) {
                                for (int kx = 0; kx < kw; ++kx) {
                                    const std::size_t idx =
                                        c * in_hw +
                                        static_cast<std::size_t>(oy * stride + ky) * w +
                                        (ox * stride + kx);
                                    gin[idx] += g * params.weights.at(o, c, ky, kx);
                                }
                            }
                        }
                    }
                }
            }
            result.grad_input = Tensor(x.shape());
            for (std::size_t i = 0; i < gin.size(); ++i) {
                result.grad_input[i] = static_cast<float>(gin[i]);
            }
            break;
        }
        case LayerKind::maxpool: {
            if (cache.argmax.size() != grad_out.size()) {
                fail("maxpool backward: cache does not match grad_out shape " +
                     grad_out.shape().to_string());
            }
            result.grad_input = Tensor(cache.input.shape());
            for (std::size_t i = 0; i < grad_out.size(); ++i) {
                result.grad_input[cache.argmax[i]] += grad_out[i];
            }
            break;
        }
        case LayerKind::relu:
            result.grad_input = mul(grad_out, relu_grad(cache.input));
            break;
        case LayerKind::flatten:
            result.grad_input = Tensor(cache.input.shape(), grad_out.values());
            break;
        case LayerKind::dense: {
            const Tensor& x = cache.input;
            const int in = spec.dense_in;
            const int out = spec.dense_out;
            if (grad_out.shape().rank() != 1 || grad_out.shape().extent(0) != out) {
                fail("dense backward: grad_out shape " + grad_out.shape().to_string() +
                     " does not match layer output " + std::to_string(out));
            }
            result.grads.weights = Tensor(Shape{in, out});
            result.grads.bias = grad_out;
            result.grad_input = Tensor(Shape{in});
            const float* w = params.weights.data();
            for (int i = 0; i < in; ++i) {
                double acc = 0.0;
                for (int j = 0; j < out; ++j) {
                    const double g = grad_out[static_cast<std::size_t>(j)];
                    result.grads.weights[static_cast<std::size_t>(i) * out + j] =
                        static_cast<float>(x[static_cast<std::size_t>(i)] * g);
                    acc += g * w[static_cast<std::size_t>(i) * out + j];
                }
                result.grad_input[static_cast<std::size_t>(i)] = static_cast<float>(acc);
            }
            break;
        }
        case LayerKind::dropout: {
            if (cache.mask.shape() != grad_out.shape()) {
                fail("dropout backward: cached mask missing or mismatched");
            }
            result.grad_input = mul(grad_out, cache.mask);
            break;
        }
        case LayerKind::softmax: {
            const Tensor& y = cache.output;
            if (y.shape() != grad_out.shape()) fail("softmax backward: cache mismatch");
            double dot = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                dot += static_cast<double>(grad_out[i]) * y[i];
            }
            result.grad_input = Tensor(y.shape());
            for (std::size_t i = 0; i < y.size(); ++i) {
                result.grad_input[i] =
                    static_cast<float>(y[i] * (static_cast<double>(grad_out[i]) - dot));
            }
            break;
        }
        case LayerKind::l2norm: {
            const Tensor& x = cache.input;
            const Tensor& y = cache.output;
            if (y.shape() != grad_out.shape()) fail("l2norm backward: cache mismatch");
            double sq = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                sq += static_cast<double>(x[i]) * x[i];
            }
            const double norm = std::sqrt(sq);
            result.grad_input = Tensor(x.shape());
            if (norm < 1e-12) {
                result.grad_input = grad_out;
                break;
            }
            double dot = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                dot += static_cast<double>(grad_out[i]) * y[i];
            }
            for (std::size_t i = 0; i < y.size(); ++i) {
                result.grad_input[i] =
                    static_cast<float>((static_cast<double>(grad_out[i]) - dot * y[i]) / norm);
            }
            break;
        }
    }
    return result;
}

Tensor forward_eval(const NetworkGraph& net, const Tensor& input) {
    Tensor x = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        try {
            x = layer_forward(net.layers[i], net.params[i], x, Mode::eval, 0).output;
        } catch (const std::invalid_argument& e) {
            fail("forward (layer " + std::to_string(i) + "): " + e.what());
        }
    }
    return x;
}

TrainForwardResult forward_train(const NetworkGraph& net, const Tensor& input, Rng& rng) {
    TrainForwardResult result;
    result.cache.entries.reserve(net.layers.size());
    Tensor x = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const std::uint32_t seed =
            net.layers[i].kind == LayerKind::dropout ? rng.next_u32() : 0u;
        LayerForwardResult step;
        try {
            step = layer_forward(net.layers[i], net.params[i], x, Mode::train, seed);
        } catch (const std::invalid_argument& e) {
            fail("forward (layer " + std::to_string(i) + "): " + e.what());
        }
        x = std::move(step.output);
        result.cache.entries.push_back(std::move(step.cache));
    }
    result.output = std::move(x);
    return result;
}

BackwardResult network_backward(const NetworkGraph& net, const ForwardCache& cache,
                                const Tensor& grad_out) {
    if (cache.entries.size() != net.layers.size()) {
        fail("network_backward: cache has " + std::to_string(cache.entries.size()) +
             " entries for " + std::to_string(net.layers.size()) + " layers");
    }
    BackwardResult result;
    result.param_grads.resize(net.layers.size());
    Tensor g = grad_out;
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        LayerBackwardResult step =
            layer_backward(net.layers[i], net.params[i], cache.entries[i], g);
        result.param_grads[i] = std::move(step.grads);
        g = std::move(step.grad_input);
    }
    result.grad_input = std::move(g);
    return result;
}

namespace {

void fill_uniform(Tensor& t, float limit, Rng& rng) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.uniform_range(-limit, limit);
    }
}

}  // namespace

NetworkGraph build_ipost_cnn(const Shape& input_shape, int num_classes,
                             std::optional<int> embedding_dim, const CnnOptions& options,
                             std::uint32_t init_seed) {
    if (input_shape.rank() != 3) {
        fail("build_ipost_cnn: input shape must be rank 3 (channels, height, width), got " +
             input_shape.to_string());
    }
    if (!embedding_dim && num_classes < 2) {
        fail("build_ipost_cnn: num_classes must be >= 2");
    }
    if (embedding_dim && *embedding_dim < 1) {
        fail("build_ipost_cnn: embedding_dim must be >= 1");
    }
    if (options.filters.size() != 3) {
        fail("build_ipost_cnn: expected 3 filter counts");
    }

    std::vector<LayerSpec> layers;
    int channels = input_shape.extent(0);
    for (int i = 0; i < 3; ++i) {
        layers.push_back(conv_layer(channels, options.filters[static_cast<std::size_t>(i)],
                                    options.kernel, options.kernel, 1));
        layers.push_back(relu_layer());
        layers.push_back(maxpool_layer(options.pool_window, options.pool_stride));
        channels = options.filters[static_cast<std::size_t>(i)];
    }
    layers.push_back(flatten_layer());
    layers.push_back(dropout_layer(options.dropout_rate));

    // flattened width after the conv/pool stack
    Shape shape = input_shape;
    for (const auto& spec : layers) {
        try {
            shape = infer_output_shape(spec, shape);
        } catch (const std::invalid_argument&) {
            fail("build_ipost_cnn: input " + input_shape.to_string() +
                 " too small for the conv/pool stack");
        }
    }
    const int flat = shape.extent(0);

    layers.push_back(dense_layer(flat, options.dense_width));
    layers.push_back(relu_layer());
    const int head_width = embedding_dim ? *embedding_dim : num_classes;
    layers.push_back(dense_layer(options.dense_width, head_width));
    layers.push_back(embedding_dim ? l2norm_layer() : softmax_layer());

    NetworkGraph net = assemble_network(std::move(layers), input_shape);

    // He-uniform for layers feeding relu, Glorot-uniform for the head dense.
    Rng rng(init_seed);
    std::size_t last_dense = 0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind == LayerKind::dense) last_dense = i;
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& spec = net.layers[i];
        if (spec.kind == LayerKind::conv) {
            const float fan_in =
                static_cast<float>(spec.conv.in_channels * spec.conv.kernel_h * spec.conv.kernel_w);
            fill_uniform(net.params[i].weights, std::sqrt(6.0f / fan_in), rng);
        } else if (spec.kind == LayerKind::dense) {
            const float fan_in = static_cast<float>(spec.dense_in);
            const float fan_out = static_cast<float>(spec.dense_out);
            const float limit = i == last_dense ? std::sqrt(6.0f / (fan_in + fan_out))
                                                : std::sqrt(6.0f / fan_in);
            fill_uniform(net.params[i].weights, limit, rng);
        }
    }
    return net;
}

}  // namespace ipost
