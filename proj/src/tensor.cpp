#include "ipost/tensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ipost {

namespace {

[[noreturn]] void fail(const std::string& msg) {
    throw std::invalid_argument(msg);
}

}  // namespace

Shape::Shape(std::initializer_list<int> extents) : Shape(std::vector<int>(extents)) {}

Shape::Shape(std::vector<int> extents) : extents_(std::move(extents)) {
    for (std::size_t i = 0; i < extents_.size(); ++i) {
        if (extents_[i] < 1) {
            fail("Shape: extent " + std::to_string(i) + " is " + std::to_string(extents_[i]) +
                 ", must be >= 1");
        }
    }
}

int Shape::extent(int axis) const {
    if (axis < 0 || axis >= rank()) {
        fail("Shape: axis " + std::to_string(axis) + " out of range for rank " +
             std::to_string(rank()));
    }
    return extents_[static_cast<std::size_t>(axis)];
}

std::size_t Shape::element_count() const {
    std::size_t n = 1;
    for (int e : extents_) n *= static_cast<std::size_t>(e);
    return n;
}

std::string Shape::to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < extents_.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(extents_[i]);
    }
    s += ")";
    return s;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_.element_count(), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_.element_count()) {
        fail("Tensor: got " + std::to_string(data_.size()) + " values for shape " +
             shape_.to_string() + " with " + std::to_string(shape_.element_count()) +
             " elements");
    }
    if (!all_finite()) fail("Tensor: non-finite value in constructor for shape " + shape_.to_string());
}

Tensor Tensor::full(Shape shape, float value) {
    if (!std::isfinite(value)) fail("Tensor::full: non-finite fill value");
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
}

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {

void require_rank(const Tensor& t, int rank, const char* what) {
    if (t.shape().rank() != rank) {
        fail(std::string(what) + ": expected rank " + std::to_string(rank) + " tensor, got shape " +
             t.shape().to_string());
    }
}

}  // namespace

float& Tensor::at(int i) {
    require_rank(*this, 1, "Tensor::at");
    return data_[static_cast<std::size_t>(i)];
}
float Tensor::at(int i) const { return const_cast<Tensor*>(this)->at(i); }

float& Tensor::at(int i, int j) {
    require_rank(*this, 2, "Tensor::at");
    return data_[static_cast<std::size_t>(i) * shape_.extent(1) + j];
}
float Tensor::at(int i, int j) const { return const_cast<Tensor*>(this)->at(i, j); }

float& Tensor::at(int c, int h, int w) {
    require_rank(*this, 3, "Tensor::at");
    const std::size_t hw = static_cast<std::size_t>(shape_.extent(1)) * shape_.extent(2);
    return data_[c * hw + static_cast<std::size_t>(h) * shape_.extent(2) + w];
}
float Tensor::at(int c, int h, int w) const { return const_cast<Tensor*>(this)->at(c, h, w); }

float& Tensor::at(int o, int c, int h, int w) {
    require_rank(*this, 4, "Tensor::at");
    const std::size_t chw = static_cast<std::size_t>(shape_.extent(1)) * shape_.extent(2) * shape_.extent(3);
    const std::size_t hw = static_cast<std::size_t>(shape_.extent(2)) * shape_.extent(3);
    return data_[o * chw + c * hw + static_cast<std::size_t>(h) * shape_.extent(3) + w];
}
float Tensor::at(int o, int c, int h, int w) const {
    return const_cast<Tensor*>(this)->at(o, c, h, w);
}

int conv_output_extent(int in_extent, int kernel_extent, int stride) {
    if (stride < 1) fail("conv: stride " + std::to_string(stride) + " must be >= 1");
    if (kernel_extent > in_extent) {
        fail("conv: kernel extent " + std::to_string(kernel_extent) + " exceeds input extent " +
             std::to_string(in_extent));
    }
    return (in_extent - kernel_extent) / stride + 1;
}

Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride) {
    require_rank(input, 3, "conv2d_valid input");
    require_rank(kernels, 4, "conv2d_valid kernels");
    require_rank(bias, 1, "conv2d_valid bias");

    const int c_in = input.shape().extent(0);
    const int h = input.shape().extent(1);
    const int w = input.shape().extent(2);
    const int c_out = kernels.shape().extent(0);
    const int kc = kernels.shape().extent(1);
    const int kh = kernels.shape().extent(2);
    const int kw = kernels.shape().extent(3);

    if (kc != c_in) {
        fail("conv2d_valid: kernel channel dim " + std::to_string(kc) +
             " does not match input channels " + std::to_string(c_in));
    }
    if (bias.shape().extent(0) != c_out) {
        fail("conv2d_valid: bias extent " + std::to_string(bias.shape().extent(0)) +
             " does not match out_channels " + std::to_string(c_out));
    }
    if (!input.all_finite() || !kernels.all_finite() || !bias.all_finite()) {
        fail("conv2d_valid: non-finite input");
    }

    const int h_out = conv_output_extent(h, kh, stride);
    const int w_out = conv_output_extent(w, kw, stride);

    Tensor out(Shape{c_out, h_out, w_out});
    const float* in = input.data();
    const float* ker = kernels.data();
    float* dst = out.data();

    const std::size_t in_hw = static_cast<std::size_t>(h) * w;
    const std::size_t ker_hw = static_cast<std::size_t>(kh) * kw;
    const std::size_t ker_chw = static_cast<std::size_t>(kc) * ker_hw;

    std::size_t o_idx = 0;
    for (int o = 0; o < c_out; ++o) {
        const double b = bias[static_cast<std::size_t>(o)];
        for (int oy = 0; oy < h_out; ++oy) {
            const int iy0 = oy * stride;
            for (int ox = 0; ox < w_out; ++ox) {
                const int ix0 = ox * stride;
                double acc = b;
                for (int c = 0; c < c_in; ++c) {
                    const float* in_c = in + c * in_hw;
                    const float* ker_c = ker + o * ker_chw + c * ker_hw;
                    for (int ky = 0; ky < kh; ++ky) {
                        const float* in_row = in_c + static_cast<std::size_t>(iy0 + ky) * w + ix0;
                        const float* ker_row = ker_c + static_cast<std::size_t>(ky) * kw;
                        for (int kx = 0; kx < kw; ++kx) {
                            acc += static_cast<double>(in_row[kx]) * ker_row[kx];
                        }
                    }
                }
                dst[o_idx++] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

MaxPoolResult maxpool2d(const Tensor& input, int window, int stride) {
    require_rank(input, 3, "maxpool2d input");
    if (window < 1) fail("maxpool2d: window must be >= 1");
    if (stride < 1) fail("maxpool2d: stride must be >= 1");

    const int c_in = input.shape().extent(0);
    const int h = input.shape().extent(1);
    const int w = input.shape().extent(2);
    if (window > h || window > w) {
        fail("maxpool2d: window " + std::to_string(window) + " larger than input " +
             std::to_string(h) + "x" + std::to_string(w));
    }

    const int h_out = conv_output_extent(h, window, stride);
    const int w_out = conv_output_extent(w, window, stride);

    MaxPoolResult result;
    result.output = Tensor(Shape{c_in, h_out, w_out});
    result.argmax.resize(result.output.size());

    const float* in = input.data();
    float* dst = result.output.data();
    const std::size_t in_hw = static_cast<std::size_t>(h) * w;

    std::size_t o_idx = 0;
    for (int c = 0; c < c_in; ++c) {
        for (int oy = 0; oy < h_out; ++oy) {
            for (int ox = 0; ox < w_out; ++ox) {
                const int iy0 = oy * stride;
                const int ix0 = ox * stride;
                std::size_t best_idx = c * in_hw + static_cast<std::size_t>(iy0) * w + ix0;
                float best = in[best_idx];
                for (int ky = 0; ky < window; ++ky) {
                    for (int kx = 0; kx < window; ++kx) {
                        const std::size_t idx =
                            c * in_hw + static_cast<std::size_t>(iy0 + ky) * w + (ix0 + kx);
                        if (in[idx] > best) {  // strict: first occurrence wins ties
                            best = in[idx];
                            best_idx = idx;
                        }
                    }
                }
                dst[o_idx] = best;
                result.argmax[o_idx] = best_idx;
                ++o_idx;
            }
        }
    }
    return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul a");
    require_rank(b, 2, "matmul b");
    const int m = a.shape().extent(0);
    const int k = a.shape().extent(1);
    const int k2 = b.shape().extent(0);
    const int n = b.shape().extent(1);
    if (k != k2) {
        fail("matmul: inner dimensions " + std::to_string(k) + " and " + std::to_string(k2) +
             " do not agree");
    }

    Tensor out(Shape{m, n});
    const float* pa = a.data();
    const float* pb = b.data();
    float* pc = out.data();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t) {
                acc += static_cast<double>(pa[static_cast<std::size_t>(i) * k + t]) *
                       pb[static_cast<std::size_t>(t) * n + j];
            }
            pc[static_cast<std::size_t>(i) * n + j] = static_cast<float>(acc);
        }
    }
    return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        fail(std::string(what) + ": shape mismatch " + a.shape().to_string() + " vs " +
             b.shape().to_string());
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 0.0f) out[i] = 0.0f;
    }
    return out;
}

Tensor relu_grad(const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0f ? 1.0f : 0.0f;
    return out;
}

}  // namespace ipost
