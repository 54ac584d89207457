#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ipost {

// Extents of a dense n-dimensional array. Every extent is >= 1.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int> extents);
    explicit Shape(std::vector<int> extents);

    int rank() const { return static_cast<int>(extents_.size()); }
    int extent(int axis) const;
    const std::vector<int>& extents() const { return extents_; }
    std::size_t element_count() const;
    std::string to_string() const;

    bool operator==(const Shape& other) const { return extents_ == other.extents_; }
    bool operator!=(const Shape& other) const { return !(*this == other); }

private:
    std::vector<int> extents_;
};

// Dense row-major tensor of single-precision reals.
//
// Layout convention used across the whole project: images and feature maps
// are rank-3 tensors ordered (channels, height, width); convolution kernel
// banks are rank-4 (out_channels, in_channels, kernel_h, kernel_w); dense
// weights are rank-2 (in, out). Flattening is row-major over that order.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);                    // zero-filled
    Tensor(Shape shape, std::vector<float> values);  // validates count and finiteness

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, float value);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    float& at(int i);
    float at(int i) const;
    float& at(int i, int j);
    float at(int i, int j) const;
    float& at(int c, int h, int w);
    float at(int c, int h, int w) const;
    float& at(int o, int c, int h, int w);
    float at(int o, int c, int h, int w) const;

    bool all_finite() const;

private:
    Shape shape_;
    std::vector<float> data_;
};

// Valid-padding convolution geometry. Output extent per spatial axis is
// floor((in - kernel) / stride) + 1 and must be >= 1.
struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    int stride = 1;
};

int conv_output_extent(int in_extent, int kernel_extent, int stride);

// input (C,H,W), kernels (O,C,Kh,Kw), bias (O) -> (O,H',W').
Tensor conv2d_valid(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride);

struct MaxPoolResult {
    Tensor output;                    // (C,H',W')
    std::vector<std::size_t> argmax;  // per output element, flat index into the input
};

// Square window max pooling; ties resolve to the lowest flat input index.
MaxPoolResult maxpool2d(const Tensor& input, int window, int stride);

// (M,K) x (K,N) -> (M,N), accumulated in double.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor relu(const Tensor& a);
Tensor relu_grad(const Tensor& a);  // 1 where a > 0, else 0

}  // namespace ipost
