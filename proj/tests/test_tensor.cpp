#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "ipost/rng.hpp"
#include "ipost/tensor.hpp"

using namespace ipost;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_range(-1.0f, 1.0f);
    return t;
}

// independent reference convolution, plain quadruple loop in double
Tensor conv_reference(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride) {
    const int ci = input.shape().extent(0);
    const int h = input.shape().extent(1);
    const int w = input.shape().extent(2);
    const int co = kernels.shape().extent(0);
    const int kh = kernels.shape().extent(2);
    const int kw = kernels.shape().extent(3);
    const int oh = (h - kh) / stride + 1;
    const int ow = (w - kw) / stride + 1;
    Tensor out = Tensor::zeros(Shape({co, oh, ow}));
    for (int o = 0; o < co; ++o) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double acc = bias.at(o);
                for (int c = 0; c < ci; ++c) {
                    for (int dy = 0; dy < kh; ++dy) {
                        for (int dx = 0; dx < kw; ++dx) {
                            acc += static_cast<double>(input.at(c, y * stride + dy, x * stride + dx)) *
                                   kernels.at(o, c, dy, dx);
                        }
                    }
                }
                out.at(o, y, x) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("shape basics") {
    const Shape s({2, 3, 4});
    CHECK(s.rank() == 3);
    CHECK(s.extent(0) == 2);
    CHECK(s.element_count() == 24);
    CHECK(s.to_string() == "(2,3,4)");
    CHECK(Shape({2, 3}) != s);
    CHECK_THROWS(Shape({0, 3}));
    CHECK_THROWS(Shape({-1}));
}

TEST_CASE("tensor construction validates count and finiteness") {
    Tensor t(Shape({2, 2}), {1.0f, 2.0f, 3.0f, 4.0f});
    CHECK(t.at(1, 0) == 3.0f);
    CHECK_THROWS(Tensor(Shape({2, 2}), {1.0f, 2.0f}));
    CHECK_THROWS(Tensor(Shape({2}), {1.0f, std::numeric_limits<float>::quiet_NaN()}));
    CHECK_THROWS(Tensor(Shape({2}), {1.0f, std::numeric_limits<float>::infinity()}));
    CHECK(Tensor::full(Shape({3}), 2.5f).at(2) == 2.5f);
}

TEST_CASE("conv output extent formula") {
    CHECK(conv_output_extent(5, 3, 1) == 3);
    CHECK(conv_output_extent(5, 3, 2) == 2);
    CHECK(conv_output_extent(3, 3, 1) == 1);
    CHECK(conv_output_extent(12, 2, 1) == 11);
    CHECK_THROWS(conv_output_extent(2, 3, 1));   // kernel larger than input
    CHECK_THROWS(conv_output_extent(5, 3, 0));   // stride must be >= 1
}

TEST_CASE("conv2d identity-corner kernel dot product") {
    const Tensor input(Shape({1, 2, 2}), {1, 2, 3, 4});
    const Tensor kernel(Shape({1, 1, 2, 2}), {1, 0, 0, 1});
    const Tensor bias(Shape({1}), {0.0f});
    const Tensor out = conv2d_valid(input, kernel, bias, 1);
    CHECK(out.shape() == Shape({1, 1, 1}));
    CHECK(out.at(0, 0, 0) == doctest::Approx(5.0f));
}

TEST_CASE("conv2d zero kernel gives zero output of correct shape") {
    Rng rng(7);
    const Tensor input = random_tensor(Shape({3, 6, 5}), rng);
    const Tensor kernel = Tensor::zeros(Shape({2, 3, 3, 3}));
    const Tensor bias = Tensor::zeros(Shape({2}));
    const Tensor out = conv2d_valid(input, kernel, bias, 1);
    CHECK(out.shape() == Shape({2, 4, 3}));
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0f);
}

TEST_CASE("conv2d bias is added to every output element") {
    const Tensor input = Tensor::zeros(Shape({1, 3, 3}));
    const Tensor kernel = Tensor::zeros(Shape({2, 1, 2, 2}));
    const Tensor bias(Shape({2}), {1.5f, -2.0f});
    const Tensor out = conv2d_valid(input, kernel, bias, 1);
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 2; ++x) {
            CHECK(out.at(0, y, x) == 1.5f);
            CHECK(out.at(1, y, x) == -2.0f);
        }
    }
}

TEST_CASE("conv2d matches brute-force reference on random instances") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int ci = 1 + static_cast<int>(rng.uniform_int(3));
        const int co = 1 + static_cast<int>(rng.uniform_int(3));
        const int kh = 1 + static_cast<int>(rng.uniform_int(3));
        const int kw = 1 + static_cast<int>(rng.uniform_int(3));
        const int stride = 1 + static_cast<int>(rng.uniform_int(2));
        const int h = kh + static_cast<int>(rng.uniform_int(5));
        const int w = kw + static_cast<int>(rng.uniform_int(5));
        const Tensor input = random_tensor(Shape({ci, h, w}), rng);
        const Tensor kernels = random_tensor(Shape({co, ci, kh, kw}), rng);
        const Tensor bias = random_tensor(Shape({co}), rng);
        const Tensor got = conv2d_valid(input, kernels, bias, stride);
        const Tensor want = conv_reference(input, kernels, bias, stride);
        REQUIRE(got.shape() == want.shape());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("conv2d rejects mismatched shapes and non-finite input") {
    const Tensor input = Tensor::zeros(Shape({2, 4, 4}));
    const Tensor kernel = Tensor::zeros(Shape({1, 3, 2, 2}));  // expects 3 input channels
    const Tensor bias = Tensor::zeros(Shape({1}));
    CHECK_THROWS(conv2d_valid(input, kernel, bias, 1));
    const Tensor kernel_ok = Tensor::zeros(Shape({2, 2, 2, 2}));
    CHECK_THROWS(conv2d_valid(input, kernel_ok, Tensor::zeros(Shape({1})), 1));  // bias != O
    Tensor bad = input;
    bad[0] = std::numeric_limits<float>::quiet_NaN();
    // NaN smuggled in through raw data access must still be caught
    CHECK_THROWS(conv2d_valid(bad, kernel_ok, Tensor::zeros(Shape({2})), 1));
}

TEST_CASE("maxpool window maximum and argmax") {
    const Tensor input(Shape({1, 2, 2}), {1, 2, 3, 4});
    const MaxPoolResult r = maxpool2d(input, 2, 2);
    CHECK(r.output.shape() == Shape({1, 1, 1}));
    CHECK(r.output.at(0, 0, 0) == 4.0f);
    REQUIRE(r.argmax.size() == 1);
    CHECK(r.argmax[0] == 3);
}

TEST_CASE("maxpool tie-break picks the first occurrence") {
    const Tensor input = Tensor::full(Shape({1, 4, 4}), 2.5f);
    const MaxPoolResult r = maxpool2d(input, 2, 2);
    REQUIRE(r.argmax.size() == 4);
    CHECK(r.output.at(0, 1, 1) == 2.5f);
    CHECK(r.argmax[0] == 0);   // top-left window starts at flat 0
    CHECK(r.argmax[1] == 2);   // next window starts two columns over
    CHECK(r.argmax[2] == 8);
    CHECK(r.argmax[3] == 10);
}

TEST_CASE("maxpool output bounded by global max and argmax points at the max") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor input = random_tensor(Shape({2, 5, 7}), rng);
        float global_max = input[0];
        for (std::size_t i = 0; i < input.size(); ++i) global_max = std::max(global_max, input[i]);
        const MaxPoolResult r = maxpool2d(input, 2, 1);
        for (std::size_t i = 0; i < r.output.size(); ++i) {
            CHECK(r.output[i] <= global_max);
            CHECK(input[r.argmax[i]] == r.output[i]);
        }
    }
    CHECK_THROWS(maxpool2d(Tensor::zeros(Shape({1, 2, 2})), 3, 1));  // window too large
}

TEST_CASE("matmul against hand oracle") {
    const Tensor a(Shape({2, 3}), {1, 2, 3, 4, 5, 6});
    const Tensor b(Shape({3, 2}), {7, 8, 9, 10, 11, 12});
    const Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape({2, 2}));
    CHECK(c.at(0, 0) == 58.0f);
    CHECK(c.at(0, 1) == 64.0f);
    CHECK(c.at(1, 0) == 139.0f);
    CHECK(c.at(1, 1) == 154.0f);
    CHECK_THROWS(matmul(a, Tensor::zeros(Shape({2, 2}))));  // inner extents differ
}

TEST_CASE("elementwise helpers") {
    const Tensor a(Shape({3}), {1.0f, -2.0f, 0.0f});
    const Tensor b(Shape({3}), {0.5f, 4.0f, -1.0f});
    CHECK(add(a, b).at(1) == 2.0f);
    CHECK(sub(a, b).at(0) == 0.5f);
    CHECK(mul(a, b).at(1) == -8.0f);
    CHECK(scale(a, 2.0f).at(0) == 2.0f);
    const Tensor r = relu(a);
    CHECK(r.at(0) == 1.0f);
    CHECK(r.at(1) == 0.0f);
    const Tensor g = relu_grad(a);
    CHECK(g.at(0) == 1.0f);
    CHECK(g.at(1) == 0.0f);
    CHECK(g.at(2) == 0.0f);  // gradient at exactly zero is zero
    CHECK_THROWS(add(a, Tensor::zeros(Shape({4}))));
}

TEST_CASE("conv shift equivariance on the overlapping region") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const int h = 6;
        const int w = 8;
        const Tensor input = random_tensor(Shape({1, h, w}), rng);
        const Tensor kernels = random_tensor(Shape({1, 1, 3, 3}), rng);
        const Tensor bias = random_tensor(Shape({1}), rng);
        // shift input right by one column, cropping the last column
        Tensor shifted = Tensor::zeros(Shape({1, h, w}));
        for (int y = 0; y < h; ++y) {
            for (int x = 1; x < w; ++x) shifted.at(0, y, x) = input.at(0, y, x - 1);
        }
        const Tensor base = conv2d_valid(input, kernels, bias, 1);
        const Tensor moved = conv2d_valid(shifted, kernels, bias, 1);
        const int ow = base.shape().extent(2);
        for (int y = 0; y < base.shape().extent(1); ++y) {
            for (int x = 1; x < ow; ++x) {
                CHECK(moved.at(0, y, x) == doctest::Approx(base.at(0, y, x - 1)).epsilon(1e-6));
            }
        }
    }
}
