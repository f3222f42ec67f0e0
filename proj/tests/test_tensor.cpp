#include <gtest/gtest.h>

#include "paralens/rng.hpp"
#include "paralens/tensor.hpp"

using namespace paralens;

namespace {

Tensor bits(std::vector<std::uint8_t> v) {
  Shape s{v.size()};
  return Tensor::bits(s, std::move(v));
}

std::vector<double> values(const Tensor& t) { return t.to_vector(); }

}  // namespace

TEST(TensorAdd, ZerosAreTheUnit) {
  Tensor x = Tensor::vector({1.5, -2.0, 3.25});
  EXPECT_TRUE(tensor_add(x, Tensor::zeros(x.shape(), ScalarKind::Real64)).identical(x));
  Tensor b = bits({1, 0, 1});
  EXPECT_TRUE(tensor_add(b, Tensor::zeros(b.shape(), ScalarKind::Z2)).identical(b));
}

TEST(TensorAdd, Z2IsXor) {
  EXPECT_TRUE(tensor_add(bits({1, 0, 1}), bits({1, 1, 0})).identical(bits({0, 1, 1})));
}

TEST(TensorAdd, RealScalar) { EXPECT_EQ(tensor_add(Tensor::scalar(1.5), Tensor::scalar(2.5)).item(), 4.0); }

TEST(TensorAdd, RejectsMismatches) {
  try {
    tensor_add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  try {
    tensor_add(Tensor::vector({1, 0}), bits({1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KindMismatch);
  }
}

TEST(TensorAdd, SemigroupLaws) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(5), b(5), c(5);
    for (int i = 0; i < 5; ++i) {
      a[i] = rng.uniform(-1e3, 1e3);
      b[i] = rng.uniform(-1e3, 1e3);
      c[i] = rng.uniform(-1e3, 1e3);
    }
    Tensor x = Tensor::vector(a), y = Tensor::vector(b), z = Tensor::vector(c);
    auto l = values(tensor_add(tensor_add(x, y), z)), r = values(tensor_add(x, tensor_add(y, z)));
    for (int i = 0; i < 5; ++i) EXPECT_LE(std::abs(l[i] - r[i]), 1e-12);
    EXPECT_TRUE(tensor_add(x, y).identical(tensor_add(y, x)));

    std::vector<std::uint8_t> p(6), q(6), s(6);
    for (int i = 0; i < 6; ++i) {
      p[i] = rng.coin();
      q[i] = rng.coin();
      s[i] = rng.coin();
    }
    Tensor u = bits(p), v = bits(q), w = bits(s);
    EXPECT_TRUE(tensor_add(tensor_add(u, v), w).identical(tensor_add(u, tensor_add(v, w))));
    EXPECT_TRUE(tensor_add(u, v).identical(tensor_add(v, u)));
    EXPECT_TRUE(tensor_add(u, u).identical(Tensor::zeros(u.shape(), ScalarKind::Z2)));
  }
}

TEST(Matmul, IdentityMatrix) {
  Tensor id = Tensor::real(Shape{2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(values(matmul(id, Tensor::vector({3.5, -1}))), (std::vector<double>{3.5, -1}));
}

TEST(Matmul, HandEvaluated) {
  Tensor m = Tensor::real(Shape{2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(values(matmul(m, Tensor::vector({1, 1}))), (std::vector<double>{3, 7}));
}

TEST(Matmul, OverZ2) {
  Tensor m = Tensor::bits(Shape{2, 2}, {1, 1, 0, 1});
  EXPECT_TRUE(matmul(m, bits({1, 1})).identical(bits({0, 1})));
}

TEST(Matmul, InnerDimensionsMustAgree) {
  try {
    matmul(Tensor::real(Shape{2, 3}, std::vector<double>(6, 1.0)), Tensor::vector({1, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Matmul, DistributesOverAddition) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> m(12), a(4), b(4);
    for (auto& v : m) v = rng.uniform(-5, 5);
    for (auto& v : a) v = rng.uniform(-5, 5);
    for (auto& v : b) v = rng.uniform(-5, 5);
    Tensor M = Tensor::real(Shape{3, 4}, m), x = Tensor::vector(a), y = Tensor::vector(b);
    auto l = values(matmul(M, tensor_add(x, y))), r = values(tensor_add(matmul(M, x), matmul(M, y)));
    for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(l[i] - r[i]), 1e-10 * std::max(1.0, std::abs(r[i])));

    std::vector<std::uint8_t> mb(12), p(4), q(4);
    for (auto& v : mb) v = rng.coin();
    for (auto& v : p) v = rng.coin();
    for (auto& v : q) v = rng.coin();
    Tensor B = Tensor::bits(Shape{3, 4}, mb), u = bits(p), w = bits(q);
    EXPECT_TRUE(matmul(B, tensor_add(u, w)).identical(tensor_add(matmul(B, u), matmul(B, w))));
  }
}

TEST(Conv2d, UnitKernelScales) {
  Tensor img = Tensor::real(Shape{3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor out = conv2d_valid(Tensor::real(Shape{1, 1}, {2.0}), img);
  EXPECT_EQ(out.shape(), img.shape());
  EXPECT_EQ(values(out), values(scale(2.0, img)));
}

TEST(Conv2d, AllOnesKernelSums) {
  Tensor out = conv2d_valid(Tensor::real(Shape{2, 2}, {1, 1, 1, 1}), Tensor::real(Shape{2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(out.shape(), (Shape{1, 1}));
  EXPECT_EQ(out.item(), 10.0);
}

TEST(Conv2d, OutputSizeFormula) {
  EXPECT_EQ(conv_output_size(3, 5), 3u);
  Tensor out = conv2d_valid(Tensor::filled(Shape{3, 3}, 1.0), Tensor::filled(Shape{5, 5}, 1.0));
  EXPECT_EQ(out.shape(), (Shape{3, 3}));
}

TEST(Conv2d, KernelLargerThanImage) {
  try {
    conv2d_valid(Tensor::filled(Shape{4, 4}, 1.0), Tensor::filled(Shape{3, 3}, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(Elementwise, Identity) {
  Tensor x = Tensor::vector({-1, 0.25, 9});
  EXPECT_TRUE(elementwise([](double v) { return v; }, x).identical(x));
}

TEST(Elementwise, SigmoidAtZero) { EXPECT_EQ(elementwise(sigmoid, Tensor::vector({0.0})).item(), 0.5); }

TEST(Elementwise, Relu) { EXPECT_EQ(values(elementwise(relu, Tensor::vector({-1.0, 2.0}))), (std::vector<double>{0.0, 2.0})); }

TEST(Elementwise, SigmoidOnBitsIsAKindError) {
  try {
    elementwise(sigmoid, bits({1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KindMismatch);
  }
}

TEST(Softmax, StableForLargeLogits) {
  auto s = values(softmax(Tensor::vector({1000.0, 1000.0})));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
}
