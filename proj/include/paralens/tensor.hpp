#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "paralens/error.hpp"

namespace paralens {

// Scalars live in one of two semirings. Real64 is (double, +, *); Z2 is
// ({0,1}, XOR, AND). Both have a zero and a commutative addition, which is all
// the backward passes ever need.
enum class ScalarKind : std::uint8_t { Real64 = 0, Z2 = 1 };

inline const char* to_string(ScalarKind k) { return k == ScalarKind::Real64 ? "real64" : "z2"; }

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_[i]; }

  std::size_t size() const {
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
  }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << ']';
    return os.str();
  }

 private:
  std::vector<std::size_t> dims_;
};

/// Immutable shaped buffer. Copies share storage, so passing tensors around
/// by value through lens bundles costs a reference-count bump.
class Tensor {
 public:
  Tensor() : Tensor(zeros(Shape{}, ScalarKind::Real64)) {}

  static Tensor real(Shape shape, std::vector<double> data) {
    check_count(shape, data.size());
    Tensor t(std::move(shape), ScalarKind::Real64);
    t.reals_ = std::make_shared<const std::vector<double>>(std::move(data));
    return t;
  }

  static Tensor bits(Shape shape, std::vector<std::uint8_t> data) {
    check_count(shape, data.size());
    for (auto& b : data) b &= 1u;
    Tensor t(std::move(shape), ScalarKind::Z2);
    t.bits_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(data));
    return t;
  }

  static Tensor scalar(double v) { return real(Shape{}, {v}); }
  static Tensor bit(bool v) { return bits(Shape{}, {static_cast<std::uint8_t>(v)}); }
  static Tensor vector(std::vector<double> v) {
    Shape s{v.size()};
    return real(std::move(s), std::move(v));
  }

  static Tensor zeros(const Shape& shape, ScalarKind kind) {
    if (kind == ScalarKind::Real64) return real(shape, std::vector<double>(shape.size(), 0.0));
    return bits(shape, std::vector<std::uint8_t>(shape.size(), 0));
  }

  static Tensor filled(const Shape& shape, double v) { return real(shape, std::vector<double>(shape.size(), v)); }

  const Shape& shape() const { return shape_; }
  ScalarKind kind() const { return kind_; }
  std::size_t size() const { return shape_.size(); }

  std::span<const double> reals() const {
    if (kind_ != ScalarKind::Real64) throw Error(ErrorCode::KindMismatch, "expected a real64 tensor, got z2");
    return {reals_->data(), reals_->size()};
  }

  std::span<const std::uint8_t> bit_data() const {
    if (kind_ != ScalarKind::Z2) throw Error(ErrorCode::KindMismatch, "expected a z2 tensor, got real64");
    return {bits_->data(), bits_->size()};
  }

  /// Element i widened to double (bits become 0.0 / 1.0).
  double at(std::size_t i) const { return kind_ == ScalarKind::Real64 ? (*reals_)[i] : double((*bits_)[i]); }

  /// Scalar value of a one-element tensor.
  double item() const {
    if (size() != 1) throw Error(ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape_.str());
    return at(0);
  }

  std::vector<double> to_vector() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i);
    return out;
  }

  Tensor reshape(Shape shape) const {
    if (shape.size() != size())
      throw Error(ErrorCode::ShapeMismatch, "cannot reshape " + shape_.str() + " to " + shape.str());
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  /// Bitwise equality of shape, kind and payload.
  bool identical(const Tensor& o) const {
    if (shape_ != o.shape_ || kind_ != o.kind_) return false;
    if (kind_ == ScalarKind::Z2) return *bits_ == *o.bits_;
    for (std::size_t i = 0; i < size(); ++i) {
      if (std::bit_cast<std::uint64_t>((*reals_)[i]) != std::bit_cast<std::uint64_t>((*o.reals_)[i])) return false;
    }
    return true;
  }

 private:
  Tensor(Shape shape, ScalarKind kind) : shape_(std::move(shape)), kind_(kind) {}

  static void check_count(const Shape& shape, std::size_t n) {
    if (shape.size() != n)
      throw Error(ErrorCode::ShapeMismatch,
                  "buffer of " + std::to_string(n) + " elements for shape " + shape.str());
  }

  Shape shape_;
  ScalarKind kind_ = ScalarKind::Real64;
  std::shared_ptr<const std::vector<double>> reals_;
  std::shared_ptr<const std::vector<std::uint8_t>> bits_;
};

namespace detail {

inline void require_same(const Tensor& x, const Tensor& y, const char* op) {
  if (x.kind() != y.kind())
    throw Error(ErrorCode::KindMismatch, std::string(op) + ": " + to_string(x.kind()) + " vs " + to_string(y.kind()));
  if (x.shape() != y.shape())
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + x.shape().str() + " vs " + y.shape().str());
}

inline void require_real(const Tensor& x, const char* op) {
  if (x.kind() != ScalarKind::Real64)
    throw Error(ErrorCode::KindMismatch, std::string(op) + " requires real64 tensors");
}

template <class RealOp, class BitOp>
Tensor zip(const Tensor& x, const Tensor& y, const char* name, RealOp rop, BitOp bop) {
  require_same(x, y, name);
  if (x.kind() == ScalarKind::Real64) {
    auto a = x.reals(), b = y.reals();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = rop(a[i], b[i]);
    return Tensor::real(x.shape(), std::move(out));
  }
  auto a = x.bit_data(), b = y.bit_data();
  std::vector<std::uint8_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = bop(a[i], b[i]);
  return Tensor::bits(x.shape(), std::move(out));
}

}  // namespace detail

/// Semiring addition: IEEE addition for reals, XOR for bits.
inline Tensor tensor_add(const Tensor& x, const Tensor& y) {
  return detail::zip(x, y, "tensor_add", std::plus<>(), [](std::uint8_t a, std::uint8_t b) { return std::uint8_t(a ^ b); });
}

/// Additive inverse. In Z2 every element is its own inverse.
inline Tensor tensor_neg(const Tensor& x) {
  if (x.kind() == ScalarKind::Z2) return x;
  auto a = x.reals();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = -a[i];
  return Tensor::real(x.shape(), std::move(out));
}

inline Tensor tensor_sub(const Tensor& x, const Tensor& y) {
  return detail::zip(x, y, "tensor_sub", std::minus<>(), [](std::uint8_t a, std::uint8_t b) { return std::uint8_t(a ^ b); });
}

/// Semiring multiplication, pointwise (Hadamard). AND in Z2.
inline Tensor hadamard(const Tensor& x, const Tensor& y) {
  return detail::zip(x, y, "hadamard", std::multiplies<>(), [](std::uint8_t a, std::uint8_t b) { return std::uint8_t(a & b); });
}

inline Tensor scale(double c, const Tensor& x) {
  detail::require_real(x, "scale");
  auto a = x.reals();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
  return Tensor::real(x.shape(), std::move(out));
}

/// Semiring sum of all entries, as a rank-0 tensor.
inline Tensor sum_all(const Tensor& x) {
  if (x.kind() == ScalarKind::Real64) {
    double s = 0.0;
    for (double v : x.reals()) s += v;
    return Tensor::scalar(s);
  }
  std::uint8_t s = 0;
  for (auto v : x.bit_data()) s ^= v;
  return Tensor::bit(s);
}

/// Semiring inner product of equally shaped tensors, as a rank-0 tensor.
inline Tensor dot(const Tensor& x, const Tensor& y) { return sum_all(hadamard(x, y)); }

/// Matrix-vector product m[r x c] . x[c] -> [r].
inline Tensor matmul(const Tensor& m, const Tensor& x) {
  if (m.kind() != x.kind()) throw Error(ErrorCode::KindMismatch, "matmul: operand kinds differ");
  if (m.shape().rank() != 2 || x.shape().rank() != 1 || m.shape()[1] != x.shape()[0])
    throw Error(ErrorCode::ShapeMismatch, "matmul: " + m.shape().str() + " . " + x.shape().str());
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  if (m.kind() == ScalarKind::Real64) {
    auto a = m.reals(), v = x.reals();
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = a.data() + r * cols;
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += row[c] * v[c];
      out[r] = s;
    }
    return Tensor::real(Shape{rows}, std::move(out));
  }
  auto a = m.bit_data(), v = x.bit_data();
  std::vector<std::uint8_t> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] ^= a[r * cols + c] & v[c];
  return Tensor::bits(Shape{rows}, std::move(out));
}

/// m^T . y for m[r x c], y[r] -> [c].
inline Tensor matmul_transposed(const Tensor& m, const Tensor& y) {
  if (m.kind() != y.kind()) throw Error(ErrorCode::KindMismatch, "matmul_transposed: operand kinds differ");
  if (m.shape().rank() != 2 || y.shape().rank() != 1 || m.shape()[0] != y.shape()[0])
    throw Error(ErrorCode::ShapeMismatch, "matmul_transposed: " + m.shape().str() + "^T . " + y.shape().str());
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  if (m.kind() == ScalarKind::Real64) {
    auto a = m.reals(), v = y.reals();
    std::vector<double> out(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = a.data() + r * cols;
      const double w = v[r];
      for (std::size_t c = 0; c < cols; ++c) out[c] += row[c] * w;
    }
    return Tensor::real(Shape{cols}, std::move(out));
  }
  auto a = m.bit_data(), v = y.bit_data();
  std::vector<std::uint8_t> out(cols, 0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] ^= a[r * cols + c] & v[r];
  return Tensor::bits(Shape{cols}, std::move(out));
}

/// Outer product y[r] (x) x[c] -> [r x c].
inline Tensor outer(const Tensor& y, const Tensor& x) {
  if (y.kind() != x.kind()) throw Error(ErrorCode::KindMismatch, "outer: operand kinds differ");
  if (y.shape().rank() != 1 || x.shape().rank() != 1)
    throw Error(ErrorCode::ShapeMismatch, "outer: expects vectors, got " + y.shape().str() + ", " + x.shape().str());
  const std::size_t rows = y.size(), cols = x.size();
  if (y.kind() == ScalarKind::Real64) {
    auto a = y.reals(), b = x.reals();
    std::vector<double> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = a[r] * b[c];
    return Tensor::real(Shape{rows, cols}, std::move(out));
  }
  auto a = y.bit_data(), b = x.bit_data();
  std::vector<std::uint8_t> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = a[r] & b[c];
  return Tensor::bits(Shape{rows, cols}, std::move(out));
}

/// Output side length of a valid-mode 2D convolution.
inline std::size_t conv_output_size(std::size_t k, std::size_t m) { return std::max(m, k) - std::min(m, k) + 1; }

/// Valid-mode 2D cross-correlation of a k x k kernel over an m x m image.
inline Tensor conv2d_valid(const Tensor& kernel, const Tensor& image) {
  detail::require_real(kernel, "conv2d_valid");
  detail::require_real(image, "conv2d_valid");
  const auto& ks = kernel.shape();
  const auto& is = image.shape();
  if (ks.rank() != 2 || is.rank() != 2 || ks[0] != ks[1] || is[0] != is[1])
    throw Error(ErrorCode::ShapeMismatch, "conv2d_valid: expects square kernel and image, got " + ks.str() + ", " + is.str());
  const std::size_t k = ks[0], m = is[0];
  if (k > m) throw Error(ErrorCode::ShapeMismatch, "conv2d_valid: kernel " + ks.str() + " larger than image " + is.str());
  const std::size_t n = conv_output_size(k, m);
  auto w = kernel.reals(), img = image.reals();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v) s += w[u * k + v] * img[(i + u) * m + (j + v)];
      out[i * n + j] = s;
    }
  return Tensor::real(Shape{n, n}, std::move(out));
}

/// Applies a scalar map pointwise to a real tensor.
template <class Fn>
Tensor elementwise(Fn&& fn, const Tensor& x) {
  detail::require_real(x, "elementwise");
  auto a = x.reals();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return Tensor::real(x.shape(), std::move(out));
}

/// Pointwise map on bit tensors.
template <class Fn>
Tensor elementwise_bits(Fn&& fn, const Tensor& x) {
  auto a = x.bit_data();
  std::vector<std::uint8_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<std::uint8_t>(fn(a[i]) & 1u);
  return Tensor::bits(x.shape(), std::move(out));
}

inline double sigmoid(double x) {
  // exp(x) / (exp(x) + 1), arranged so neither branch overflows.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (e + 1.0);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// Max-shifted softmax over all entries.
inline Tensor softmax(const Tensor& x) {
  auto a = x.reals();
  double mx = -INFINITY;
  for (double v : a) mx = std::max(mx, v);
  std::vector<double> out(a.size());
  double z = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) z += (out[i] = std::exp(a[i] - mx));
  for (double& v : out) v /= z;
  return Tensor::real(x.shape(), std::move(out));
}

inline double logsumexp(std::span<const double> a) {
  double mx = -INFINITY;
  for (double v : a) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : a) z += std::exp(v - mx);
  return mx + std::log(z);
}

}  // namespace paralens
