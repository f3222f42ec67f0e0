#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "paralens/para.hpp"
#include "paralens/rng.hpp"

namespace paralens {

// Layers over smooth (and, where the definition only needs a semiring, Z2)
// tensors, each registered as <f, R[f]> via lift_primitive. Composite layers
// are built with para_compose and get their backward pass from lens
// composition alone.

/// Records how close the most recent forward passes came to a point where
/// relu or maxpool is not differentiable. Finite-difference harnesses use it
/// to skip probes sitting on a kink or a tie.
class KinkMonitor {
 public:
  static double& margin() {
    thread_local double m = std::numeric_limits<double>::infinity();
    return m;
  }
  static void reset() { margin() = std::numeric_limits<double>::infinity(); }
  static void record(double distance) { margin() = std::min(margin(), distance); }
};

enum class Activation { Identity, Sigmoid, Relu };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
  }
  return "?";
}

/// (R^{b x a}, M, x |-> M x). Backward: (delta (x) x, M^T delta).
inline ParaLens linear(std::size_t a, std::size_t b, ScalarKind kind = ScalarKind::Real64) {
  if (a == 0 || b == 0) throw Error(ErrorCode::ShapeMismatch, "linear: dimensions must be positive");
  return lift_primitive(
      "linear(" + std::to_string(a) + "," + std::to_string(b) + ")", {{Shape{b, a}, kind}}, {{Shape{a}, kind}},
      {{Shape{b}, kind}}, [](const Bundle& mx) { return Bundle{matmul(mx[0], mx[1])}; },
      [](const Bundle& mx, const Bundle& d) { return Bundle{outer(d[0], mx[1]), matmul_transposed(mx[0], d[0])}; });
}

/// (R^n, +). The reverse derivative of + is the copy map.
inline ParaLens bias(std::size_t n, ScalarKind kind = ScalarKind::Real64) {
  if (n == 0) throw Error(ErrorCode::ShapeMismatch, "bias: dimension must be positive");
  return lift_primitive(
      "bias(" + std::to_string(n) + ")", {{Shape{n}, kind}}, {{Shape{n}, kind}}, {{Shape{n}, kind}},
      [](const Bundle& bx) { return Bundle{tensor_add(bx[0], bx[1])}; },
      [](const Bundle&, const Bundle& d) { return Bundle{d[0], d[0]}; });
}

/// Trivially parameterised pointwise activation on R^n.
inline ParaLens activation(Activation kind, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::ShapeMismatch, "activation: dimension must be positive");
  Port p{real_type(Shape{n})};
  std::string name = std::string(to_string(kind)) + "(" + std::to_string(n) + ")";
  switch (kind) {
    case Activation::Identity:
      return lift_primitive(
          name, {}, p, p, [](const Bundle& x) { return x; }, [](const Bundle&, const Bundle& d) { return d; });
    case Activation::Sigmoid:
      return lift_primitive(
          name, {}, p, p, [](const Bundle& x) { return Bundle{elementwise(sigmoid, x[0])}; },
          [](const Bundle& x, const Bundle& d) {
            Tensor s = elementwise(sigmoid, x[0]);
            Tensor ds = elementwise([](double v) { return v * (1.0 - v); }, s);
            return Bundle{hadamard(ds, d[0])};
          });
    case Activation::Relu:
      return lift_primitive(
          name, {}, p, p,
          [](const Bundle& x) {
            for (double v : x[0].reals()) KinkMonitor::record(std::abs(v));
            return Bundle{elementwise(relu, x[0])};
          },
          [](const Bundle& x, const Bundle& d) {
            // The positive indicator is strict, so the derivative at 0 is 0.
            Tensor ind = elementwise([](double v) { return v > 0.0 ? 1.0 : 0.0; }, x[0]);
            return Bundle{hadamard(ind, d[0])};
          });
  }
  throw Error(ErrorCode::ValidationError, "activation: unknown kind");
}

/// Trivially parameterised softargmax on R^n; backward is J^T d = s * (d - <s, d>).
inline ParaLens softargmax(std::size_t n) {
  Port p{real_type(Shape{n})};
  return lift_primitive(
      "softargmax(" + std::to_string(n) + ")", {}, p, p, [](const Bundle& x) { return Bundle{softmax(x[0])}; },
      [](const Bundle& x, const Bundle& d) {
        Tensor s = softmax(x[0]);
        const double sd = dot(s, d[0]).item();
        return Bundle{hadamard(s, elementwise([sd](double v) { return v - sd; }, d[0]))};
      });
}

/// linear ; bias ; activation. Parameter bundle is (bias, matrix).
inline ParaLens dense(std::size_t a, std::size_t b, Activation act) {
  ParaLens out = para_chain({linear(a, b), bias(b), activation(act, b)});
  out.name = "dense(" + std::to_string(a) + "," + std::to_string(b) + "," + to_string(act) + ")";
  return out;
}

/// Convolution of an m x m image with a k x k kernel parameter.
inline ParaLens conv_layer(std::size_t k, std::size_t m) {
  if (k == 0 || k > m)
    throw Error(ErrorCode::ShapeMismatch, "conv_layer: kernel " + std::to_string(k) + " does not fit image " + std::to_string(m));
  const std::size_t n = conv_output_size(k, m);
  return lift_primitive(
      "conv(" + std::to_string(k) + "," + std::to_string(m) + ")", {real_type(Shape{k, k})}, {real_type(Shape{m, m})},
      {real_type(Shape{n, n})}, [](const Bundle& ki) { return Bundle{conv2d_valid(ki[0], ki[1])}; },
      [k, m, n](const Bundle& ki, const Bundle& d) {
        auto w = ki[0].reals(), img = ki[1].reals(), dy = d[0].reals();
        std::vector<double> dw(k * k, 0.0), dimg(m * m, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = dy[i * n + j];
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v) {
                dw[u * k + v] += img[(i + u) * m + (j + v)] * g;
                dimg[(i + u) * m + (j + v)] += w[u * k + v] * g;
              }
          }
        return Bundle{Tensor::real(Shape{k, k}, std::move(dw)), Tensor::real(Shape{m, m}, std::move(dimg))};
      });
}

/// Max over each k x k window of a (k n) x (k n) image. Ties go to the first
/// maximum in row-major order; the backward pass routes each delta there.
inline ParaLens maxpool(std::size_t k, std::size_t n) {
  if (k == 0 || n == 0) throw Error(ErrorCode::ShapeMismatch, "maxpool: sizes must be positive");
  const std::size_t m = k * n;
  auto argmax = [k, n, m](std::span<const double> img, std::size_t i, std::size_t j, bool record) {
    std::size_t best = (i * k) * m + j * k;
    double top = img[best], second = -std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < k; ++u)
      for (std::size_t v = 0; v < k; ++v) {
        const std::size_t idx = (i * k + u) * m + (j * k + v);
        if (idx == best) continue;
        if (img[idx] > top) {
          second = top;
          top = img[idx];
          best = idx;
        } else {
          second = std::max(second, img[idx]);
        }
      }
    if (record && k > 1) KinkMonitor::record(top - second);
    return best;
  };
  return lift_primitive(
      "maxpool(" + std::to_string(k) + "," + std::to_string(n) + ")", {}, {real_type(Shape{m, m})}, {real_type(Shape{n, n})},
      [argmax, n](const Bundle& x) {
        auto img = x[0].reals();
        std::vector<double> out(n * n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) out[i * n + j] = img[argmax(img, i, j, true)];
        return Bundle{Tensor::real(Shape{n, n}, std::move(out))};
      },
      [argmax, n, m](const Bundle& x, const Bundle& d) {
        auto img = x[0].reals();
        auto dy = d[0].reals();
        std::vector<double> dx(m * m, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) dx[argmax(img, i, j, false)] += dy[i * n + j];
        return Bundle{Tensor::real(Shape{m, m}, std::move(dx))};
      });
}

/// Relabels the shape of a single tensor (e.g. an n x n image to a vector).
inline ParaLens reshape_layer(Shape from, Shape to) {
  if (from.size() != to.size()) throw Error(ErrorCode::ShapeMismatch, "reshape_layer: " + from.str() + " to " + to.str());
  return lift_primitive(
      "reshape" + to.str(), {}, {real_type(from)}, {real_type(to)}, [to](const Bundle& x) { return Bundle{x[0].reshape(to)}; },
      [from](const Bundle&, const Bundle& d) { return Bundle{d[0].reshape(from)}; });
}

/// conv ; maxpool ; relu on an m x m image; the conv output must tile by k_pool.
inline ParaLens cpr(std::size_t k_conv, std::size_t m, std::size_t k_pool) {
  const std::size_t n = conv_output_size(k_conv, m);
  if (k_pool == 0 || n % k_pool != 0)
    throw Error(ErrorCode::ShapeMismatch, "cpr: conv output " + std::to_string(n) + " is not divisible by pool " + std::to_string(k_pool));
  const std::size_t pooled = n / k_pool;
  ParaLens act = activation(Activation::Relu, pooled * pooled);
  ParaLens out = para_chain({conv_layer(k_conv, m), maxpool(k_pool, pooled), reshape_layer(Shape{pooled, pooled}, Shape{pooled * pooled}),
                             act, reshape_layer(Shape{pooled * pooled}, Shape{pooled, pooled})});
  out.name = "cpr(" + std::to_string(k_conv) + "," + std::to_string(m) + "," + std::to_string(k_pool) + ")";
  return out;
}

/// f and g share one parameter port via the copy map; p' = p'_f + p'_g.
inline ParaLens weight_tie(const ParaLens& f, const ParaLens& g) {
  if (f.param != g.param)
    throw Error(ErrorCode::InterfaceMismatch, "weight_tie: " + f.param.str() + " vs " + g.param.str());
  ParaLens both = para_tensor(f, g);
  ParaLens out = reparameterise(both, copy_lens(f.param.point));
  out.name = "tie(" + f.name + ", " + g.name + ")";
  return out;
}

/// n copies of f on n inputs with one shared parameter; parameter tangents sum.
inline ParaLens batch(const ParaLens& f, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::ValidationError, "batch: size must be at least 1");
  if (n == 1) return f;
  ParaLens copies = f;
  for (std::size_t i = 1; i < n; ++i) copies = para_tensor(copies, f);
  std::vector<std::size_t> picks;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < f.param.point.size(); ++i) picks.push_back(i);
  ParaLens out = reparameterise(copies, wiring_lens(f.param.point, std::move(picks)));
  out.name = "batch(" + f.name + ", " + std::to_string(n) + ")";
  return out;
}

/// Uniform(-sqrt(6/(rows+cols)), +) for matrices and kernels, zero for
/// vectors, random bits for Z2 ports.
inline Bundle init_params(const Port& p, Rng& rng) {
  Bundle out;
  for (const auto& t : p) {
    const std::size_t n = t.shape.size();
    if (t.kind == ScalarKind::Z2) {
      std::vector<std::uint8_t> bits(n);
      for (auto& b : bits) b = rng.coin();
      out.push_back(Tensor::bits(t.shape, std::move(bits)));
    } else if (t.shape.rank() == 2) {
      const double limit = std::sqrt(6.0 / double(t.shape[0] + t.shape[1]));
      std::vector<double> v(n);
      for (auto& x : v) x = rng.uniform(-limit, limit);
      out.push_back(Tensor::real(t.shape, std::move(v)));
    } else {
      out.push_back(Tensor::zeros(t.shape, t.kind));
    }
  }
  return out;
}

}  // namespace paralens
