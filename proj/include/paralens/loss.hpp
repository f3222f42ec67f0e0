#pragma once

#include <cmath>
#include <string>

#include "paralens/para.hpp"

namespace paralens {

// A loss map on B is a parametric lens B -> L whose parameter port carries the
// true label. Its backward returns (b_t', b_p').
using LossLens = ParaLens;

inline Interface scalar_loss_port() { return Interface::of({real_type(Shape{})}); }

/// 1/2 sum (b_p - b_t)^2, with R = alpha * (b_p - b_t, b_t - b_p).
inline LossLens quadratic_loss(std::size_t b) {
  Port lab{real_type(Shape{b})};
  return lift_primitive(
      "quadratic(" + std::to_string(b) + ")", lab, lab, {real_type(Shape{})},
      [](const Bundle& tp) {
        auto t = tp[0].reals(), p = tp[1].reals();
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
        return Bundle{Tensor::scalar(0.5 * s)};
      },
      [](const Bundle& tp, const Bundle& alpha) {
        const double a = alpha[0].item();
        Tensor diff = tensor_sub(tp[1], tp[0]);
        return Bundle{scale(-a, diff), scale(a, diff)};
      });
}

inline void require_distribution(const Tensor& t) {
  double s = 0.0;
  for (double v : t.reals()) {
    if (!(v >= 0.0)) throw Error(ErrorCode::NotADistribution, "label has a negative or NaN entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-6) throw Error(ErrorCode::NotADistribution, "label sums to " + std::to_string(s));
}

/// Cross entropy of Softmax(b_p) against the distribution b_t:
/// sum_i (b_t)_i (logsumexp(b_p) - (b_p)_i), i.e. -sum_i (b_t)_i log Softmax(b_p)_i.
/// Backward: alpha * (-log Softmax(b_p), Softmax(b_p) sum(b_t) - b_t).
inline LossLens softmax_ce_loss(std::size_t b) {
  Port lab{real_type(Shape{b})};
  return lift_primitive(
      "softmax_ce(" + std::to_string(b) + ")", lab, lab, {real_type(Shape{})},
      [](const Bundle& tp) {
        require_distribution(tp[0]);
        auto t = tp[0].reals(), p = tp[1].reals();
        const double lse = logsumexp(p);
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * (lse - p[i]);
        return Bundle{Tensor::scalar(s)};
      },
      [](const Bundle& tp, const Bundle& alpha) {
        require_distribution(tp[0]);
        const double a = alpha[0].item();
        auto t = tp[0].reals(), p = tp[1].reals();
        const double lse = logsumexp(p);
        double mass = 0.0;
        for (double v : t) mass += v;
        std::vector<double> dt(t.size()), dp(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
          const double s = std::exp(p[i] - lse);
          dt[i] = a * (lse - p[i]);
          dp[i] = a * (s * mass - t[i]);
        }
        return Bundle{Tensor::real(tp[0].shape(), std::move(dt)), Tensor::real(tp[1].shape(), std::move(dp))};
      });
}

/// Converts logits into a label distribution for softmax_ce_loss.
inline Tensor distribution_from_logits(const Tensor& logits) { return softmax(logits); }

/// b_t . b_p summed over every tensor of the port, with R = (alpha b_p, alpha b_t).
inline LossLens dot_loss(const Port& labels) {
  return lift_primitive(
      "dot", labels, labels, {real_type(Shape{})},
      [n = labels.size()](const Bundle& tp) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += dot(tp[k], tp[n + k]).item();
        return Bundle{Tensor::scalar(s)};
      },
      [n = labels.size()](const Bundle& tp, const Bundle& alpha) {
        const double a = alpha[0].item();
        Bundle dt, dp;
        for (std::size_t k = 0; k < n; ++k) {
          dt.push_back(scale(a, tp[n + k]));
          dp.push_back(scale(a, tp[k]));
        }
        return concat(dt, dp);
      });
}

inline LossLens dot_loss(std::size_t b) { return dot_loss(Port{real_type(Shape{b})}); }

/// Z2 error b_t + b_p (XOR), with R = (alpha, alpha).
inline LossLens boolean_xor_loss(std::size_t b) {
  Port lab{bit_type(Shape{b})};
  return lift_primitive(
      "xor_loss(" + std::to_string(b) + ")", lab, lab, lab, [](const Bundle& tp) { return Bundle{tensor_add(tp[0], tp[1])}; },
      [](const Bundle& tp, const Bundle& alpha) {
        if (tp[0].kind() != ScalarKind::Z2) throw Error(ErrorCode::KindMismatch, "xor_loss expects z2 tensors");
        return Bundle{alpha[0], alpha[0]};
      });
}

// A learning rate on L is a lens L/L' -> 1/1; its only content is the put
// alpha* : L -> L'.
enum class RateKind { Constant, Identity, Proportional };

struct RateSpec {
  RateKind kind = RateKind::Constant;
  // Constant: alpha(l) = epsilon (signed). Proportional: alpha(l) = -epsilon * l.
  double epsilon = -0.01;
};

inline ParaLens learning_rate(const RateSpec& spec, const Port& loss_port) {
  auto make = [&](std::string name, std::function<Bundle(const Bundle&)> alpha) {
    Lens l{Interface::of(loss_port), Interface::unit(), [](const Bundle&) { return Bundle{}; },
           [alpha = std::move(alpha)](const Bundle& l, const Bundle&) { return alpha(l); }};
    return trivially_parametric(std::move(name), l);
  };
  auto require_real = [&] {
    for (const auto& t : loss_port)
      if (t.kind != ScalarKind::Real64) throw Error(ErrorCode::KindMismatch, "constant/proportional rates need a real64 loss");
  };
  switch (spec.kind) {
    case RateKind::Constant:
      require_real();
      return make("rate(" + std::to_string(spec.epsilon) + ")", [eps = spec.epsilon](const Bundle& l) {
        Bundle out;
        for (const auto& t : l) out.push_back(Tensor::filled(t.shape(), eps));
        return out;
      });
    case RateKind::Identity:
      return make("rate(id)", [](const Bundle& l) { return l; });
    case RateKind::Proportional:
      require_real();
      return make("rate(-" + std::to_string(spec.epsilon) + "*l)", [eps = spec.epsilon](const Bundle& l) {
        return scale(-eps, l);
      });
  }
  throw Error(ErrorCode::ValidationError, "unknown learning rate kind");
}

}  // namespace paralens
