#pragma once

#include <cmath>
#include <string>

#include "paralens/para.hpp"

namespace paralens {

/// A stateful parameter update: a lens (S x P)/(S x P) -> P/P'. Its get
/// chooses the parameter handed to the model, its put turns the model's p'
/// into the next (state, parameter) pair.
struct OptimiserLens {
  std::string name;
  Port state;
  Port param;
  Lens lens;

  Bundle initial_state() const { return zeros(state); }

  Bundle get(const Bundle& s, const Bundle& p) const { return lens.forward(concat(s, p)); }

  /// Returns (s_new, p_new).
  std::pair<Bundle, Bundle> put(const Bundle& s, const Bundle& p, const Bundle& dp) const {
    return split(lens.backward(concat(s, p), dp), state.size());
  }
};

namespace detail {

inline OptimiserLens make_optimiser(std::string name, Port state, Port param,
                                    std::function<Bundle(const Bundle&, const Bundle&)> get,
                                    std::function<Bundle(const Bundle&, const Bundle&, const Bundle&)> put) {
  const std::size_t ns = state.size();
  Lens l{Interface::of(state + param), Interface::of(param),
         [ns, get = std::move(get)](const Bundle& sp) {
           auto [s, p] = split(sp, ns);
           return get(s, p);
         },
         [ns, put = std::move(put)](const Bundle& sp, const Bundle& dp) {
           auto [s, p] = split(sp, ns);
           return put(s, p, dp);
         }};
  return {std::move(name), std::move(state), std::move(param), std::move(l)};
}

inline void require_real(const Port& p, const std::string& who) {
  for (const auto& t : p)
    if (t.kind != ScalarKind::Real64) throw Error(ErrorCode::KindMismatch, who + " needs real64 parameters");
}

inline Bundle project(const Bundle&, const Bundle& p) { return p; }

}  // namespace detail

enum class Polarity { Ascent, Descent };

/// get = id, put(p, p') = p + p' (ascent) or p - p' (descent). Over Z2 both
/// are XOR.
inline OptimiserLens basic_update(const Port& param, Polarity polarity) {
  return detail::make_optimiser(
      polarity == Polarity::Ascent ? "ascent" : "descent", {}, param, detail::project,
      [polarity](const Bundle&, const Bundle& p, const Bundle& dp) {
        Bundle out;
        for (std::size_t i = 0; i < p.size(); ++i)
          out.push_back(polarity == Polarity::Ascent ? tensor_add(p[i], dp[i]) : tensor_sub(p[i], dp[i]));
        return out;
      });
}

namespace detail {

// s' = -gamma s + p'; returns (s', p + s').
inline Bundle momentum_put(double gamma, const Bundle& s, const Bundle& p, const Bundle& dp) {
  Bundle snew, pnew;
  for (std::size_t i = 0; i < p.size(); ++i) {
    Tensor si = tensor_add(scale(-gamma, s[i]), dp[i]);
    pnew.push_back(tensor_add(p[i], si));
    snew.push_back(std::move(si));
  }
  return concat(snew, pnew);
}

}  // namespace detail

inline OptimiserLens momentum(const Port& param, double gamma = 0.9) {
  detail::require_real(param, "momentum");
  if (gamma < 0) throw Error(ErrorCode::ValidationError, "momentum: gamma must be >= 0");
  return detail::make_optimiser("momentum", param, param, detail::project,
                                [gamma](const Bundle& s, const Bundle& p, const Bundle& dp) {
                                  return detail::momentum_put(gamma, s, p, dp);
                                });
}

/// Momentum whose get hands the model the lookahead p + gamma s.
inline OptimiserLens nesterov(const Port& param, double gamma = 0.9) {
  detail::require_real(param, "nesterov");
  if (gamma < 0) throw Error(ErrorCode::ValidationError, "nesterov: gamma must be >= 0");
  return detail::make_optimiser(
      "nesterov", param, param,
      [gamma](const Bundle& s, const Bundle& p) {
        Bundle out;
        for (std::size_t i = 0; i < p.size(); ++i) out.push_back(tensor_add(p[i], scale(gamma, s[i])));
        return out;
      },
      [gamma](const Bundle& s, const Bundle& p, const Bundle& dp) { return detail::momentum_put(gamma, s, p, dp); });
}

/// g' = g + p' * p'; p + (eps / (delta + sqrt g')) * p'.
inline OptimiserLens adagrad(const Port& param, double epsilon, double delta = 1e-7) {
  detail::require_real(param, "adagrad");
  if (!(epsilon > 0) || !(delta > 0)) throw Error(ErrorCode::ValidationError, "adagrad: epsilon and delta must be > 0");
  return detail::make_optimiser("adagrad", param, param, detail::project,
                                [epsilon, delta](const Bundle& g, const Bundle& p, const Bundle& dp) {
                                  Bundle gnew, pnew;
                                  for (std::size_t i = 0; i < p.size(); ++i) {
                                    auto gv = g[i].reals(), pv = p[i].reals(), dv = dp[i].reals();
                                    std::vector<double> go(gv.size()), po(gv.size());
                                    for (std::size_t j = 0; j < gv.size(); ++j) {
                                      go[j] = gv[j] + dv[j] * dv[j];
                                      po[j] = pv[j] + epsilon / (delta + std::sqrt(go[j])) * dv[j];
                                    }
                                    gnew.push_back(Tensor::real(p[i].shape(), std::move(go)));
                                    pnew.push_back(Tensor::real(p[i].shape(), std::move(po)));
                                  }
                                  return concat(gnew, pnew);
                                });
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 0.001;
  double delta = 1e-8;
  // Store the bias-corrected moments in the state instead of the raw ones.
  bool store_corrected = false;
};

/// State is (m, v, t): raw first and second moments plus a step counter held
/// in a rank-0 real tensor. Put increments t and applies
/// p + (eps / (delta + sqrt v^)) * m^ with m^ = m'/(1-b1^t), v^ = v'/(1-b2^t).
inline OptimiserLens adam(const Port& param, const AdamOptions& o = {}) {
  detail::require_real(param, "adam");
  if (!(o.beta1 >= 0 && o.beta1 < 1) || !(o.beta2 >= 0 && o.beta2 < 1))
    throw Error(ErrorCode::ValidationError, "adam: betas must lie in [0, 1)");
  if (!(o.epsilon > 0) || !(o.delta > 0)) throw Error(ErrorCode::ValidationError, "adam: epsilon and delta must be > 0");
  Port state = param + param + Port{real_type(Shape{})};
  const std::size_t n = param.size();
  return detail::make_optimiser(
      o.store_corrected ? "adam(corrected-state)" : "adam", state, param, detail::project,
      [o, n](const Bundle& s, const Bundle& p, const Bundle& dp) {
        const double t = s[2 * n].item() + 1.0;
        const double c1 = 1.0 - std::pow(o.beta1, t);
        const double c2 = 1.0 - std::pow(o.beta2, t);
        Bundle ms, vs, ps;
        for (std::size_t i = 0; i < n; ++i) {
          auto m = s[i].reals(), v = s[n + i].reals(), pv = p[i].reals(), g = dp[i].reals();
          std::vector<double> mo(m.size()), vo(m.size()), po(m.size());
          for (std::size_t j = 0; j < m.size(); ++j) {
            const double m1 = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
            const double v1 = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
            const double mhat = m1 / c1, vhat = v1 / c2;
            po[j] = pv[j] + o.epsilon / (o.delta + std::sqrt(vhat)) * mhat;
            mo[j] = o.store_corrected ? mhat : m1;
            vo[j] = o.store_corrected ? vhat : v1;
          }
          ms.push_back(Tensor::real(p[i].shape(), std::move(mo)));
          vs.push_back(Tensor::real(p[i].shape(), std::move(vo)));
          ps.push_back(Tensor::real(p[i].shape(), std::move(po)));
        }
        Bundle out = concat(concat(ms, vs), Bundle{Tensor::scalar(t)});
        return concat(out, ps);
      });
}

/// Gradient descent-ascent on P x Q: (p, q, p', q') |-> (p - p', q + q').
inline OptimiserLens gda(const Port& descend, const Port& ascend) {
  detail::require_real(descend + ascend, "gda");
  const std::size_t np = descend.size();
  return detail::make_optimiser("gda", {}, descend + ascend, detail::project,
                                [np](const Bundle&, const Bundle& pq, const Bundle& d) {
                                  Bundle out;
                                  for (std::size_t i = 0; i < pq.size(); ++i)
                                    out.push_back(i < np ? tensor_sub(pq[i], d[i]) : tensor_add(pq[i], d[i]));
                                  return out;
                                });
}

/// Parallel composite of two optimisers on P x Q, states laid out (S_P, S_Q).
inline OptimiserLens optimiser_tensor(const OptimiserLens& a, const OptimiserLens& b) {
  // (S_a, S_b, P_a, P_b) -> (S_a, P_a, S_b, P_b), then a x b.
  Lens shuffle = permute_blocks({Interface::of(a.state), Interface::of(b.state), Interface::of(a.param), Interface::of(b.param)},
                                {0, 2, 1, 3});
  return {"(" + a.name + " x " + b.name + ")", a.state + b.state, a.param + b.param,
          compose_lens(shuffle, tensor_lens(a.lens, b.lens))};
}

}  // namespace paralens
