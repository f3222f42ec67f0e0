#pragma once

#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "paralens/lens.hpp"

namespace paralens {

/// A parametric map (P, f : P x A -> B). `apply` receives the parameter
/// bundle followed by the input bundle.
struct ParametricMap {
  Port param;
  Port src;
  Port dst;
  std::function<Bundle(const Bundle&)> apply;

  Bundle operator()(const Bundle& p, const Bundle& a) const { return apply(concat(p, a)); }
};

/// Para composite: (P, f) ; (Q, g) has parameter Q x P and runs g(q, f(p, a)).
inline ParametricMap para_compose(const ParametricMap& f, const ParametricMap& g) {
  if (f.dst != g.src)
    throw Error(ErrorCode::InterfaceMismatch, "para_compose: " + to_string(f.dst) + " does not match " + to_string(g.src));
  const std::size_t nq = g.param.size();
  return {g.param + f.param, f.src, g.dst, [nq, fa = f.apply, ga = g.apply](const Bundle& qpa) {
            auto [q, pa] = split(qpa, nq);
            return ga(concat(q, fa(pa)));
          }};
}

/// k-fold Para self-composite of an endo-map P -> P parameterised by D. The
/// result is parameterised by D^k, ordered as Para composition orders it: the
/// data consumed by the last step comes first.
inline ParametricMap para_iterate(const ParametricMap& step, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::ValidationError, "para_iterate: k must be at least 1");
  if (step.src != step.dst) throw Error(ErrorCode::InterfaceMismatch, "para_iterate: step is not an endo-map");
  ParametricMap out = step;
  for (std::size_t i = 1; i < k; ++i) out = para_compose(out, step);
  return out;
}

/// A morphism of Para(Lens): a lens (P x A)/(P' x A') -> B/B'.
struct ParaLens {
  std::string name;
  Interface param;
  Interface src;
  Interface dst;
  Lens lens;

  Bundle forward(const Bundle& p, const Bundle& a) const { return lens.forward(concat(p, a)); }

  /// Returns (p', a').
  std::pair<Bundle, Bundle> backward(const Bundle& p, const Bundle& a, const Bundle& db) const {
    return split(lens.backward(concat(p, a), db), param.tangent.size());
  }

  /// Checked variants, used at API boundaries.
  Bundle get(const Bundle& p, const Bundle& a) const { return lens.get(concat(p, a)); }
  std::pair<Bundle, Bundle> put(const Bundle& p, const Bundle& a, const Bundle& db) const {
    return split(lens.put(concat(p, a), db), param.tangent.size());
  }
};

inline void check_para(const ParaLens& f) {
  if (f.lens.src != f.param * f.src || f.lens.dst != f.dst)
    throw Error(ErrorCode::InterfaceMismatch, f.name + ": underlying lens interfaces do not match the declared ports");
}

/// Views an ordinary lens as a parametric lens with the unit parameter.
inline ParaLens trivially_parametric(std::string name, const Lens& l) {
  return {std::move(name), Interface::unit(), l.src, l.dst, l};
}

inline ParaLens para_identity(const Interface& i) { return trivially_parametric("id", identity_lens(i)); }

/// Reorders a product of interfaces blockwise. Output block k is input block
/// order[k]; the backward pass applies the inverse permutation to tangents.
inline Lens permute_blocks(const std::vector<Interface>& blocks, const std::vector<std::size_t>& order) {
  if (order.size() != blocks.size()) throw Error(ErrorCode::InterfaceMismatch, "permute_blocks: order is not a permutation");
  std::vector<std::size_t> pt_off(blocks.size() + 1, 0), tg_off(blocks.size() + 1, 0);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    pt_off[i + 1] = pt_off[i] + blocks[i].point.size();
    tg_off[i + 1] = tg_off[i] + blocks[i].tangent.size();
  }
  Interface in, out;
  std::vector<bool> seen(blocks.size(), false);
  for (const auto& b : blocks) in = in * b;
  for (auto k : order) {
    if (k >= blocks.size() || seen[k]) throw Error(ErrorCode::InterfaceMismatch, "permute_blocks: order is not a permutation");
    seen[k] = true;
    out = out * blocks[k];
  }
  return {in, out,
          [order, pt_off](const Bundle& a) {
            Bundle b;
            for (auto k : order) b.insert(b.end(), a.begin() + pt_off[k], a.begin() + pt_off[k + 1]);
            return b;
          },
          [order, tg_off, blocks](const Bundle&, const Bundle& db) {
            Bundle da(tg_off.back());
            std::size_t pos = 0;
            for (auto k : order) {
              const std::size_t n = blocks[k].tangent.size();
              std::copy(db.begin() + pos, db.begin() + pos + n, da.begin() + tg_off[k]);
              pos += n;
            }
            return da;
          }};
}

/// Para composite of parametric lenses. For f : A -> B with parameter P and
/// g : B -> C with parameter Q, the result has parameter Q x P and underlying
/// lens (1_Q x f) ; g.
inline ParaLens para_compose(const ParaLens& f, const ParaLens& g) {
  if (f.dst != g.src)
    throw Error(ErrorCode::InterfaceMismatch,
                "para_compose(" + f.name + ", " + g.name + "): " + f.dst.str() + " does not match " + g.src.str());
  return {f.name + " ; " + g.name, g.param * f.param, f.src, g.dst,
          compose_lens(tensor_lens(identity_lens(g.param), f.lens), g.lens)};
}

/// Left-to-right Para composite of a chain.
inline ParaLens para_chain(const std::vector<ParaLens>& layers) {
  if (layers.empty()) throw Error(ErrorCode::ValidationError, "para_chain: empty chain");
  ParaLens out = layers.front();
  for (std::size_t i = 1; i < layers.size(); ++i) out = para_compose(out, layers[i]);
  return out;
}

/// Parallel composite: parameters P x Q, inputs A x C, outputs B x D.
inline ParaLens para_tensor(const ParaLens& f, const ParaLens& g) {
  // (P, Q, A, C) -> (P, A, Q, C), then f x g.
  Lens shuffle = permute_blocks({f.param, g.param, f.src, g.src}, {0, 2, 1, 3});
  return {"(" + f.name + " x " + g.name + ")", f.param * g.param, f.src * g.src, f.dst * g.dst,
          compose_lens(shuffle, tensor_lens(f.lens, g.lens))};
}

/// Replaces f's parameter port by r's source: r.get feeds f's parameter and
/// r.put consumes the p' that f emits.
inline ParaLens reparameterise(const ParaLens& f, const Lens& r) {
  if (r.dst != f.param)
    throw Error(ErrorCode::InterfaceMismatch,
                "reparameterise(" + f.name + "): reparameterisation targets " + r.dst.str() + ", parameter port is " + f.param.str());
  return {f.name, r.src, f.src, f.dst, compose_lens(tensor_lens(r, identity_lens(f.src)), f.lens)};
}

/// Registers a primitive f : P x A -> B together with its reverse derivative
/// R[f] : (P x A) x B -> P x A as the parametric lens <f, R[f]>.
inline ParaLens lift_primitive(std::string name, Port param, Port src, Port dst,
                               std::function<Bundle(const Bundle&)> forward,
                               std::function<Bundle(const Bundle&, const Bundle&)> reverse) {
  Interface p = Interface::of(std::move(param));
  Interface a = Interface::of(std::move(src));
  Interface b = Interface::of(std::move(dst));
  return {std::move(name), p, a, b, Lens{p * a, b, std::move(forward), std::move(reverse)}};
}

/// The capture lens: unit -> A with parameter A. Its get passes the parameter
/// through and its put hands the incoming tangent back to the parameter port.
/// Composing it in front of a model turns the model's input into a parameter.
inline ParaLens input_capture_lens(const Interface& i) { return {"capture", i, Interface::unit(), i, identity_lens(i)}; }

}  // namespace paralens
