#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "paralens/tensor.hpp"

namespace paralens {

struct TensorType {
  Shape shape;
  ScalarKind kind = ScalarKind::Real64;

  bool operator==(const TensorType&) const = default;
  std::string str() const { return std::string(to_string(kind)) + shape.str(); }
};

inline TensorType real_type(Shape s) { return {std::move(s), ScalarKind::Real64}; }
inline TensorType bit_type(Shape s) { return {std::move(s), ScalarKind::Z2}; }

// Objects of the (strict) monoidal category: a list of tensor types. The
// monoidal product is list concatenation and the unit is the empty list.
using Port = std::vector<TensorType>;

// A point of (or tangent at) a Port.
using Bundle = std::vector<Tensor>;

inline Port operator+(Port a, const Port& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline std::string to_string(const Port& p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? ", " : "") + p[i].str();
  return s + ")";
}

inline std::size_t element_count(const Port& p) {
  std::size_t n = 0;
  for (const auto& t : p) n += t.shape.size();
  return n;
}

inline Port port_of(const Bundle& b) {
  Port p;
  p.reserve(b.size());
  for (const auto& t : b) p.push_back({t.shape(), t.kind()});
  return p;
}

inline void check_bundle(const Port& expected, const Bundle& b, const std::string& where) {
  if (port_of(b) != expected)
    throw Error(ErrorCode::InterfaceMismatch, where + ": expected " + to_string(expected) + ", got " + to_string(port_of(b)));
}

inline Bundle zeros(const Port& p) {
  Bundle b;
  b.reserve(p.size());
  for (const auto& t : p) b.push_back(Tensor::zeros(t.shape, t.kind));
  return b;
}

inline Bundle concat(Bundle a, const Bundle& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Splits a bundle after its first n tensors.
inline std::pair<Bundle, Bundle> split(const Bundle& b, std::size_t n) {
  if (n > b.size()) throw Error(ErrorCode::InterfaceMismatch, "split point beyond bundle of " + std::to_string(b.size()));
  return {Bundle(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(n)),
          Bundle(b.begin() + static_cast<std::ptrdiff_t>(n), b.end())};
}

inline Bundle slice(const Bundle& b, std::size_t first, std::size_t count) {
  if (first + count > b.size()) throw Error(ErrorCode::InterfaceMismatch, "slice beyond bundle end");
  return Bundle(b.begin() + static_cast<std::ptrdiff_t>(first), b.begin() + static_cast<std::ptrdiff_t>(first + count));
}

inline Bundle add(const Bundle& a, const Bundle& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::InterfaceMismatch, "add: bundles of different length");
  Bundle out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(tensor_add(a[i], b[i]));
  return out;
}

inline Bundle scale(double c, const Bundle& a) {
  Bundle out;
  out.reserve(a.size());
  for (const auto& t : a) out.push_back(scale(c, t));
  return out;
}

inline bool identical(const Bundle& a, const Bundle& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].identical(b[i])) return false;
  return true;
}

/// Flattens a bundle into one row-major buffer, tensor by tensor.
inline std::vector<double> flatten(const Bundle& b) {
  std::vector<double> out;
  for (const auto& t : b) {
    auto v = t.to_vector();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

/// Inverse of flatten for a given port. Bits are taken as value != 0.
inline Bundle unflatten(const Port& p, std::span<const double> flat) {
  if (flat.size() != element_count(p))
    throw Error(ErrorCode::ShapeMismatch, "unflatten: " + std::to_string(flat.size()) + " values for " + to_string(p));
  Bundle out;
  std::size_t off = 0;
  for (const auto& t : p) {
    const std::size_t n = t.shape.size();
    if (t.kind == ScalarKind::Real64) {
      out.push_back(Tensor::real(t.shape, std::vector<double>(flat.begin() + off, flat.begin() + off + n)));
    } else {
      std::vector<std::uint8_t> bits(n);
      for (std::size_t i = 0; i < n; ++i) bits[i] = flat[off + i] != 0.0;
      out.push_back(Tensor::bits(t.shape, std::move(bits)));
    }
    off += n;
  }
  return out;
}

/// A pair of objects A/A': points travel forward, tangents travel backward.
struct Interface {
  Port point;
  Port tangent;

  bool operator==(const Interface&) const = default;

  /// The interface the reverse-derivative functor assigns to A: A/A.
  static Interface of(Port p) { return {p, std::move(p)}; }
  static Interface unit() { return {}; }

  std::string str() const { return to_string(point) + "/" + to_string(tangent); }
};

inline Interface operator*(const Interface& a, const Interface& b) { return {a.point + b.point, a.tangent + b.tangent}; }

/// A bidirectional map: forward A -> B and backward A x B' -> A'.
struct Lens {
  Interface src;
  Interface dst;
  std::function<Bundle(const Bundle&)> forward;
  std::function<Bundle(const Bundle&, const Bundle&)> backward;

  /// forward with interface checks on both ends.
  Bundle get(const Bundle& a) const {
    check_bundle(src.point, a, "lens get input");
    Bundle b = forward(a);
    check_bundle(dst.point, b, "lens get output");
    return b;
  }

  /// backward with interface checks on both ends.
  Bundle put(const Bundle& a, const Bundle& db) const {
    check_bundle(src.point, a, "lens put point");
    check_bundle(dst.tangent, db, "lens put tangent");
    Bundle da = backward(a, db);
    check_bundle(src.tangent, da, "lens put output");
    return da;
  }
};

inline Lens identity_lens(const Interface& i) {
  return {i, i, [](const Bundle& a) { return a; }, [](const Bundle&, const Bundle& db) { return db; }};
}

/// Sequential composite f ; g. The backward pass recomputes f's forward.
inline Lens compose_lens(const Lens& f, const Lens& g) {
  if (f.dst != g.src)
    throw Error(ErrorCode::InterfaceMismatch, "compose_lens: " + f.dst.str() + " does not match " + g.src.str());
  return {f.src, g.dst,
          [f = f.forward, g = g.forward](const Bundle& a) { return g(f(a)); },
          [ff = f.forward, fb = f.backward, gb = g.backward](const Bundle& a, const Bundle& dc) {
            return fb(a, gb(ff(a), dc));
          }};
}

/// Monoidal product: acts componentwise on A x C -> B x D.
inline Lens tensor_lens(const Lens& f, const Lens& g) {
  const std::size_t na = f.src.point.size();
  const std::size_t nb = f.dst.tangent.size();
  return {f.src * g.src, f.dst * g.dst,
          [na, ff = f.forward, gf = g.forward](const Bundle& ac) {
            auto [a, c] = split(ac, na);
            return concat(ff(a), gf(c));
          },
          [na, nb, fb = f.backward, gb = g.backward](const Bundle& ac, const Bundle& dbd) {
            auto [a, c] = split(ac, na);
            auto [db, dd] = split(dbd, nb);
            return concat(fb(a, db), gb(c, dd));
          }};
}

/// Structural map of the cartesian structure: output j is input `picks[j]`.
/// Covers copies, projections, permutations and discards. Its backward pass
/// sends each incoming tangent back to its source slot and adds tangents that
/// land on the same slot, padding untouched slots with zero.
inline Lens wiring_lens(const Port& in, std::vector<std::size_t> picks) {
  Port out;
  out.reserve(picks.size());
  for (auto i : picks) {
    if (i >= in.size())
      throw Error(ErrorCode::InterfaceMismatch, "wiring_lens: index " + std::to_string(i) + " outside " + to_string(in));
    out.push_back(in[i]);
  }
  return {Interface::of(in), Interface::of(out),
          [picks](const Bundle& a) {
            Bundle b;
            b.reserve(picks.size());
            for (auto i : picks) b.push_back(a[i]);
            return b;
          },
          [in, picks](const Bundle&, const Bundle& db) {
            Bundle da = zeros(in);
            for (std::size_t j = 0; j < picks.size(); ++j) da[picks[j]] = tensor_add(da[picks[j]], db[j]);
            return da;
          }};
}

/// Copy map A -> A x A. Its reverse derivative is addition.
inline Lens copy_lens(const Port& p) {
  std::vector<std::size_t> picks;
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t i = 0; i < p.size(); ++i) picks.push_back(i);
  return wiring_lens(p, std::move(picks));
}

/// Symmetry A x B -> B x A.
inline Lens swap_lens(const Port& a, const Port& b) {
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < b.size(); ++i) picks.push_back(a.size() + i);
  for (std::size_t i = 0; i < a.size(); ++i) picks.push_back(i);
  return wiring_lens(a + b, std::move(picks));
}

}  // namespace paralens
