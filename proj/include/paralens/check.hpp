#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "paralens/boolean.hpp"
#include "paralens/layers.hpp"
#include "paralens/loss.hpp"

namespace paralens {

inline Bundle random_bundle(const Port& port, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Bundle out;
  for (const auto& t : port) {
    if (t.kind == ScalarKind::Z2) {
      std::vector<std::uint8_t> b(t.shape.size());
      for (auto& x : b) x = rng.coin();
      out.push_back(Tensor::bits(t.shape, std::move(b)));
    } else {
      std::vector<double> v(t.shape.size());
      for (auto& x : v) x = rng.uniform(lo, hi);
      out.push_back(Tensor::real(t.shape, std::move(v)));
    }
  }
  return out;
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero derivatives from
/// turning rounding noise into huge relative errors.
inline double relative_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double inner(const Bundle& a, const Bundle& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) s += a[i].at(j) * b[i].at(j);
  return s;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check.

struct Probe {
  Bundle point;
  Bundle tangent;
};

struct GradReport {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes within the kink margin of relu/maxpool
  double max_rel_error = 0.0;
  std::optional<std::string> worst;  // description of the worst probe coordinate
  double tolerance = 1e-5;

  bool passed() const { return max_rel_error <= tolerance; }

  void require() const {
    if (!passed())
      throw Error(ErrorCode::ToleranceExceeded, name + ": relative error " + std::to_string(max_rel_error) + " exceeds " +
                                                    std::to_string(tolerance) + " at " + worst.value_or("?"));
  }
};

/// Compares backward(x, d) against central differences of x |-> <d, f(x)>.
inline GradReport grad_check(const std::string& name, const Lens& l, const std::vector<Probe>& probes, double h = 1e-6,
                             double tol = 1e-5, double kink_margin = 1e-4) {
  GradReport rep{name, 0, 0, 0.0, std::nullopt, tol};
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    const auto& [x, d] = probes[pi];
    KinkMonitor::reset();
    l.get(x);
    if (KinkMonitor::margin() < kink_margin) {
      ++rep.skipped;
      continue;
    }
    const auto analytic = flatten(l.put(x, d));
    auto flat = flatten(x);
    const Port port = l.src.point;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double x0 = flat[i];
      flat[i] = x0 + h;
      const double up = inner(d, l.forward(unflatten(port, flat)));
      flat[i] = x0 - h;
      const double down = inner(d, l.forward(unflatten(port, flat)));
      flat[i] = x0;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric);
      if (err > rep.max_rel_error || !std::isfinite(err)) {
        rep.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        std::ostringstream os;
        os << "probe " << pi << " coordinate " << i << " (analytic " << analytic[i] << ", numeric " << numeric << ")";
        rep.worst = os.str();
      }
    }
    ++rep.checked;
  }
  return rep;
}

inline std::vector<Probe> random_probes(const Lens& l, Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<Probe> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({random_bundle(l.src.point, rng, lo, hi), random_bundle(l.dst.tangent, rng)});
  return out;
}

/// Fixes a parametric lens's parameter, leaving a lens on its input alone.
inline Lens fix_parameter(const ParaLens& f, const Bundle& p) {
  const std::size_t np = p.size();
  return {f.src, f.dst, [p, fw = f.lens.forward](const Bundle& a) { return fw(concat(p, a)); },
          [p, np, bw = f.lens.backward](const Bundle& a, const Bundle& d) { return slice(bw(concat(p, a), d), np, a.size()); }};
}

/// Every smooth primitive and layer constructor, at small sizes.
inline std::vector<std::pair<std::string, Lens>> smooth_primitives(Rng& rng) {
  std::vector<std::pair<std::string, Lens>> out;
  auto add = [&](const ParaLens& f) { out.emplace_back(f.name, f.lens); };
  add(linear(3, 4));
  add(bias(5));
  add(activation(Activation::Identity, 4));
  add(activation(Activation::Sigmoid, 4));
  add(activation(Activation::Relu, 4));
  add(softargmax(5));
  add(dense(4, 3, Activation::Sigmoid));
  add(dense(4, 3, Activation::Relu));
  add(conv_layer(2, 4));
  add(conv_layer(1, 3));
  add(maxpool(2, 2));
  add(reshape_layer(Shape{2, 3}, Shape{6}));
  add(cpr(2, 5, 2));
  add(weight_tie(linear(2, 3), linear(2, 3)));
  add(batch(dense(3, 2, Activation::Sigmoid), 3));
  add(quadratic_loss(4));
  add(dot_loss(4));
  // Cross entropy is checked in its prediction argument; its label must stay
  // a distribution.
  LossLens ce = softmax_ce_loss(4);
  Bundle label{softmax(random_bundle({real_type(Shape{4})}, rng)[0])};
  out.emplace_back(ce.name + " w.r.t. prediction", fix_parameter(ce, label));
  return out;
}

/// A random smooth parametric lens R^in -> R^out built from up to `depth`
/// layers with every intermediate width at most max_dim.
inline ParaLens random_smooth_composite(Rng& rng, std::size_t in, std::size_t out, std::size_t depth, std::size_t max_dim = 8) {
  std::vector<ParaLens> layers;
  std::size_t width = in;
  for (std::size_t d = 0; d < depth; ++d) {
    const bool last = d + 1 == depth;
    const std::size_t next = last ? out : 1 + rng.below(max_dim);
    switch (rng.below(last ? 2 : 7)) {
      case 0: layers.push_back(linear(width, next)); width = next; break;
      case 1: {
        static constexpr Activation acts[] = {Activation::Identity, Activation::Sigmoid, Activation::Relu};
        layers.push_back(dense(width, next, acts[rng.below(3)]));
        width = next;
        break;
      }
      case 2: layers.push_back(bias(width)); break;
      case 3: layers.push_back(activation(Activation::Sigmoid, width)); break;
      case 4: layers.push_back(activation(Activation::Relu, width)); break;
      case 5: layers.push_back(softargmax(width)); break;
      case 6:
        // A 2x2 image block: conv with a 1x1 or 2x2 kernel, or a 2x2 maxpool.
        if (width == 4) {
          layers.push_back(reshape_layer(Shape{4}, Shape{2, 2}));
          if (rng.coin()) {
            const std::size_t k = 1 + rng.below(2), n = conv_output_size(k, 2);
            layers.push_back(conv_layer(k, 2));
            layers.push_back(reshape_layer(Shape{n, n}, Shape{n * n}));
            width = n * n;
          } else {
            layers.push_back(maxpool(2, 1));
            layers.push_back(reshape_layer(Shape{1, 1}, Shape{1}));
            width = 1;
          }
        } else {
          layers.push_back(linear(width, 4));
          width = 4;
        }
        break;
    }
  }
  if (width != out) layers.push_back(linear(width, out));
  return para_chain(layers);
}

// ---------------------------------------------------------------------------
// Reverse-derivative axioms RD.1 - RD.5.

enum class Backend { Smooth, Z2 };

inline const char* to_string(Backend b) { return b == Backend::Smooth ? "smooth" : "z2"; }

struct AxiomReport {
  std::string axiom;
  Backend backend;
  std::size_t instances = 0;
  double max_deviation = 0.0;  // relative (floor 1) for smooth, differing bits for z2
};

inline double bundle_deviation(const Bundle& a, const Bundle& b) {
  if (port_of(a) != port_of(b)) return std::numeric_limits<double>::infinity();
  double dev = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].kind() == ScalarKind::Z2) {
      auto x = a[i].bit_data(), y = b[i].bit_data();
      for (std::size_t j = 0; j < x.size(); ++j) dev += x[j] != y[j];
    } else {
      auto x = a[i].reals(), y = b[i].reals();
      for (std::size_t j = 0; j < x.size(); ++j) dev = std::max(dev, relative_error(x[j], y[j], 1.0));
    }
  }
  return dev;
}

/// Pointwise sum f + g of two lenses A -> B: copy ; (f x g) ; add.
inline Lens lens_sum(const Lens& f, const Lens& g) {
  const Port b = f.dst.point;
  const std::size_t nb = b.size();
  Lens plus{Interface::of(b + b), Interface::of(b),
            [nb](const Bundle& xy) {
              auto [x, y] = split(xy, nb);
              return add(x, y);
            },
            [](const Bundle&, const Bundle& d) { return concat(d, d); }};
  return compose_lens(compose_lens(copy_lens(f.src.point), tensor_lens(f, g)), plus);
}

/// Tupling <f, g> : A -> B x C.
inline Lens lens_pair(const Lens& f, const Lens& g) { return compose_lens(copy_lens(f.src.point), tensor_lens(f, g)); }

/// R[f] materialised as the matrix J^T with one column per output coordinate.
inline std::vector<std::vector<double>> transposed_jacobian(const Lens& l, const Bundle& x) {
  const Port out = l.dst.tangent;
  const std::size_t m = element_count(out);
  std::vector<std::vector<double>> cols;
  std::vector<double> e(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    e[j] = 1.0;
    cols.push_back(flatten(l.backward(x, unflatten(out, e))));
    e[j] = 0.0;
  }
  return cols;
}

namespace detail {

/// Smooth lenses are random composites with a fixed random parameter; Z2
/// lenses are random circuits whose variables are all inputs.
struct RandomLens {
  Lens lens;
  std::optional<Circuit> circuit;
};

inline Circuit random_circuit_sized(Rng& rng, std::size_t in, std::size_t out, std::size_t max_gates) {
  Circuit c;
  for (std::size_t i = 0; i < in; ++i) c.inputs.push_back("x" + std::to_string(i));
  std::vector<std::string> pool = c.inputs;
  const std::size_t ng = 1 + rng.below(max_gates);
  static constexpr GateKind kinds[] = {GateKind::Xor, GateKind::And, GateKind::And, GateKind::Xor,
                                       GateKind::Not, GateKind::Copy, GateKind::Const1};
  for (std::size_t g = 0; g < ng; ++g) {
    GateNode node{{}, kinds[rng.below(std::size(kinds))], {}};
    for (std::size_t a = 0; a < gate_arity(node.kind); ++a) node.args.push_back(pool[rng.below(pool.size())]);
    for (std::size_t o = 0; o < gate_outputs(node.kind); ++o) node.outputs.push_back("g" + std::to_string(g) + "_" + std::to_string(o));
    pool.insert(pool.end(), node.outputs.begin(), node.outputs.end());
    c.gates.push_back(std::move(node));
  }
  for (std::size_t o = 0; o < out; ++o) c.outputs.push_back(pool[rng.below(pool.size())]);
  return c;
}

inline RandomLens random_lens(Backend backend, Rng& rng, std::size_t in, std::size_t out) {
  if (backend == Backend::Z2) {
    Circuit c = random_circuit_sized(rng, in, out, 8);
    return {build_circuit(c).lens, c};
  }
  ParaLens f = random_smooth_composite(rng, in, out, 1 + rng.below(3), 6);
  Bundle p = random_bundle(f.param.point, rng);
  return {fix_parameter(f, p), std::nullopt};
}

/// Sequential composite of two all-input circuits, as a single circuit.
inline Circuit compose_circuits(const Circuit& f, const Circuit& g) {
  Circuit c;
  c.inputs = f.inputs;
  auto rename = [](const std::string& prefix, const std::string& w) { return prefix + w; };
  for (auto gate : f.gates) {
    for (auto& w : gate.outputs) w = rename("f_", w);
    for (auto& w : gate.args) w = std::find(f.inputs.begin(), f.inputs.end(), w) != f.inputs.end() ? w : rename("f_", w);
    c.gates.push_back(gate);
  }
  auto f_wire = [&](const std::string& w) {
    return std::find(f.inputs.begin(), f.inputs.end(), w) != f.inputs.end() ? w : rename("f_", w);
  };
  // g's inputs are f's outputs.
  std::map<std::string, std::string> g_in;
  for (std::size_t i = 0; i < g.inputs.size(); ++i) g_in[g.inputs[i]] = f_wire(f.outputs[i]);
  auto g_wire = [&](const std::string& w) { return g_in.count(w) ? g_in[w] : rename("g_", w); };
  for (auto gate : g.gates) {
    for (auto& w : gate.outputs) w = rename("g_", w);
    for (auto& w : gate.args) w = g_wire(w);
    c.gates.push_back(gate);
  }
  for (const auto& o : g.outputs) c.outputs.push_back(g_wire(o));
  return c;
}

}  // namespace detail

/// Runs RD.1 - RD.5 on `instances` random instances each.
/// RD.1  R[f + g] = R[f] + R[g] and R[0] = 0
/// RD.2  R[f](a, d1 + d2) = R[f](a, d1) + R[f](a, d2) and R[f](a, 0) = 0
/// RD.3  R[1] = pi_1; R[pi_0](a, b, d) = (d, 0), R[pi_1](a, b, d) = (0, d)
/// RD.4  R[<f, g>](a, (d1, d2)) = R[f](a, d1) + R[g](a, d2)
/// RD.5  R[f ; g](a, d) against a monolithic reverse derivative of f ; g:
///       J_f^T (J_g^T d) for smooth, the symbolic partials of the composed
///       circuit for z2.
inline std::vector<AxiomReport> axiom_suite(Backend backend, std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<AxiomReport> reps;
  const ScalarKind kind = backend == Backend::Smooth ? ScalarKind::Real64 : ScalarKind::Z2;
  auto port = [&](std::size_t n) {
    return backend == Backend::Z2 ? wires(n) : Port{TensorType{Shape{n}, kind}};
  };
  auto sizes = [&] { return std::pair{1 + rng.below(backend == Backend::Z2 ? 5 : 6), 1 + rng.below(4)}; };
  auto random_lens = [&](std::size_t in, std::size_t out) { return detail::random_lens(backend, rng, in, out).lens; };

  {
    AxiomReport r{"RD.1", backend};
    for (std::size_t k = 0; k < instances; ++k, ++r.instances) {
      auto [n, m] = sizes();
      Lens f = random_lens(n, m), g = random_lens(n, m);
      Bundle a = random_bundle(port(n), rng), d = random_bundle(port(m), rng);
      Lens fg = lens_sum(f, g);
      r.max_deviation = std::max(r.max_deviation, bundle_deviation(fg.put(a, d), add(f.put(a, d), g.put(a, d))));
      // The zero map: wiring nothing into a constant-zero tuple.
      Lens zero{Interface::of(port(n)), Interface::of(port(m)), [m = port(m)](const Bundle&) { return zeros(m); },
                [n = port(n)](const Bundle&, const Bundle&) { return zeros(n); }};
      r.max_deviation = std::max(r.max_deviation, bundle_deviation(lens_sum(f, zero).put(a, d), f.put(a, d)));
    }
    reps.push_back(r);
  }
  {
    AxiomReport r{"RD.2", backend};
    for (std::size_t k = 0; k < instances; ++k, ++r.instances) {
      auto [n, m] = sizes();
      Lens f = random_lens(n, m);
      Bundle a = random_bundle(port(n), rng), d1 = random_bundle(port(m), rng), d2 = random_bundle(port(m), rng);
      r.max_deviation = std::max(r.max_deviation, bundle_deviation(f.put(a, add(d1, d2)), add(f.put(a, d1), f.put(a, d2))));
      r.max_deviation = std::max(r.max_deviation, bundle_deviation(f.put(a, zeros(port(m))), zeros(port(n))));
    }
    reps.push_back(r);
  }
  {
    AxiomReport r{"RD.3", backend};
    for (std::size_t k = 0; k < instances; ++k, ++r.instances) {
      auto [n, m] = sizes();
      const Port a_port = port(n), b_port = port(m);
      Bundle a = random_bundle(a_port, rng), b = random_bundle(b_port, rng);
      Bundle da = random_bundle(a_port, rng), db = random_bundle(b_port, rng);
      r.max_deviation = std::max(r.max_deviation, bundle_deviation(identity_lens(Interface::of(a_port)).put(a, da), da));
      std::vector<std::size_t> first(a_port.size()), second(b_port.size());
      std::iota(first.begin(), first.end(), std::size_t{0});
      std::iota(second.begin(), second.end(), a_port.size());
      Lens pi0 = wiring_lens(a_port + b_port, first), pi1 = wiring_lens(a_port + b_port, second);
      r.max_deviation = std::max(r.max_deviation, bundle_deviation(pi0.put(concat(a, b), da), concat(da, zeros(b_port))));
      r.max_deviation = std::max(r.max_deviation, bundle_deviation(pi1.put(concat(a, b), db), concat(zeros(a_port), db)));
    }
    reps.push_back(r);
  }
  {
    AxiomReport r{"RD.4", backend};
    for (std::size_t k = 0; k < instances; ++k, ++r.instances) {
      auto [n, m] = sizes();
      const std::size_t m2 = 1 + rng.below(4);
      Lens f = random_lens(n, m), g = random_lens(n, m2);
      Bundle a = random_bundle(port(n), rng), d1 = random_bundle(port(m), rng), d2 = random_bundle(port(m2), rng);
      r.max_deviation =
          std::max(r.max_deviation, bundle_deviation(lens_pair(f, g).put(a, concat(d1, d2)), add(f.put(a, d1), g.put(a, d2))));
    }
    reps.push_back(r);
  }
  {
    AxiomReport r{"RD.5", backend};
    for (std::size_t k = 0; k < instances; ++k, ++r.instances) {
      auto [n, m] = sizes();
      const std::size_t l = 1 + rng.below(4);
      if (backend == Backend::Z2) {
        Circuit cf = detail::random_circuit_sized(rng, n, m, 6);
        Circuit cg = detail::random_circuit_sized(rng, m, l, 6);
        Lens fg = compose_lens(build_circuit(cf).lens, build_circuit(cg).lens);
        const auto partials = symbolic_partials(detail::compose_circuits(cf, cg));
        const auto x = cube_point(rng(), n);
        std::vector<bool> d(l);
        for (std::size_t j = 0; j < l; ++j) d[j] = rng.coin();
        const auto back = bundle_bits(fg.put(bits_bundle(x), bits_bundle(d)));
        for (std::size_t i = 0; i < n; ++i) {
          bool mono = false;
          for (std::size_t j = 0; j < l; ++j) mono ^= d[j] && partials[j][i].evaluate(x);
          r.max_deviation += back[i] != mono;
        }
      } else {
        Lens f = random_lens(n, m), g = random_lens(m, l);
        Bundle a = random_bundle(port(n), rng), d = random_bundle(port(l), rng);
        const auto jf = transposed_jacobian(f, a);             // n x m, stored as m columns
        const auto jg = transposed_jacobian(g, f.forward(a));  // m x l, stored as l columns
        const auto dv = flatten(d);
        std::vector<double> mono(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < m; ++j) {
            double gj = 0.0;
            for (std::size_t c = 0; c < l; ++c) gj += jg[c][j] * dv[c];
            mono[i] += jf[j][i] * gj;
          }
        r.max_deviation =
            std::max(r.max_deviation, bundle_deviation(compose_lens(f, g).put(a, d), unflatten(port(n), mono)));
      }
    }
    reps.push_back(r);
  }
  return reps;
}

}  // namespace paralens
