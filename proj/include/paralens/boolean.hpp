#pragma once

#include <algorithm>
#include <cctype>
#include <iterator>
#include <numeric>
#include <optional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "paralens/para.hpp"
#include "paralens/rng.hpp"

namespace paralens {

// Circuits carry one rank-0 Z2 tensor per wire.
inline TensorType wire_type() { return bit_type(Shape{}); }
inline Port wires(std::size_t n) { return Port(n, wire_type()); }

enum class GateKind { Xor, And, Not, Copy, Const0, Const1 };

inline const char* to_string(GateKind k) {
  switch (k) {
    case GateKind::Xor: return "XOR";
    case GateKind::And: return "AND";
    case GateKind::Not: return "NOT";
    case GateKind::Copy: return "COPY";
    case GateKind::Const0: return "CONST0";
    case GateKind::Const1: return "CONST1";
  }
  return "?";
}

inline std::size_t gate_arity(GateKind k) {
  switch (k) {
    case GateKind::Xor:
    case GateKind::And: return 2;
    case GateKind::Not:
    case GateKind::Copy: return 1;
    default: return 0;
  }
}

inline std::size_t gate_outputs(GateKind k) { return k == GateKind::Copy ? 2 : 1; }

inline GateKind parse_gate_kind(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return char(std::toupper(c)); });
  for (GateKind k : {GateKind::Xor, GateKind::And, GateKind::Not, GateKind::Copy, GateKind::Const0, GateKind::Const1})
    if (u == to_string(k)) return k;
  throw Error(ErrorCode::ParseError, "unknown gate kind '" + s + "'");
}

/// The lens <f, R[f]> of a single gate over Z2.
inline Lens gate_lens(GateKind kind) {
  const Interface in = Interface::of(wires(gate_arity(kind)));
  const Interface out = Interface::of(wires(gate_outputs(kind)));
  auto b = [](const Tensor& t) { return t.bit_data()[0] != 0; };
  switch (kind) {
    case GateKind::Xor:
      return {in, out, [](const Bundle& x) { return Bundle{tensor_add(x[0], x[1])}; },
              [](const Bundle&, const Bundle& d) { return Bundle{d[0], d[0]}; }};
    case GateKind::And:
      return {in, out, [](const Bundle& x) { return Bundle{hadamard(x[0], x[1])}; },
              [](const Bundle& x, const Bundle& d) { return Bundle{hadamard(x[1], d[0]), hadamard(x[0], d[0])}; }};
    case GateKind::Not:
      return {in, out, [b](const Bundle& x) { return Bundle{Tensor::bit(!b(x[0]))}; },
              [](const Bundle&, const Bundle& d) { return d; }};
    case GateKind::Copy:
      return {in, out, [](const Bundle& x) { return Bundle{x[0], x[0]}; },
              [](const Bundle&, const Bundle& d) { return Bundle{tensor_add(d[0], d[1])}; }};
    case GateKind::Const0:
    case GateKind::Const1: {
      const bool v = kind == GateKind::Const1;
      return {in, out, [v](const Bundle&) { return Bundle{Tensor::bit(v)}; },
              [](const Bundle&, const Bundle&) { return Bundle{}; }};
    }
  }
  throw Error(ErrorCode::ValidationError, "unknown gate");
}

struct GateNode {
  std::vector<std::string> outputs;
  GateKind kind;
  std::vector<std::string> args;
};

/// Text form, one declaration or gate per line; '#' starts a comment.
///
///   param p0 p1
///   input x
///   output y
///   t = AND(p0, x)
///   y = XOR(t, p1)
///   a, b = COPY(x)
///
/// Wires may fan out without an explicit COPY.
struct Circuit {
  std::vector<std::string> params;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<GateNode> gates;

  std::size_t variable_count() const { return params.size() + inputs.size(); }
};

namespace detail {

inline std::string trim(std::string s) {
  const char* ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  const auto e = s.find_last_not_of(ws);
  s.erase(e == std::string::npos ? 0 : e + 1);
  return s;
}

inline std::vector<std::string> split_names(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (sep == ' ') {
    std::istringstream in(s);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  }
  std::stringstream in(s);
  for (std::string w; std::getline(in, w, sep);) {
    w = trim(w);
    if (!w.empty()) out.push_back(w);
  }
  return out;
}

inline bool valid_name(const std::string& s) {
  if (s.empty() || !(std::isalpha((unsigned char)s[0]) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

}  // namespace detail

inline Circuit parse_circuit(const std::string& text) {
  Circuit c;
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    auto where = [&] { return "line " + std::to_string(lineno) + ": "; };
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto check_names = [&](const std::vector<std::string>& names) {
      for (const auto& n : names)
        if (!detail::valid_name(n)) throw Error(ErrorCode::ParseError, where() + "bad wire name '" + n + "'");
    };
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      auto words = detail::split_names(line, ' ');
      const std::string head = words.front();
      words.erase(words.begin());
      check_names(words);
      if (head == "param") c.params.insert(c.params.end(), words.begin(), words.end());
      else if (head == "input") c.inputs.insert(c.inputs.end(), words.begin(), words.end());
      else if (head == "output") c.outputs.insert(c.outputs.end(), words.begin(), words.end());
      else throw Error(ErrorCode::ParseError, where() + "expected param/input/output or a gate, got '" + head + "'");
      continue;
    }
    GateNode g;
    g.outputs = detail::split_names(line.substr(0, eq), ',');
    std::string rhs = detail::trim(line.substr(eq + 1));
    const auto open = rhs.find('('), close = rhs.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open || close + 1 != rhs.size())
      throw Error(ErrorCode::ParseError, where() + "expected KIND(args)");
    try {
      g.kind = parse_gate_kind(detail::trim(rhs.substr(0, open)));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, where() + e.what());
    }
    g.args = detail::split_names(rhs.substr(open + 1, close - open - 1), ',');
    check_names(g.outputs);
    check_names(g.args);
    if (g.args.size() != gate_arity(g.kind))
      throw Error(ErrorCode::ParseError, where() + to_string(g.kind) + " takes " + std::to_string(gate_arity(g.kind)) + " argument(s)");
    if (g.outputs.size() != gate_outputs(g.kind))
      throw Error(ErrorCode::ParseError, where() + to_string(g.kind) + " produces " + std::to_string(gate_outputs(g.kind)) + " wire(s)");
    c.gates.push_back(std::move(g));
  }
  return c;
}

inline std::string to_text(const Circuit& c) {
  std::ostringstream out;
  auto decl = [&](const char* head, const std::vector<std::string>& names) {
    if (names.empty()) return;
    out << head;
    for (const auto& n : names) out << ' ' << n;
    out << '\n';
  };
  decl("param", c.params);
  decl("input", c.inputs);
  decl("output", c.outputs);
  for (const auto& g : c.gates) {
    for (std::size_t i = 0; i < g.outputs.size(); ++i) out << (i ? ", " : "") << g.outputs[i];
    out << " = " << to_string(g.kind) << '(';
    for (std::size_t i = 0; i < g.args.size(); ++i) out << (i ? ", " : "") << g.args[i];
    out << ")\n";
  }
  return out.str();
}

/// Gates in an order where every argument is defined first. Throws
/// DanglingWire for undefined names and CyclicCircuit for feedback loops.
inline std::vector<std::size_t> topological_order(const Circuit& c) {
  std::map<std::string, std::size_t> producer;  // wire -> gate index, or npos for declared variables
  constexpr auto npos = std::size_t(-1);
  auto define = [&](const std::string& w, std::size_t g) {
    if (!producer.emplace(w, g).second) throw Error(ErrorCode::ValidationError, "wire '" + w + "' is defined twice");
  };
  for (const auto& w : c.params) define(w, npos);
  for (const auto& w : c.inputs) define(w, npos);
  for (std::size_t i = 0; i < c.gates.size(); ++i)
    for (const auto& w : c.gates[i].outputs) define(w, i);
  for (const auto& g : c.gates)
    for (const auto& a : g.args)
      if (!producer.count(a)) throw Error(ErrorCode::DanglingWire, "gate argument '" + a + "' is never defined");
  for (const auto& o : c.outputs)
    if (!producer.count(o)) throw Error(ErrorCode::DanglingWire, "output '" + o + "' is never defined");

  std::vector<std::size_t> order, pending(c.gates.size(), 0);
  std::vector<std::vector<std::size_t>> users(c.gates.size());
  for (std::size_t i = 0; i < c.gates.size(); ++i)
    for (const auto& a : c.gates[i].args)
      if (auto p = producer[a]; p != npos) {
        users[p].push_back(i);
        ++pending[i];
      }
  std::vector<std::size_t> ready;
  for (std::size_t i = c.gates.size(); i-- > 0;)
    if (pending[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    const std::size_t g = ready.back();
    ready.pop_back();
    order.push_back(g);
    for (auto u : users[g])
      if (--pending[u] == 0) ready.push_back(u);
  }
  if (order.size() != c.gates.size()) throw Error(ErrorCode::CyclicCircuit, "circuit contains a cycle");
  return order;
}

/// Builds the circuit as a parametric lens P -> ... over Z2 wires by lens
/// composition. The running wire bundle W grows by each gate's outputs:
/// W -> W x args (wiring) ; 1_W x gate.
inline ParaLens build_circuit(const Circuit& c) {
  const auto order = topological_order(c);
  std::map<std::string, std::size_t> slot;
  std::size_t n = 0;
  for (const auto& w : c.params) slot[w] = n++;
  for (const auto& w : c.inputs) slot[w] = n++;
  Lens acc = identity_lens(Interface::of(wires(n)));
  for (auto gi : order) {
    const GateNode& g = c.gates[gi];
    std::vector<std::size_t> picks(n);
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    for (const auto& a : g.args) picks.push_back(slot.at(a));
    acc = compose_lens(acc, wiring_lens(wires(n), std::move(picks)));
    acc = compose_lens(acc, tensor_lens(identity_lens(Interface::of(wires(n))), gate_lens(g.kind)));
    for (const auto& o : g.outputs) slot[o] = n++;
  }
  std::vector<std::size_t> outs;
  for (const auto& o : c.outputs) outs.push_back(slot.at(o));
  acc = compose_lens(acc, wiring_lens(wires(n), std::move(outs)));
  return {"circuit", Interface::of(wires(c.params.size())), Interface::of(wires(c.inputs.size())),
          Interface::of(wires(c.outputs.size())), acc};
}

/// Wraps a circuit's lens as a model on one z2 vector in, one out.
inline ParaLens circuit_model(const Circuit& c) {
  ParaLens f = build_circuit(c);
  const std::size_t np = c.params.size(), ni = c.inputs.size(), no = c.outputs.size();
  const Port pv{bit_type(Shape{np})}, iv{bit_type(Shape{ni})}, ov{bit_type(Shape{no})};
  auto unpack = [](const Tensor& t) {
    Bundle b;
    for (auto x : t.bit_data()) b.push_back(Tensor::bit(x));
    return b;
  };
  auto pack = [](const Bundle& b, std::size_t off, std::size_t n) {
    std::vector<std::uint8_t> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(b[off + i].bit_data()[0]);
    return Tensor::bits(Shape{n}, std::move(v));
  };
  Lens in{Interface::of(pv + iv), Interface::of(wires(np + ni)),
          [unpack](const Bundle& b) { return concat(unpack(b[0]), unpack(b[1])); },
          [pack, np, ni](const Bundle&, const Bundle& d) { return Bundle{pack(d, 0, np), pack(d, np, ni)}; }};
  Lens out{Interface::of(wires(no)), Interface::of(ov), [pack, no](const Bundle& b) { return Bundle{pack(b, 0, no)}; },
           [unpack](const Bundle&, const Bundle& d) { return unpack(d[0]); }};
  return {"circuit", Interface::of(pv), Interface::of(iv), Interface::of(ov), compose_lens(compose_lens(in, f.lens), out)};
}

// ---------------------------------------------------------------------------
// Formal polynomials over Z2.

/// A polynomial in Z2[x_0 ... x_n] kept formally: a monomial is a sorted
/// multiset of variable indices, so x*x stays x^2. Coefficients are mod 2.
class PolyZ2 {
 public:
  using Monomial = std::vector<std::size_t>;

  PolyZ2() = default;
  static PolyZ2 zero() { return {}; }
  static PolyZ2 one() { return constant(true); }
  static PolyZ2 constant(bool v) {
    PolyZ2 p;
    if (v) p.terms_.insert(Monomial{});
    return p;
  }
  static PolyZ2 variable(std::size_t i) {
    PolyZ2 p;
    p.terms_.insert(Monomial{i});
    return p;
  }

  const std::set<Monomial>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  bool operator==(const PolyZ2&) const = default;

  friend PolyZ2 operator+(const PolyZ2& a, const PolyZ2& b) {
    PolyZ2 out = a;
    for (const auto& m : b.terms_) out.toggle(m);
    return out;
  }

  friend PolyZ2 operator*(const PolyZ2& a, const PolyZ2& b) {
    PolyZ2 out;
    for (const auto& m : a.terms_)
      for (const auto& k : b.terms_) {
        Monomial prod;
        std::merge(m.begin(), m.end(), k.begin(), k.end(), std::back_inserter(prod));
        out.toggle(prod);
      }
    return out;
  }

  /// Formal partial derivative: d(x_i^k m)/dx_i = k x_i^(k-1) m, so even
  /// powers vanish mod 2.
  PolyZ2 derivative(std::size_t var) const {
    PolyZ2 out;
    for (const auto& m : terms_) {
      const auto k = std::count(m.begin(), m.end(), var);
      if (k % 2 == 0) continue;
      Monomial d = m;
      d.erase(std::find(d.begin(), d.end(), var));
      out.toggle(d);
    }
    return out;
  }

  bool evaluate(const std::vector<bool>& x) const {
    bool acc = false;
    for (const auto& m : terms_) {
      bool term = true;
      for (auto v : m) term = term && x.at(v);
      acc ^= term;
    }
    return acc;
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::string out;
    for (const auto& m : terms_) {
      if (!out.empty()) out += " + ";
      if (m.empty()) {
        out += "1";
        continue;
      }
      for (std::size_t i = 0; i < m.size(); ++i) out += (i ? "*x" : "x") + std::to_string(m[i]);
    }
    return out;
  }

 private:
  void toggle(const Monomial& m) {
    if (!terms_.erase(m)) terms_.insert(m);
  }

  std::set<Monomial> terms_;
};

/// The circuit's outputs as formal polynomials in its variables (parameters
/// first, then inputs).
inline std::vector<PolyZ2> circuit_polynomials(const Circuit& c) {
  std::map<std::string, PolyZ2> val;
  std::size_t v = 0;
  for (const auto& w : c.params) val[w] = PolyZ2::variable(v++);
  for (const auto& w : c.inputs) val[w] = PolyZ2::variable(v++);
  for (auto gi : topological_order(c)) {
    const GateNode& g = c.gates[gi];
    switch (g.kind) {
      case GateKind::Xor: val[g.outputs[0]] = val[g.args[0]] + val[g.args[1]]; break;
      case GateKind::And: val[g.outputs[0]] = val[g.args[0]] * val[g.args[1]]; break;
      case GateKind::Not: val[g.outputs[0]] = val[g.args[0]] + PolyZ2::one(); break;
      case GateKind::Copy: val[g.outputs[0]] = val[g.outputs[1]] = val[g.args[0]]; break;
      case GateKind::Const0: val[g.outputs[0]] = PolyZ2::zero(); break;
      case GateKind::Const1: val[g.outputs[0]] = PolyZ2::one(); break;
    }
  }
  std::vector<PolyZ2> out;
  for (const auto& o : c.outputs) out.push_back(val.at(o));
  return out;
}

/// partials[j][i] = d f_j / d x_i over all variables (parameters, then inputs).
inline std::vector<std::vector<PolyZ2>> symbolic_partials(const Circuit& c) {
  std::vector<std::vector<PolyZ2>> out;
  for (const auto& f : circuit_polynomials(c)) {
    std::vector<PolyZ2> row;
    for (std::size_t i = 0; i < c.variable_count(); ++i) row.push_back(f.derivative(i));
    out.push_back(std::move(row));
  }
  return out;
}

inline Bundle bits_bundle(const std::vector<bool>& v) {
  Bundle b;
  for (bool x : v) b.push_back(Tensor::bit(x));
  return b;
}

inline std::vector<bool> bundle_bits(const Bundle& b) {
  std::vector<bool> v;
  for (const auto& t : b)
    for (auto x : t.bit_data()) v.push_back(x != 0);
  return v;
}

inline std::vector<bool> cube_point(std::uint64_t code, std::size_t n) {
  std::vector<bool> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = (code >> i) & 1u;
  return x;
}

struct OracleMismatch {
  std::vector<bool> point;
  std::size_t output;
  std::size_t variable;
  bool compositional;
  bool symbolic;
};

/// Compares the compositional backward pass with the symbolic partials on
/// the whole cube and every one-hot output tangent. Returns the first
/// disagreement, if any.
inline std::optional<OracleMismatch> check_against_symbolic(const Circuit& c) {
  const ParaLens lens = build_circuit(c);
  const auto partials = symbolic_partials(c);
  const std::size_t n = c.variable_count(), m = c.outputs.size();
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
    const auto x = cube_point(code, n);
    const Bundle xb = bits_bundle(x);
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<bool> onehot(m, false);
      onehot[j] = true;
      const auto back = bundle_bits(lens.lens.backward(xb, bits_bundle(onehot)));
      for (std::size_t i = 0; i < n; ++i) {
        const bool sym = partials[j][i].evaluate(x);
        if (back[i] != sym) return OracleMismatch{x, j, i, back[i], sym};
      }
    }
  }
  return std::nullopt;
}

/// Random well-formed circuit: 1..max_vars variables split between
/// parameters and inputs, 1..max_gates gates, 1..3 outputs.
inline Circuit random_circuit(Rng& rng, std::size_t max_vars = 6, std::size_t max_gates = 12) {
  Circuit c;
  const std::size_t nv = 1 + rng.below(max_vars);
  const std::size_t np = rng.below(nv + 1);
  for (std::size_t i = 0; i < np; ++i) c.params.push_back("p" + std::to_string(i));
  for (std::size_t i = np; i < nv; ++i) c.inputs.push_back("x" + std::to_string(i - np));
  std::vector<std::string> pool = c.params;
  pool.insert(pool.end(), c.inputs.begin(), c.inputs.end());
  const std::size_t ng = 1 + rng.below(max_gates);
  static constexpr GateKind kinds[] = {GateKind::Xor, GateKind::And, GateKind::And, GateKind::Xor,
                                       GateKind::Not, GateKind::Copy, GateKind::Const0, GateKind::Const1};
  for (std::size_t g = 0; g < ng; ++g) {
    GateNode node{{}, kinds[rng.below(std::size(kinds))], {}};
    for (std::size_t a = 0; a < gate_arity(node.kind); ++a) node.args.push_back(pool[rng.below(pool.size())]);
    for (std::size_t o = 0; o < gate_outputs(node.kind); ++o) node.outputs.push_back("w" + std::to_string(g) + "_" + std::to_string(o));
    pool.insert(pool.end(), node.outputs.begin(), node.outputs.end());
    c.gates.push_back(std::move(node));
  }
  const std::size_t no = 1 + rng.below(3);
  for (std::size_t o = 0; o < no; ++o) c.outputs.push_back(pool[pool.size() - 1 - rng.below(std::min<std::size_t>(pool.size(), 4))]);
  return c;
}

}  // namespace paralens
