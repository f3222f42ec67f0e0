#include <gtest/gtest.h>

#include "paralens/check.hpp"
#include "paralens/trainer.hpp"

using namespace paralens;

namespace {

Bundle b(std::initializer_list<int> v) {
  Bundle out;
  for (int x : v) out.push_back(Tensor::bit(x != 0));
  return out;
}

std::vector<bool> bits_of(const Bundle& x) { return bundle_bits(x); }

template <class F>
void expect_error(ErrorCode code, F&& f) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Gates, XorBackwardCopiesDelta) {
  Lens g = gate_lens(GateKind::Xor);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      EXPECT_EQ(bits_of(g.get(b({x, y}))), (std::vector<bool>{bool(x ^ y)}));
      EXPECT_EQ(bits_of(g.put(b({x, y}), b({1}))), (std::vector<bool>{true, true}));
      EXPECT_EQ(bits_of(g.put(b({x, y}), b({0}))), (std::vector<bool>{false, false}));
    }
}

TEST(Gates, AndBackwardIsFormalPartials) {
  Lens g = gate_lens(GateKind::And);
  EXPECT_EQ(bits_of(g.put(b({1, 1}), b({1}))), (std::vector<bool>{true, true}));
  EXPECT_EQ(bits_of(g.put(b({1, 0}), b({1}))), (std::vector<bool>{false, true}));
  EXPECT_EQ(bits_of(g.put(b({0, 1}), b({1}))), (std::vector<bool>{true, false}));
  EXPECT_EQ(bits_of(g.get(b({1, 1}))), (std::vector<bool>{true}));
}

TEST(Gates, NotAndCopy) {
  Lens n = gate_lens(GateKind::Not);
  EXPECT_EQ(bits_of(n.get(b({0}))), (std::vector<bool>{true}));
  EXPECT_EQ(bits_of(n.put(b({0}), b({1}))), (std::vector<bool>{true}));
  Lens c = gate_lens(GateKind::Copy);
  EXPECT_EQ(bits_of(c.get(b({1}))), (std::vector<bool>{true, true}));
  EXPECT_EQ(bits_of(c.put(b({1}), b({1, 1}))), (std::vector<bool>{false}));
  EXPECT_EQ(bits_of(c.put(b({1}), b({1, 0}))), (std::vector<bool>{true}));
}

TEST(Gates, Constants) {
  EXPECT_EQ(bits_of(gate_lens(GateKind::Const1).get({})), (std::vector<bool>{true}));
  EXPECT_EQ(bits_of(gate_lens(GateKind::Const0).get({})), (std::vector<bool>{false}));
  EXPECT_TRUE(gate_lens(GateKind::Const1).put({}, b({1})).empty());
}

TEST(Circuit, ParsesAndRoundTrips) {
  const char* text = R"(# p AND x, then XOR with q
param p q
input x
output y
t = AND(p, x)
y = XOR(t, q)
)";
  Circuit c = parse_circuit(text);
  EXPECT_EQ(c.params, (std::vector<std::string>{"p", "q"}));
  EXPECT_EQ(c.gates.size(), 2u);
  Circuit again = parse_circuit(to_text(c));
  EXPECT_EQ(to_text(again), to_text(c));
}

TEST(Circuit, ParseErrors) {
  expect_error(ErrorCode::ParseError, [] { parse_circuit("input x\ny = FOO(x)\n"); });
  expect_error(ErrorCode::ParseError, [] { parse_circuit("input x\ny = XOR(x)\n"); });
  expect_error(ErrorCode::ParseError, [] { parse_circuit("input x\ny = COPY(x)\n"); });
  expect_error(ErrorCode::ParseError, [] { parse_circuit("wires x\n"); });
}

TEST(Circuit, CycleAndDanglingWire) {
  expect_error(ErrorCode::CyclicCircuit, [] { build_circuit(parse_circuit("input x\noutput a\na = XOR(x, b)\nb = NOT(a)\n")); });
  expect_error(ErrorCode::DanglingWire, [] { build_circuit(parse_circuit("input x\noutput a\na = XOR(x, z)\n")); });
  expect_error(ErrorCode::DanglingWire, [] { build_circuit(parse_circuit("input x\noutput nowhere\n")); });
}

TEST(Circuit, PAndXBackward) {
  ParaLens f = build_circuit(parse_circuit("param p\ninput x\noutput y\ny = AND(p, x)\n"));
  auto [dp, dx] = f.put(b({1}), b({1}), b({1}));
  EXPECT_EQ(bits_of(dp), (std::vector<bool>{true}));
  EXPECT_EQ(bits_of(dx), (std::vector<bool>{true}));
}

TEST(Circuit, WireOnlyIsIdentity) {
  ParaLens f = build_circuit(parse_circuit("input x y\noutput x y\n"));
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      EXPECT_EQ(bits_of(f.get({}, b({x, y}))), bits_of(b({x, y})));
      EXPECT_EQ(bits_of(f.put({}, b({x, y}), b({y, x})).second), bits_of(b({y, x})));
    }
}

TEST(Circuit, FanOutAddsTangents) {
  // y = x AND x: compositional backward is x + x = 0.
  ParaLens f = build_circuit(parse_circuit("input x\noutput y\ny = AND(x, x)\n"));
  EXPECT_EQ(bits_of(f.put({}, b({1}), b({1})).second), (std::vector<bool>{false}));
}

TEST(Circuit, XorOffsetLearnsEveryOneBitTarget) {
  // f(p, x) = p XOR x with an xor loss, identity rate and the xor update.
  Circuit c = parse_circuit("param p\ninput x\noutput y\ny = XOR(p, x)\n");
  ParaLens f = build_circuit(c);
  for (int offset = 0; offset < 2; ++offset)
    for (int p0 = 0; p0 < 2; ++p0) {
      LossLens loss = lift_primitive(
          "xor", wires(1), wires(1), wires(1), [](const Bundle& tp) { return Bundle{tensor_add(tp[0], tp[1])}; },
          [](const Bundle&, const Bundle& a) { return concat(a, a); });
      SupervisedStep step(f, loss, learning_rate({RateKind::Identity}, wires(1)), basic_update(wires(1), Polarity::Ascent));
      Bundle p = b({p0});
      for (int epoch = 0; epoch < 2; ++epoch)
        for (int x = 0; x < 2; ++x) p = step(b({x}), {}, p, b({x ^ offset})).second;
      EXPECT_EQ(bits_of(p), (std::vector<bool>{offset != 0}));
    }
}

TEST(PolyZ2, ProductRule) {
  PolyZ2 x = PolyZ2::variable(0), y = PolyZ2::variable(1);
  PolyZ2 f = x * y;
  EXPECT_EQ(f.derivative(0), y);
  EXPECT_EQ(f.derivative(1), x);
  EXPECT_EQ((x + y).derivative(0), PolyZ2::one());
}

TEST(PolyZ2, FormalSquareHasZeroDerivative) {
  PolyZ2 x = PolyZ2::variable(0);
  EXPECT_TRUE((x * x).derivative(0).is_zero());
  EXPECT_EQ((x * x * x).derivative(0), x * x);
  EXPECT_TRUE((x + x).is_zero());
}

TEST(SymbolicPartials, CopyThenXorWithZero) {
  Circuit c = parse_circuit("input x\noutput y\na, b = COPY(x)\nz = CONST0()\ny = XOR(a, z)\n");
  const auto partials = symbolic_partials(c);
  EXPECT_EQ(partials[0][0], PolyZ2::one());
  EXPECT_FALSE(check_against_symbolic(c).has_value());
}

TEST(SymbolicPartials, AgreeWithBackwardOnRandomCircuits) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    Circuit c = random_circuit(rng);
    auto mismatch = check_against_symbolic(c);
    EXPECT_FALSE(mismatch.has_value()) << to_text(c);
  }
}

TEST(AxiomSuite, Z2DeviationsAreExactlyZero) {
  for (const auto& r : axiom_suite(Backend::Z2, 40, 3)) EXPECT_EQ(r.max_deviation, 0.0) << r.axiom;
}
