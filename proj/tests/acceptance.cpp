// Acceptance run: one PASS/FAIL line per criterion. Tolerances and budgets
// are fixed here and never loosened at run time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "paralens/paralens.hpp"

using namespace paralens;

namespace {

namespace tol {
constexpr double kGradRel = 1e-5;
constexpr double kGradStep = 1e-6;
constexpr double kGradSeconds = 30.0;
constexpr double kAxiomSmooth = 1e-10;
constexpr double kClosedForm = 1e-12;
constexpr double kOptimiserRel = 1e-12;
constexpr double kCoherence = 1e-12;
constexpr double kBatch = 1e-12;
constexpr double kMnistAccuracy = 0.90;
constexpr double kMnistSeconds = 300.0;
constexpr std::size_t kMnistEpochs = 5;
constexpr std::size_t kBoolEpochs = 200;
constexpr int kBoolSeeds = 20;
constexpr int kBoolRequired = 16;
constexpr std::size_t kGanSteps = 2000;
constexpr double kGanAlpha = 1.0 / 128.0;
}  // namespace tol

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

struct Result {
  bool pass;
  std::string detail;
};

double max_rel(const std::vector<double>& a, const std::vector<double>& b, double floor = 1.0) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::max({floor, std::abs(a[i]), std::abs(b[i])}));
  return m;
}

std::vector<double> uniform(Rng& rng, std::size_t n, double lo = -1, double hi = 1) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

Bundle vec(std::vector<double> v) { return {Tensor::vector(std::move(v))}; }
Bundle mat(std::size_t r, std::size_t c, std::vector<double> v) { return {Tensor::real(Shape{r, c}, std::move(v))}; }
Bundle bitvec(const std::vector<int>& v) {
  std::vector<std::uint8_t> b(v.begin(), v.end());
  const std::size_t n = b.size();
  return {Tensor::bits(Shape{n}, std::move(b))};
}

// 1 ------------------------------------------------------------------------
Result gradient_correctness() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  std::size_t failed = 0, checked = 0, skipped = 0;
  for (const auto& [name, lens] : smooth_primitives(rng)) {
    GradReport r = grad_check(name, lens, random_probes(lens, rng, 10), tol::kGradStep, tol::kGradRel);
    worst = std::max(worst, r.max_rel_error);
    failed += !r.passed();
    checked += r.checked;
    skipped += r.skipped;
  }
  for (int i = 0; i < 100; ++i) {
    ParaLens f = random_smooth_composite(rng, 1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(5), 8);
    Lens l = fix_parameter(f, random_bundle(f.param.point, rng));
    GradReport r = grad_check(f.name, l, random_probes(l, rng, 3), tol::kGradStep, tol::kGradRel);
    worst = std::max(worst, r.max_rel_error);
    failed += !r.passed();
    checked += r.checked;
    skipped += r.skipped;
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && worst <= tol::kGradRel && secs <= tol::kGradSeconds,
          "max_rel_err=" + fmt(worst) + " probes=" + std::to_string(checked) + " kink_skipped=" + std::to_string(skipped) +
              " time=" + fmt(secs) + "s"};
}

// 2 ------------------------------------------------------------------------
Result axioms() {
  bool ok = true;
  std::string detail;
  for (Backend b : {Backend::Smooth, Backend::Z2}) {
    double worst = 0.0;
    for (const auto& r : axiom_suite(b, 200, 202)) {
      worst = std::max(worst, r.max_deviation);
      ok = ok && r.instances == 200 && (b == Backend::Z2 ? r.max_deviation == 0.0 : r.max_deviation <= tol::kAxiomSmooth);
    }
    detail += std::string(to_string(b)) + "_max_dev=" + fmt(worst) + " ";
  }
  return {ok, detail + "(RD.1-RD.5, 200 instances each)"};
}

// 3 ------------------------------------------------------------------------
Result z2_oracle() {
  Rng rng(303);
  std::size_t mismatches = 0, gates = 0;
  for (int i = 0; i < 100; ++i) {
    Circuit c = random_circuit(rng, 6, 12);
    gates = std::max(gates, c.gates.size());
    mismatches += check_against_symbolic(c).has_value();
  }
  return {mismatches == 0, "mismatching_circuits=" + std::to_string(mismatches) + "/100 max_gates=" + std::to_string(gates)};
}

// 4 ------------------------------------------------------------------------
Result closed_forms() {
  Rng rng(404);
  const Port loss_port = scalar_loss_port().point;
  double q = 0, ce = 0, nes = 0;
  std::size_t z2_bad = 0;
  {
    const double eps = 0.05;
    SupervisedStep step(linear(3, 2), quadratic_loss(2), learning_rate({RateKind::Constant, -eps}, loss_port),
                        basic_update({real_type(Shape{2, 3})}, Polarity::Ascent));
    for (int i = 0; i < 50; ++i) {
      auto m = uniform(rng, 6), x = uniform(rng, 3), y = uniform(rng, 2);
      q = std::max(q, max_rel(flatten(step(vec(x), {}, mat(2, 3, m), vec(y)).second), oracle::quadratic_gd(m, x, y, eps)));
    }
  }
  {
    const double eps = 0.1;
    SupervisedStep step(linear(4, 3), softmax_ce_loss(3), learning_rate({RateKind::Constant, -eps}, loss_port),
                        basic_update({real_type(Shape{3, 4})}, Polarity::Ascent));
    for (int i = 0; i < 50; ++i) {
      auto m = uniform(rng, 12), x = uniform(rng, 4), y = oracle::softmax(uniform(rng, 3, -2, 2));
      ce = std::max(ce, max_rel(flatten(step(vec(x), {}, mat(3, 4, m), vec(y)).second), oracle::softmax_ce_gd(m, x, y, eps)));
    }
  }
  {
    const double eps = 0.05, gamma = 0.9;
    SupervisedStep step(linear(2, 2), quadratic_loss(2), learning_rate({RateKind::Constant, -eps}, loss_port),
                        nesterov({real_type(Shape{2, 2})}, gamma));
    for (int i = 0; i < 50; ++i) {
      auto m = uniform(rng, 4), s = uniform(rng, 4), x = uniform(rng, 2), y = uniform(rng, 2);
      auto [gs, gm] = step(vec(x), mat(2, 2, s), mat(2, 2, m), vec(y));
      auto [ws, wm] = oracle::quadratic_nesterov(m, s, x, y, eps, gamma);
      nes = std::max({nes, max_rel(flatten(gs), ws), max_rel(flatten(gm), wm)});
    }
  }
  {
    SupervisedStep step(circuit_model(parse_circuit(oracle::kTemplateCircuit)), boolean_xor_loss(1),
                        learning_rate({RateKind::Identity}, {bit_type(Shape{1})}), basic_update({bit_type(Shape{4})}, Polarity::Ascent));
    for (int i = 0; i < 50; ++i) {
      std::vector<int> p(4);
      for (auto& b : p) b = rng.coin();
      const int x1 = rng.coin(), x2 = rng.coin(), y = rng.coin();
      auto got = flatten(step(bitvec({x1, x2}), {}, bitvec(p), bitvec({y})).second);
      auto want = oracle::z2_template_step(p, x1, x2, y);
      for (int k = 0; k < 4; ++k) z2_bad += int(got[k]) != want[k];
    }
  }
  return {q <= tol::kClosedForm && ce <= tol::kClosedForm && nes <= tol::kClosedForm && z2_bad == 0,
          "quadratic_gd=" + fmt(q) + " softmax_ce_gd=" + fmt(ce) + " quadratic_nesterov=" + fmt(nes) +
              " z2_xor_bit_errors=" + std::to_string(z2_bad) + " (50 instances each)"};
}

// 5 ------------------------------------------------------------------------
Result optimisers() {
  Rng rng(505);
  const Port port{real_type(Shape{3}), real_type(Shape{2, 2})};
  const std::size_t n = element_count(port);
  double worst = 0.0;
  auto trajectory = [&](const OptimiserLens& opt, Bundle s, auto&& recur) {
    Bundle p = random_bundle(port, rng);
    std::vector<double> sv = flatten(s), pv = flatten(p);
    for (int t = 1; t <= 10; ++t) {
      Bundle dp = random_bundle(port, rng);
      auto look = flatten(opt.get(s, p));
      auto g = flatten(dp);
      std::vector<double> want_look = recur(sv, pv, g, t);
      worst = std::max(worst, max_rel(look, want_look, 1e-300));
      std::tie(s, p) = opt.put(s, p, dp);
      worst = std::max(worst, max_rel(flatten(p), pv, 1e-300));
    }
  };
  // Each recurrence returns the expected get before updating its state in place.
  const double gamma = 0.85;
  trajectory(momentum(port, gamma), zeros(port), [&](std::vector<double>& s, std::vector<double>& p, const std::vector<double>& g, int) {
    auto look = p;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = -gamma * s[i] + g[i];
      p[i] += s[i];
    }
    return look;
  });
  trajectory(nesterov(port, gamma), random_bundle(port, rng),
             [&](std::vector<double>& s, std::vector<double>& p, const std::vector<double>& g, int) {
               std::vector<double> look(n);
               for (std::size_t i = 0; i < n; ++i) look[i] = p[i] + gamma * s[i];
               for (std::size_t i = 0; i < n; ++i) {
                 s[i] = -gamma * s[i] + g[i];
                 p[i] += s[i];
               }
               return look;
             });
  const double eps = 0.05, delta = 1e-7;
  trajectory(adagrad(port, eps, delta), zeros(port), [&](std::vector<double>& s, std::vector<double>& p, const std::vector<double>& g, int) {
    auto look = p;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] += g[i] * g[i];
      p[i] += eps / (delta + std::sqrt(s[i])) * g[i];
    }
    return look;
  });
  AdamOptions ao;
  OptimiserLens ad = adam(port, ao);
  std::vector<double> m(n, 0.0), v(n, 0.0);
  trajectory(ad, ad.initial_state(), [&](std::vector<double>&, std::vector<double>& p, const std::vector<double>& g, int t) {
    auto look = p;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = ao.beta1 * m[i] + (1 - ao.beta1) * g[i];
      v[i] = ao.beta2 * v[i] + (1 - ao.beta2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(ao.beta1, t)), vh = v[i] / (1 - std::pow(ao.beta2, t));
      p[i] += ao.epsilon / (ao.delta + std::sqrt(vh)) * mh;
    }
    return look;
  });

  bool momentum_zero = true, gda_ok = true;
  OptimiserLens m0 = momentum(port, 0.0), basic = basic_update(port, Polarity::Ascent);
  Port P{real_type(Shape{2})}, Q{real_type(Shape{3}), real_type(Shape{1})};
  OptimiserLens g = gda(P, Q), dt = optimiser_tensor(basic_update(P, Polarity::Descent), basic_update(Q, Polarity::Ascent));
  for (int i = 0; i < 100; ++i) {
    Bundle s = random_bundle(port, rng), p = random_bundle(port, rng), d = random_bundle(port, rng);
    momentum_zero = momentum_zero && identical(m0.get(s, p), basic.get({}, p)) && identical(m0.put(s, p, d).second, basic.put({}, p, d).second);
    Bundle pq = random_bundle(P + Q, rng), e = random_bundle(P + Q, rng);
    gda_ok = gda_ok && identical(g.get({}, pq), dt.get({}, pq)) && identical(g.put({}, pq, e).second, dt.put({}, pq, e).second);
  }
  return {worst <= tol::kOptimiserRel && momentum_zero && gda_ok,
          "trajectory_max_rel=" + fmt(worst) + " momentum(0)==basic:" + (momentum_zero ? "yes" : "no") +
              " gda==descent(x)ascent:" + (gda_ok ? "yes" : "no")};
}

// 6 ------------------------------------------------------------------------
Lens to_port(const Port& target, std::size_t n) {
  return {Interface::of({real_type(Shape{n})}), Interface::of(target),
          [target](const Bundle& b) { return unflatten(target, b[0].reals()); },
          [n](const Bundle&, const Bundle& d) { return Bundle{Tensor::real(Shape{n}, flatten(d))}; }};
}

ParaLens split_circuit(const Circuit& c, std::size_t np) {
  ParaLens f = build_circuit(c);
  const std::size_t ni = c.inputs.size() - np;
  return {"circuit", Interface::of(wires(np)), Interface::of(wires(ni)), f.dst, f.lens};
}

Result coherence() {
  Rng rng(606);
  double smooth = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ParaLens f = random_smooth_composite(rng, 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(3));
    ParaLens g = random_smooth_composite(rng, element_count(f.dst.point), 1 + rng.below(4), 1 + rng.below(3));
    const std::size_t np = element_count(f.param.point), nq = element_count(g.param.point);
    auto reparam = [&](const Port& target, std::size_t k) {
      if (k == 0) return identity_lens(Interface::of(target));
      Lens mix = fix_parameter(linear(k + 1, k), random_bundle({real_type(Shape{k, k + 1})}, rng));
      return compose_lens(mix, to_port(target, k));
    };
    Lens alpha = reparam(f.param.point, np), beta = reparam(g.param.point, nq);
    ParaLens lhs = para_compose(reparameterise(f, alpha), reparameterise(g, beta));
    ParaLens rhs = reparameterise(para_compose(f, g), tensor_lens(beta, alpha));
    Bundle q = random_bundle(lhs.param.point, rng), a = random_bundle(f.src.point, rng), d = random_bundle(g.dst.point, rng);
    auto [lq, la] = lhs.backward(q, a, d);
    auto [rq, ra] = rhs.backward(q, a, d);
    smooth = std::max({smooth, max_rel(flatten(lhs.forward(q, a)), flatten(rhs.forward(q, a))), max_rel(flatten(lq), flatten(rq)),
                       max_rel(flatten(la), flatten(ra))});
  }
  std::size_t z2_bits = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t np = 1 + rng.below(3), na = 1 + rng.below(3), nb = 1 + rng.below(3), nq = 1 + rng.below(3), nc = 1 + rng.below(2);
    ParaLens f = split_circuit(detail::random_circuit_sized(rng, np + na, nb, 8), np);
    ParaLens g = split_circuit(detail::random_circuit_sized(rng, nq + nb, nc, 8), nq);
    const std::size_t np2 = 1 + rng.below(3), nq2 = 1 + rng.below(3);
    Lens alpha = build_circuit(detail::random_circuit_sized(rng, np2, np, 6)).lens;
    Lens beta = build_circuit(detail::random_circuit_sized(rng, nq2, nq, 6)).lens;
    ParaLens lhs = para_compose(reparameterise(f, alpha), reparameterise(g, beta));
    ParaLens rhs = reparameterise(para_compose(f, g), tensor_lens(beta, alpha));
    Bundle q = random_bundle(lhs.param.point, rng), a = random_bundle(f.src.point, rng), d = random_bundle(g.dst.point, rng);
    auto [lq, la] = lhs.backward(q, a, d);
    auto [rq, ra] = rhs.backward(q, a, d);
    z2_bits += std::size_t(bundle_deviation(lhs.forward(q, a), rhs.forward(q, a)) + bundle_deviation(lq, rq) + bundle_deviation(la, ra));
  }
  return {smooth <= tol::kCoherence && z2_bits == 0,
          "smooth_max_rel=" + fmt(smooth) + " z2_differing_bits=" + std::to_string(z2_bits) + " (100 instances each)"};
}

// 7 ------------------------------------------------------------------------
Result batching_and_gan() {
  Rng rng(707);
  double batch_dev = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ParaLens f = trial % 2 ? dense(1 + rng.below(5), 1 + rng.below(5), Activation::Sigmoid)
                           : para_chain({dense(3, 4, Activation::Relu), dense(4, 2, Activation::Identity)});
    const std::size_t n = 2 + rng.below(5);
    ParaLens b = batch(f, n);
    Bundle p = random_bundle(f.param.point, rng), as, ds, expected = zeros(f.param.point);
    for (std::size_t i = 0; i < n; ++i) {
      Bundle a = random_bundle(f.src.point, rng), d = random_bundle(f.dst.point, rng);
      expected = add(expected, f.backward(p, a, d).first);
      as = concat(as, a);
      ds = concat(ds, d);
    }
    batch_dev = std::max(batch_dev, max_rel(flatten(b.backward(p, as, ds).first), flatten(expected)));
  }
  std::size_t gan_mismatch = 0;
  GanStep step(dense(1, 1, Activation::Identity), dense(1, 1, Activation::Identity), tol::kGanAlpha);
  for (int trial = 0; trial < 100; ++trial) {
    oracle::Gan o{rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)};
    const double z = rng.normal(0, 1), xr = rng.normal(4, 1);
    auto [p, q] = step(vec({z}), vec({xr}), {Tensor::vector({o.bg}), Tensor::real(Shape{1, 1}, {o.wg})},
                       {Tensor::vector({o.bd}), Tensor::real(Shape{1, 1}, {o.wd})});
    oracle::Gan w = oracle::gan_step(o, z, xr, tol::kGanAlpha);
    gan_mismatch += flatten(concat(p, q)) != std::vector<double>{w.bg, w.wg, w.bd, w.wd};
  }
  return {batch_dev <= tol::kBatch && gan_mismatch == 0,
          "batch_tangent_max_rel=" + fmt(batch_dev) + " gan_step_mismatches=" + std::to_string(gan_mismatch) + "/100"};
}

// 8 ------------------------------------------------------------------------
Result mnist() {
  const std::filesystem::path base = std::filesystem::path(PARALENS_SOURCE_DIR) / "data" / "mnist-subset";
  Dataset train, test;
  try {
    train = load_idx((base / "train-images-idx3-ubyte.gz").string(), (base / "train-labels-idx1-ubyte.gz").string());
    test = load_idx((base / "t10k-images-idx3-ubyte.gz").string(), (base / "t10k-labels-idx1-ubyte.gz").string());
  } catch (const Error& e) {
    return {false, std::string("cannot load the subset: ") + e.what()};
  }
  const auto t0 = Clock::now();
  ParaLens model = para_chain({dense(784, 128, Activation::Relu), dense(128, 10, Activation::Identity)});
  // Adam's update adds its step, so a constant rate of -1 makes it descend.
  TrainPlan plan{model, softmax_ce_loss(10), {RateKind::Constant, -1.0}, [](const Port& p) { return adam(p); }};
  Trainer trainer(plan);
  Rng rng(0);
  StepState st = trainer.initial_state(init_params(model.param.point, rng));
  std::string accs;
  double acc = 0.0;
  for (std::size_t e = 0; e < tol::kMnistEpochs; ++e) {
    st = trainer.fit(train, 1, std::move(st), rng).state;
    acc = evaluate_accuracy(model, st.params, test);
    accs += (accs.empty() ? "" : ",") + fmt(acc);
  }
  const double secs = seconds_since(t0);
  return {acc >= tol::kMnistAccuracy && secs <= tol::kMnistSeconds,
          "train=" + std::to_string(train.size()) + " test=" + std::to_string(test.size()) + " test_acc_by_epoch=" + accs +
              " time=" + fmt(secs) + "s"};
}

// 9 ------------------------------------------------------------------------
Result boolean_learning() {
  ParaLens f = circuit_model(parse_circuit(oracle::kTemplateCircuit));
  TrainPlan plan{f, boolean_xor_loss(1), {RateKind::Identity}, [](const Port& p) { return basic_update(p, Polarity::Ascent); }};
  Trainer trainer(plan);
  int successes = 0;
  std::size_t worst_epochs = 0;
  for (int seed = 0; seed < tol::kBoolSeeds; ++seed) {
    Rng rng(9000 + seed);
    std::vector<int> hidden(4);
    for (auto& b : hidden) b = rng.coin();
    Dataset data;
    for (int x = 0; x < 4; ++x)
      data.push_back({bitvec({x & 1, x >> 1}), bitvec({oracle::z2_template(hidden, x & 1, x >> 1)})});
    // Exact solutions by exhaustive search over the 16 parameter vectors.
    std::vector<std::vector<int>> solutions;
    for (int code = 0; code < 16; ++code) {
      std::vector<int> p{code & 1, (code >> 1) & 1, (code >> 2) & 1, (code >> 3) & 1};
      bool exact = true;
      for (int x = 0; x < 4; ++x) exact = exact && oracle::z2_template(p, x & 1, x >> 1) == oracle::z2_template(hidden, x & 1, x >> 1);
      if (exact) solutions.push_back(p);
    }
    StepState st = trainer.initial_state(init_params(f.param.point, rng));
    for (std::size_t epoch = 1; epoch <= tol::kBoolEpochs; ++epoch) {
      st = trainer.fit(data, 1, std::move(st), rng).state;
      std::vector<int> p;
      for (double v : flatten(st.params)) p.push_back(int(v));
      if (evaluate_loss(f, plan.loss, st.params, data) == 0.0 && std::find(solutions.begin(), solutions.end(), p) != solutions.end()) {
        ++successes;
        worst_epochs = std::max(worst_epochs, epoch);
        break;
      }
    }
  }
  return {successes >= tol::kBoolRequired, "seeds_solved=" + std::to_string(successes) + "/" + std::to_string(tol::kBoolSeeds) +
                                                " slowest_epochs=" + std::to_string(worst_epochs)};
}

// 10 -----------------------------------------------------------------------
Result dreaming() {
  Rng rng(1010);
  const Port loss_port = scalar_loss_port().point;
  std::size_t linear_steps = 0, linear_bad = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t a = 1 + rng.below(6), b = 1 + rng.below(6), target = rng.below(b);
    ParaLens model = linear(a, b);
    DreamStep step(model, dot_loss(b), learning_rate({RateKind::Constant, rng.uniform(0.01, 0.5)}, loss_port),
                   basic_update(model.src.point, Polarity::Ascent));
    Bundle p = random_bundle(model.param.point, rng), x = random_bundle(model.src.point, rng), bt = {one_hot(target, b)};
    double prev = model.forward(p, x)[0].at(target);
    for (int t = 0; t < 20; ++t) {
      x = step({}, x, p, bt).second;
      const double now = model.forward(p, x)[0].at(target);
      linear_bad += !(now > prev);
      ++linear_steps;
      prev = now;
    }
  }
  std::size_t negative = 0;
  double min_inner = INFINITY;
  for (int probe = 0; probe < 100; ++probe) {
    const std::size_t a = 2 + rng.below(4), h = 2 + rng.below(4), b = 2 + rng.below(4), target = rng.below(b);
    ParaLens model = para_chain({dense(a, h, Activation::Sigmoid), dense(h, b, Activation::Sigmoid), softargmax(b)});
    DreamStep step(model, dot_loss(b), learning_rate({RateKind::Constant, 0.1}, loss_port), basic_update(model.src.point, Polarity::Ascent));
    Bundle p = random_bundle(model.param.point, rng, -2, 2), x = random_bundle(model.src.point, rng), bt = {one_hot(target, b)};
    auto x0 = flatten(x), x1 = flatten(step({}, x, p, bt).second);
    // Input gradient of the targeted output by central differences.
    auto out = [&](std::vector<double> v) { return model.forward(p, unflatten(model.src.point, v))[0].at(target); };
    double inner_product = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      auto up = x0, down = x0;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      inner_product += (x1[i] - x0[i]) * (out(up) - out(down)) / 2e-6;
    }
    min_inner = std::min(min_inner, inner_product);
    negative += inner_product < 0.0;
  }
  return {linear_bad == 0 && negative == 0, "linear_non_increasing=" + std::to_string(linear_bad) + "/" + std::to_string(linear_steps) +
                                                " nonlinear_negative=" + std::to_string(negative) + "/100 min_inner=" + fmt(min_inner)};
}

// 11 -----------------------------------------------------------------------
Result gan_smoke() {
  Rng rng(1111);
  GanStep step(dense(1, 1, Activation::Identity), dense(1, 1, Activation::Identity), tol::kGanAlpha);
  oracle::Gan o{rng.uniform(-0.5, 0.5), rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
  Bundle p{Tensor::vector({o.bg}), Tensor::real(Shape{1, 1}, {o.wg})}, q{Tensor::vector({o.bd}), Tensor::real(Shape{1, 1}, {o.wd})};
  std::size_t mismatches = 0, non_finite = 0;
  for (std::size_t t = 0; t < tol::kGanSteps; ++t) {
    const double z = rng.normal(0, 1), xr = rng.normal(4, 1);
    std::tie(p, q) = step(vec({z}), vec({xr}), p, q);
    o = oracle::gan_step(o, z, xr, tol::kGanAlpha);
    const auto got = flatten(concat(p, q));
    mismatches += got != std::vector<double>{o.bg, o.wg, o.bd, o.wd};
    for (double v : got) non_finite += !std::isfinite(v);
  }
  return {mismatches == 0 && non_finite == 0, "steps=" + std::to_string(tol::kGanSteps) + " oracle_mismatches=" +
                                                  std::to_string(mismatches) + " non_finite=" + std::to_string(non_finite) +
                                                  " final_generator_bias=" + fmt(o.bg)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Result()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"reverse-derivative axioms", axioms},
      {"z2 symbolic oracle", z2_oracle},
      {"closed-form supervised steps", closed_forms},
      {"optimiser oracles", optimisers},
      {"reparameterisation coherence", coherence},
      {"batching and weight tying", batching_and_gan},
      {"mnist subset accuracy", mnist},
      {"boolean learning", boolean_learning},
      {"deep dreaming", dreaming},
      {"gan smoke", gan_smoke},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    const auto t0 = Clock::now();
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    failures += !r.pass;
    std::printf("[%s] %2zu %-30s %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, r.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
