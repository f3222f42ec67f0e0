// Command-line front end: train, dream, gan, check, bench.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "paralens/config.hpp"
#include "paralens/paralens.hpp"

namespace fs = std::filesystem;
using namespace paralens;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::BadMagic:
    case ErrorCode::CountMismatch:
    case ErrorCode::TruncatedFile:
    case ErrorCode::NotADistribution:
      return kExitData;
    case ErrorCode::NumericError:
    case ErrorCode::ToleranceExceeded:
      return kExitNumeric;
    default:
      return kExitConfig;
  }
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> steps;
  std::optional<std::string> output_dir;
};

ExperimentConfig load(const Overrides& o, const std::string& mode) {
  ExperimentConfig c = parse_config_json(read_config_json(o.config), fs::path(o.config).parent_path());
  if (c.mode != mode) throw Error(ErrorCode::ValidationError, "mode: config says '" + c.mode + "' but the subcommand is '" + mode + "'");
  if (o.seed) c.seed = *o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch_size) {
    if (*o.batch_size == 0) throw Error(ErrorCode::ValidationError, "batch_size: must be at least 1");
    c.batch_size = *o.batch_size;
  }
  if (o.steps) c.dream.steps = c.gan.steps = *o.steps;
  if (o.output_dir) c.output_dir = *o.output_dir;
  else c.output_dir = c.resolve(c.output_dir);
  validate(c);
  fs::create_directories(c.output_dir);
  return c;
}

std::string out_path(const ExperimentConfig& c, const char* name) { return (fs::path(c.output_dir) / name).string(); }

ParaLens build_model(const ExperimentConfig& c) {
  return c.backend == "z2" ? circuit_model(load_circuit(c.resolve(c.circuit))) : build_chain(c.layers, "model.layers");
}

Dataset load_split(const ExperimentConfig& c, const std::string& x, const std::string& y) {
  if (c.data.format == "idx") return load_idx(c.resolve(x), c.resolve(y), true, c.data.limit);
  Dataset d = load_csv(c.resolve(x), c.backend == "z2");
  if (d.size() > c.data.limit) d.resize(c.data.limit);
  return d;
}

void check_data(const ParaLens& model, const Dataset& d, const std::string& what) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (port_of(d[i].input) != model.src.point)
      throw Error(ErrorCode::CountMismatch, what + " example " + std::to_string(i) + " input " + to_string(port_of(d[i].input)) +
                                                " does not match the model input " + model.src.str());
    if (port_of(d[i].label) != model.dst.point)
      throw Error(ErrorCode::CountMismatch, what + " example " + std::to_string(i) + " label " + to_string(port_of(d[i].label)) +
                                                " does not match the model output " + model.dst.str());
  }
}

int run_train(const Overrides& o) {
  ExperimentConfig c = load(o, "train");
  ParaLens model = build_model(c);
  LossLens loss = build_loss(c.loss, model.dst.point);
  Dataset train = load_split(c, c.data.train, c.data.train_labels);
  check_data(model, train, "train");
  Dataset test;
  if (!c.data.test.empty()) {
    test = load_split(c, c.data.test, c.data.test_labels);
    check_data(model, test, "test");
  }
  TrainPlan plan{model, loss, c.rate, [spec = c.optimiser](const Port& p) { return build_optimiser(spec, p); },
                 Mode::LearnParams, c.seed, c.batch_size};
  Trainer trainer(plan);
  Rng rng(c.seed);
  StepState state = trainer.initial_state(init_params(model.param.point, rng));
  std::vector<MetricsRow> trace;
  for (std::size_t epoch = 0; epoch < c.epochs; ++epoch) {
    FitResult r = trainer.fit(train, 1, std::move(state), rng);
    state = std::move(r.state);
    double mean = 0.0;
    for (auto& row : r.trace) {
      row.epoch = epoch;
      mean += row.loss;
    }
    mean /= double(std::max<std::size_t>(1, r.trace.size()));
    std::cout << "epoch " << epoch << " train_loss " << format_double(mean);
    if (!test.empty() && detail::correct(model.forward(state.params, test[0].input), test[0].label))
      std::cout << " test_accuracy " << evaluate_accuracy(model, state.params, test);
    std::cout << "\n";
    trace.insert(trace.end(), r.trace.begin(), r.trace.end());
  }
  std::cout << "final_loss " << format_double(evaluate_loss(model, loss, state.params, train) / double(train.size())) << "\n";
  write_text(out_path(c, "metrics.csv"), metrics_csv(trace));
  save_params(out_path(c, "params.bin"), state.params);
  return 0;
}

int run_dream(const Overrides& o) {
  ExperimentConfig c = load(o, "dream");
  ParaLens model = build_model(c);
  LossLens loss = build_loss(c.loss, model.dst.point);
  Rng rng(c.seed);
  Bundle p = c.dream.params.empty() ? init_params(model.param.point, rng) : load_params(c.resolve(c.dream.params));
  check_bundle(model.param.point, p, "dream.params");
  const std::size_t nout = element_count(model.dst.point);
  Bundle bt = unflatten(model.dst.point, flatten({one_hot(c.dream.target, nout)}));
  TrainPlan plan{model, loss, c.rate, [spec = c.optimiser](const Port& q) { return build_optimiser(spec, q); }, Mode::DeepDream, c.seed};
  DreamStep step = assemble_dream(plan);
  Bundle a = c.dream.init == "zeros" ? zeros(model.src.point) : random_bundle(model.src.point, rng);
  Bundle s = build_optimiser(c.optimiser, model.src.point).initial_state();

  auto target = [&](const Bundle& x) { return flatten(model.forward(p, x))[c.dream.target]; };
  std::ostringstream traj;
  traj << "step,target";
  for (std::size_t i = 0; i < element_count(model.src.point); ++i) traj << ",a" << i;
  traj << "\n";
  std::vector<MetricsRow> trace;
  auto record = [&](std::size_t t) {
    const double v = target(a);
    if (!std::isfinite(v)) throw Error(ErrorCode::NumericError, "non-finite target output at dream step " + std::to_string(t));
    traj << t << "," << format_double(v);
    for (double x : flatten(a)) traj << "," << format_double(x);
    traj << "\n";
    trace.push_back({0, t, detail::loss_total(loss.forward(bt, model.forward(p, a))), std::nullopt});
    std::cout << "step " << t << " target " << format_double(v) << "\n";
  };
  record(0);
  for (std::size_t t = 1; t <= c.dream.steps; ++t) {
    std::tie(s, a) = step(s, a, p, bt);
    record(t);
  }
  write_text(out_path(c, "dream_trajectory.csv"), traj.str());
  write_text(out_path(c, "metrics.csv"), metrics_csv(trace));
  save_params(out_path(c, "dream_input.bin"), a);
  return 0;
}

int run_gan(const Overrides& o) {
  ExperimentConfig c = load(o, "gan");
  ParaLens g = build_chain(c.layers, "model.layers"), d = build_chain(c.discriminator, "model.discriminator");
  GanStep step(g, d, c.gan.alpha);
  Rng rng(c.seed);
  Bundle p = init_params(g.param.point, rng), q = init_params(d.param.point, rng);
  std::vector<MetricsRow> trace;
  for (std::size_t t = 1; t <= c.gan.steps; ++t) {
    Bundle z{Tensor::vector({rng.normal(0.0, 1.0)})}, xr{Tensor::vector({rng.normal(c.gan.data_mean, c.gan.data_std)})};
    std::tie(p, q) = step(z, xr, p, q);
    Bundle pay = step.payoffs(z, xr, p, q);
    const double gap = detail::loss_total(slice(pay, 0, 1)) - detail::loss_total(slice(pay, 1, 1));
    for (double v : flatten(concat(p, q)))
      if (!std::isfinite(v)) throw Error(ErrorCode::NumericError, "non-finite parameter at gan step " + std::to_string(t));
    trace.push_back({0, t, gap, std::nullopt});
  }
  double mean = 0.0;
  Rng probe(c.seed + 1);
  for (int i = 0; i < 1000; ++i) mean += g.forward(p, {Tensor::vector({probe.normal(0.0, 1.0)})})[0].at(0);
  std::cout << "steps " << c.gan.steps << " generated_mean " << format_double(mean / 1000) << " data_mean "
            << format_double(c.gan.data_mean) << "\n";
  write_text(out_path(c, "metrics.csv"), metrics_csv(trace));
  save_params(out_path(c, "params.bin"), concat(p, q));
  return 0;
}

struct CheckOptions {
  std::size_t composites = 100;
  std::size_t instances = 200;
  std::size_t circuits = 100;
  std::uint64_t seed = 0;
};

int run_check(const CheckOptions& o) {
  bool ok = true;
  auto row = [&](const std::string& name, bool pass, const std::string& detail) {
    ok = ok && pass;
    std::cout << std::left << std::setw(34) << name << (pass ? "PASS  " : "FAIL  ") << detail << "\n";
  };
  Rng rng(o.seed);
  double worst = 0.0;
  std::size_t failing = 0;
  for (const auto& [name, lens] : smooth_primitives(rng)) {
    GradReport r = grad_check(name, lens, random_probes(lens, rng, 10));
    worst = std::max(worst, r.max_rel_error);
    failing += !r.passed();
  }
  row("grad_check primitives", failing == 0, "max_rel_err " + format_double(worst));
  worst = 0.0;
  failing = 0;
  for (std::size_t i = 0; i < o.composites; ++i) {
    ParaLens f = random_smooth_composite(rng, 1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(5));
    Lens l = fix_parameter(f, random_bundle(f.param.point, rng));
    GradReport r = grad_check(f.name, l, random_probes(l, rng, 3));
    worst = std::max(worst, r.max_rel_error);
    failing += !r.passed();
  }
  row("grad_check composites", failing == 0, "max_rel_err " + format_double(worst));
  for (Backend b : {Backend::Smooth, Backend::Z2}) {
    const double tol = b == Backend::Smooth ? 1e-10 : 0.0;
    for (const auto& r : axiom_suite(b, o.instances, o.seed))
      row(r.axiom + " " + to_string(b), r.max_deviation <= tol, "max_dev " + format_double(r.max_deviation));
  }
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < o.circuits; ++i) mismatches += check_against_symbolic(random_circuit(rng)).has_value();
  row("z2 symbolic oracle", mismatches == 0, std::to_string(mismatches) + " mismatching circuits");
  return ok ? 0 : kExitNumeric;
}

int run_bench(const Overrides& o, std::size_t steps) {
  ParaLens model;
  LossLens loss = softmax_ce_loss(10);
  if (o.config.empty()) {
    model = para_chain({dense(784, 128, Activation::Relu), dense(128, 10, Activation::Identity)});
  } else {
    ExperimentConfig c = parse_config_json(read_config_json(o.config), fs::path(o.config).parent_path());
    validate(c, false);
    model = build_model(c);
    loss = build_loss(c.loss, model.dst.point);
  }
  Rng rng(o.seed.value_or(0));
  TrainPlan plan{model, loss, {RateKind::Constant, -1.0}, [](const Port& p) { return adam(p); }, Mode::LearnParams, 0,
                 o.batch_size.value_or(1)};
  Trainer trainer(plan);
  StepState st = trainer.initial_state(init_params(model.param.point, rng));
  Dataset data;
  for (std::size_t i = 0; i < plan.batch_size; ++i) {
    Bundle y = random_bundle(model.dst.point, rng, 0.0, 1.0);
    if (loss.name.rfind("softmax", 0) == 0) y = {distribution_from_logits(y[0])};
    data.push_back({random_bundle(model.src.point, rng), y});
  }
  std::vector<const Example*> ptrs;
  for (const auto& e : data) ptrs.push_back(&e);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < steps; ++i) trainer.step(st, ptrs);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "model " << model.name << "\nsteps " << steps << " batch " << plan.batch_size << " seconds " << secs
            << " examples_per_second " << double(steps * plan.batch_size) / std::max(secs, 1e-12) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric-lens learning toolkit"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("-c,--config", o.config, "Experiment config (JSON)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override the seed");
    sub->add_option("--batch-size", o.batch_size, "Override the batch size");
  };
  auto* train = app.add_subcommand("train", "Supervised training");
  add_common(train, true);
  train->add_option("--epochs", o.epochs, "Override the epoch count");
  train->add_option("-o,--output-dir", o.output_dir, "Override the output directory");
  auto* dream = app.add_subcommand("dream", "Deep dreaming on the model input");
  add_common(dream, true);
  dream->add_option("--steps", o.steps, "Override the dream step count");
  dream->add_option("-o,--output-dir", o.output_dir, "Override the output directory");
  auto* gan = app.add_subcommand("gan", "Wasserstein GAN toy");
  add_common(gan, true);
  gan->add_option("--steps", o.steps, "Override the GAN step count");
  gan->add_option("-o,--output-dir", o.output_dir, "Override the output directory");
  CheckOptions co;
  auto* check = app.add_subcommand("check", "Gradient checks, axiom suite and Z2 oracle");
  check->add_option("--seed", co.seed, "Seed");
  check->add_option("--composites", co.composites, "Random smooth composites");
  check->add_option("--instances", co.instances, "Instances per axiom and backend");
  check->add_option("--circuits", co.circuits, "Random circuits for the symbolic oracle");
  std::size_t bench_steps = 200;
  auto* bench = app.add_subcommand("bench", "Time training steps");
  add_common(bench, false);
  bench->add_option("--steps", bench_steps, "Steps to time");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return run_train(o);
    if (*dream) return run_dream(o);
    if (*gan) return run_gan(o);
    if (*check) return run_check(co);
    return run_bench(o, bench_steps);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
