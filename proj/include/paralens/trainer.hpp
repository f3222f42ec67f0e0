#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include "paralens/layers.hpp"
#include "paralens/loss.hpp"
#include "paralens/optimiser.hpp"

namespace paralens {

enum class Mode { LearnParams, DeepDream, Gan };

struct TrainPlan {
  ParaLens model;
  LossLens loss;
  RateSpec rate;
  std::function<OptimiserLens(const Port&)> optimiser;
  Mode mode = Mode::LearnParams;
  std::uint64_t seed = 0;
  std::size_t batch_size = 1;
};

struct StepState {
  Bundle params;
  Bundle opt_state;
  std::size_t t = 0;
};

/// capture ; model ; loss ; rate as one closed parametric lens 1 -> 1. Its
/// parameter port is (B, P, A): labels, model parameters, inputs.
inline ParaLens close_learner(const ParaLens& model, const LossLens& loss, const ParaLens& rate) {
  if (model.dst != loss.src)
    throw Error(ErrorCode::InterfaceMismatch, "model output " + model.dst.str() + " does not feed loss input " + loss.src.str());
  if (loss.dst != rate.src)
    throw Error(ErrorCode::InterfaceMismatch, "loss output " + loss.dst.str() + " does not feed the learning rate");
  return para_chain({input_capture_lens(model.src), model, loss, rate});
}

/// The put map of the closed learner reparameterised by an optimiser on its
/// P port: (a, s, p, b_t) -> (s, p). Input and label tangents are dropped.
class SupervisedStep {
 public:
  SupervisedStep(const ParaLens& model, const LossLens& loss, const ParaLens& rate, const OptimiserLens& opt)
      : model_(model), loss_(loss), opt_(opt) {
    if (opt.param != model.param.point)
      throw Error(ErrorCode::InterfaceMismatch, "optimiser works on " + to_string(opt.param) + ", model parameter is " + model.param.str());
    ParaLens closed = close_learner(model, loss, rate);
    Lens r = tensor_lens(tensor_lens(identity_lens(loss.param), opt.lens), identity_lens(model.src));
    learner_ = reparameterise(closed, r);
    check_para(learner_);
  }

  std::pair<Bundle, Bundle> operator()(const Bundle& a, const Bundle& s, const Bundle& p, const Bundle& bt) const {
    Bundle q = concat(concat(concat(bt, s), p), a);
    Bundle out = learner_.lens.backward(q, {});
    const std::size_t nb = loss_.param.point.size();
    return {slice(out, nb, opt_.state.size()), slice(out, nb + opt_.state.size(), model_.param.point.size())};
  }

  /// Same map with every port checked.
  std::pair<Bundle, Bundle> checked(const Bundle& a, const Bundle& s, const Bundle& p, const Bundle& bt) const {
    check_bundle(model_.src.point, a, "step input");
    check_bundle(opt_.state, s, "step optimiser state");
    check_bundle(model_.param.point, p, "step parameters");
    check_bundle(loss_.param.point, bt, "step labels");
    return (*this)(a, s, p, bt);
  }

  /// The step viewed as an endo-map on S x P parameterised by the data A x B.
  ParametricMap as_parametric_map() const {
    const std::size_t na = model_.src.point.size(), nb = loss_.param.point.size(), ns = opt_.state.size();
    return {model_.src.point + loss_.param.point, opt_.state + model_.param.point, opt_.state + model_.param.point,
            [self = *this, na, nb, ns](const Bundle& absp) {
              Bundle a = slice(absp, 0, na), bt = slice(absp, na, nb);
              Bundle s = slice(absp, na + nb, ns), p = slice(absp, na + nb + ns, absp.size() - na - nb - ns);
              auto [s2, p2] = self(a, s, p, bt);
              return concat(s2, p2);
            }};
  }

  const ParaLens& learner() const { return learner_; }
  const OptimiserLens& optimiser() const { return opt_; }

 private:
  ParaLens model_;
  LossLens loss_;
  OptimiserLens opt_;
  ParaLens learner_;
};

/// Single-example supervised step for a plan.
inline SupervisedStep assemble_supervised(const TrainPlan& plan) {
  if (plan.mode != Mode::LearnParams) throw Error(ErrorCode::InterfaceMismatch, "assemble_supervised needs learn_params mode");
  return SupervisedStep(plan.model, plan.loss, learning_rate(plan.rate, plan.loss.dst.point), plan.optimiser(plan.model.param.point));
}

/// n parallel copies of a trivially or label-parameterised lens (losses, rates).
inline ParaLens replicate(const ParaLens& f, std::size_t n) {
  ParaLens out = f;
  for (std::size_t i = 1; i < n; ++i) out = para_tensor(out, f);
  return out;
}

/// Deep dreaming: the optimiser sits on the input port and the parameters are
/// frozen. put(s, a, p, b_t) -> (s, a).
class DreamStep {
 public:
  DreamStep(const ParaLens& model, const LossLens& loss, const ParaLens& rate, const OptimiserLens& opt)
      : model_(model), loss_(loss), opt_(opt) {
    if (opt.param != model.src.point)
      throw Error(ErrorCode::InterfaceMismatch, "dream optimiser works on " + to_string(opt.param) + ", model input is " + model.src.str());
    ParaLens closed = close_learner(model, loss, rate);
    Lens r = tensor_lens(tensor_lens(identity_lens(loss.param), identity_lens(model.param)), opt.lens);
    learner_ = reparameterise(closed, r);
    check_para(learner_);
  }

  std::pair<Bundle, Bundle> operator()(const Bundle& s, const Bundle& a, const Bundle& p, const Bundle& bt) const {
    Bundle q = concat(concat(concat(bt, p), s), a);
    Bundle out = learner_.lens.backward(q, {});
    const std::size_t off = loss_.param.point.size() + model_.param.point.size();
    return {slice(out, off, opt_.state.size()), slice(out, off + opt_.state.size(), model_.src.point.size())};
  }

 private:
  ParaLens model_;
  LossLens loss_;
  OptimiserLens opt_;
  ParaLens learner_;
};

inline DreamStep assemble_dream(const TrainPlan& plan) {
  if (plan.mode != Mode::DeepDream) throw Error(ErrorCode::InterfaceMismatch, "assemble_dream needs deep_dream mode");
  return DreamStep(plan.model, plan.loss, learning_rate(plan.rate, plan.loss.dst.point), plan.optimiser(plan.model.src.point));
}

/// The GAN model: g on the latent track, identity on the data track, then two
/// weight-tied copies of d. Parameters are ordered (P, Q).
inline ParaLens gan_model(const ParaLens& generator, const ParaLens& discriminator) {
  if (generator.dst != discriminator.src)
    throw Error(ErrorCode::InterfaceMismatch, "generator output " + generator.dst.str() + " is not the discriminator input");
  ParaLens tracks = para_tensor(generator, para_identity(discriminator.src));
  ParaLens composite = para_compose(tracks, weight_tie(discriminator, discriminator));
  // Para composition yields (Q, P); present it as (P, Q).
  ParaLens out = reparameterise(composite, permute_blocks({generator.param, discriminator.param}, {1, 0}));
  out.name = "gan(" + generator.name + ", " + discriminator.name + ")";
  return out;
}

/// Wasserstein GAN step: dot loss against the constant labels (1, -1), a
/// constant rate alpha and gradient descent-ascent (descend P, ascend Q).
/// (z, x_r, p, q) -> (p, q).
class GanStep {
 public:
  GanStep(const ParaLens& generator, const ParaLens& discriminator, double alpha)
      : p_size_(generator.param.point.size()), payoff_(discriminator.dst.point) {
    model_ = gan_model(generator, discriminator);
    LossLens loss = dot_loss(payoff_ + payoff_);
    ParaLens rate = learning_rate({RateKind::Constant, alpha}, loss.dst.point);
    OptimiserLens opt = gda(generator.param.point, discriminator.param.point);
    inner_.emplace(model_, loss, rate, opt);
    for (const auto& t : payoff_) labels_.push_back(Tensor::filled(t.shape, 1.0));
    for (const auto& t : payoff_) labels_.push_back(Tensor::filled(t.shape, -1.0));
  }

  std::pair<Bundle, Bundle> operator()(const Bundle& z, const Bundle& x_real, const Bundle& p, const Bundle& q) const {
    auto [s, pq] = (*inner_)(concat(z, x_real), {}, concat(p, q), labels_);
    return split(pq, p_size_);
  }

  /// Discriminator payoffs (d(g(z, p), q), d(x_r, q)).
  Bundle payoffs(const Bundle& z, const Bundle& x_real, const Bundle& p, const Bundle& q) const {
    return model_.forward(concat(p, q), concat(z, x_real));
  }

  const Bundle& labels() const { return labels_; }

 private:
  std::size_t p_size_;
  Port payoff_;
  ParaLens model_;
  std::optional<SupervisedStep> inner_;
  Bundle labels_;
};

inline GanStep assemble_gan(const ParaLens& generator, const ParaLens& discriminator, double alpha) {
  return GanStep(generator, discriminator, alpha);
}

// ---------------------------------------------------------------------------
// Supervised training loop.

struct Example {
  Bundle input;
  Bundle label;
};

using Dataset = std::vector<Example>;

struct MetricsRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  std::optional<double> accuracy;
};

struct FitResult {
  StepState state;
  std::vector<MetricsRow> trace;
};

namespace detail {

inline std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t.at(i) > t.at(best)) best = i;
  return best;
}

inline double loss_total(const Bundle& losses) {
  double s = 0.0;
  for (const auto& t : losses)
    for (std::size_t i = 0; i < t.size(); ++i) s += t.at(i);
  return s;
}

/// Whether a prediction counts as correct, or nullopt when the labels are
/// not categorical (real-valued regression targets).
inline std::optional<bool> correct(const Bundle& prediction, const Bundle& label) {
  if (label.size() != 1) return std::nullopt;
  const Tensor& y = label[0];
  if (y.kind() == ScalarKind::Z2) return prediction[0].identical(y);
  if (y.size() < 2) return std::nullopt;
  double mass = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y.at(i) != 0.0 && y.at(i) != 1.0) return std::nullopt;
    mass += y.at(i);
  }
  if (mass != 1.0) return std::nullopt;
  return argmax(prediction[0]) == argmax(y);
}

}  // namespace detail

/// Per-epoch Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

/// Batched trainer. Holds the batched step and the forward pieces used for
/// metrics.
class Trainer {
 public:
  explicit Trainer(const TrainPlan& plan)
      : plan_(plan),
        batched_model_(batch(plan.model, plan.batch_size)),
        batched_loss_(replicate(plan.loss, plan.batch_size)),
        step_(batched_model_, batched_loss_, replicate(learning_rate(plan.rate, plan.loss.dst.point), plan.batch_size),
              plan.optimiser(plan.model.param.point)) {
    if (plan.mode != Mode::LearnParams) throw Error(ErrorCode::InterfaceMismatch, "Trainer needs learn_params mode");
    if (plan.batch_size == 0) throw Error(ErrorCode::ValidationError, "batch size must be at least 1");
  }

  StepState initial_state(const Bundle& params) const { return {params, step_.optimiser().initial_state(), 0}; }

  /// One update on a batch of exactly batch_size examples. Returns the
  /// summed loss and the number of correct predictions (if categorical).
  std::pair<double, std::optional<std::size_t>> step(StepState& st, std::span<const Example* const> examples) const {
    Bundle a, bt;
    for (const Example* e : examples) {
      a = concat(std::move(a), e->input);
      bt = concat(std::move(bt), e->label);
    }
    Bundle preds = batched_model_.forward(st.params, a);
    Bundle losses = batched_loss_.forward(bt, preds);
    const double loss = detail::loss_total(losses);
    if (!std::isfinite(loss))
      throw Error(ErrorCode::NumericError, "non-finite loss at step " + std::to_string(st.t));
    std::optional<std::size_t> hits = 0;
    const std::size_t nout = plan_.model.dst.point.size();
    for (std::size_t i = 0; i < examples.size(); ++i) {
      auto ok = detail::correct(slice(preds, i * nout, nout), examples[i]->label);
      if (!ok) {
        hits.reset();
        break;
      }
      *hits += *ok;
    }
    auto [s, p] = step_(a, st.opt_state, st.params, bt);
    st.opt_state = std::move(s);
    st.params = std::move(p);
    ++st.t;
    return {loss, hits};
  }

  /// Folds the step over shuffled batches; a trailing partial batch is dropped.
  FitResult fit(const Dataset& data, std::size_t epochs, StepState state, Rng& rng) const {
    if (data.empty()) throw Error(ErrorCode::ValidationError, "fit: dataset is empty");
    FitResult result{std::move(state), {}};
    const std::size_t bs = plan_.batch_size;
    if (data.size() < bs) throw Error(ErrorCode::ValidationError, "fit: dataset smaller than one batch");
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      auto order = shuffled_indices(data.size(), rng);
      std::vector<const Example*> batch_ptrs(bs);
      for (std::size_t start = 0; start + bs <= data.size(); start += bs) {
        for (std::size_t i = 0; i < bs; ++i) batch_ptrs[i] = &data[order[start + i]];
        auto [loss, hits] = step(result.state, batch_ptrs);
        MetricsRow row{epoch, result.state.t, loss / double(bs), std::nullopt};
        if (hits) row.accuracy = double(*hits) / double(bs);
        result.trace.push_back(row);
      }
    }
    return result;
  }

  const TrainPlan& plan() const { return plan_; }

 private:
  TrainPlan plan_;
  ParaLens batched_model_;
  LossLens batched_loss_;
  SupervisedStep step_;
};

/// Fraction of examples the model classifies correctly (argmax for one-hot
/// real labels, exact match for Z2 labels).
inline double evaluate_accuracy(const ParaLens& model, const Bundle& params, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& e : data) {
    auto ok = detail::correct(model.forward(params, e.input), e.label);
    if (!ok) throw Error(ErrorCode::ValidationError, "evaluate_accuracy: labels are not categorical");
    hits += *ok;
  }
  return double(hits) / double(data.size());
}

inline double evaluate_loss(const ParaLens& model, const LossLens& loss, const Bundle& params, const Dataset& data) {
  double s = 0.0;
  for (const auto& e : data) s += detail::loss_total(loss.forward(e.label, model.forward(params, e.input)));
  return s;
}

}  // namespace paralens
