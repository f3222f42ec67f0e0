#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "paralens/boolean.hpp"
#include "paralens/io.hpp"
#include "paralens/layers.hpp"
#include "paralens/loss.hpp"
#include "paralens/optimiser.hpp"
#include "paralens/trainer.hpp"

namespace paralens {

using Json = nlohmann::json;

struct LayerSpec {
  std::string type;  // linear, bias, dense, sigmoid, relu, softargmax, conv, maxpool, reshape
  std::size_t in = 0, out = 0;
  Activation act = Activation::Identity;
  std::size_t k = 0, m = 0, n = 0;
  std::vector<std::size_t> from, to;
};

struct OptimiserSpec {
  std::string kind = "descent";  // ascent, descent, momentum, nesterov, adagrad, adam
  double gamma = 0.9;
  double epsilon = 0.001;
  double delta = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

struct DataSpec {
  std::string format = "csv";  // csv, idx
  std::string train, train_labels, test, test_labels;
  std::size_t limit = std::numeric_limits<std::size_t>::max();
};

struct DreamSpec {
  std::size_t steps = 10;
  std::size_t target = 0;
  std::string init = "zeros";  // zeros, random
  std::string params;          // optional parameter dump; random init otherwise
};

struct GanSpec {
  std::size_t steps = 2000;
  double alpha = 1.0 / 128.0;
  double data_mean = 4.0;
  double data_std = 1.0;
};

struct ExperimentConfig {
  std::string backend = "smooth";  // smooth, z2
  std::string mode = "train";      // train, dream, gan
  std::vector<LayerSpec> layers;
  std::string circuit;             // z2 model
  std::vector<LayerSpec> discriminator;
  std::string loss = "quadratic";  // quadratic, softmax_ce, dot, xor
  RateSpec rate;
  OptimiserSpec optimiser;
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  DataSpec data;
  DreamSpec dream;
  GanSpec gan;
  std::string output_dir = "out";
  std::filesystem::path base_dir;  // directory the config came from; relative paths resolve here

  std::string resolve(const std::string& p) const {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    return path.is_absolute() ? p : (base_dir / path).string();
  }
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::ValidationError, field + ": " + why);
}

template <class T>
T field_as(const Json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    invalid(path, "has the wrong type");
  }
}

inline void check_keys(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) invalid(path.empty() ? "<root>" : path, "must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) invalid(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
}

template <class T>
void read_opt(const Json& j, const char* key, const std::string& path, T& out) {
  if (j.contains(key)) out = field_as<T>(j.at(key), path.empty() ? key : path + "." + key);
}

inline void require_choice(const std::string& value, const std::string& field, std::initializer_list<const char*> choices) {
  std::string list;
  for (const char* c : choices) {
    if (value == c) return;
    list += list.empty() ? c : std::string(", ") + c;
  }
  invalid(field, "'" + value + "' is not one of " + list);
}

inline Activation parse_activation(const std::string& s, const std::string& field) {
  if (s == "identity") return Activation::Identity;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "relu") return Activation::Relu;
  invalid(field, "'" + s + "' is not one of identity, sigmoid, relu");
}

inline LayerSpec parse_layer(const Json& j, const std::string& path) {
  check_keys(j, path, {"type", "in", "out", "activation", "k", "m", "n", "from", "to"});
  if (!j.contains("type")) invalid(path + ".type", "is required");
  LayerSpec l;
  l.type = field_as<std::string>(j.at("type"), path + ".type");
  require_choice(l.type, path + ".type", {"linear", "bias", "dense", "sigmoid", "relu", "softargmax", "conv", "maxpool", "reshape"});
  auto need = [&](const char* key, std::size_t& out) {
    if (!j.contains(key)) invalid(path + "." + key, "is required for " + l.type);
    out = field_as<std::size_t>(j.at(key), path + "." + key);
    if (out == 0) invalid(path + "." + key, "must be positive");
  };
  if (l.type == "linear" || l.type == "dense") {
    need("in", l.in);
    need("out", l.out);
    if (l.type == "dense") l.act = parse_activation(j.value("activation", std::string("identity")), path + ".activation");
  } else if (l.type == "bias" || l.type == "sigmoid" || l.type == "relu" || l.type == "softargmax") {
    need("n", l.n);
  } else if (l.type == "conv") {
    need("k", l.k);
    need("m", l.m);
    if (l.k > l.m) invalid(path + ".k", "kernel larger than the image");
  } else if (l.type == "maxpool") {
    need("k", l.k);
    need("n", l.n);
  } else {
    if (!j.contains("from") || !j.contains("to")) invalid(path, "reshape needs from and to");
    l.from = field_as<std::vector<std::size_t>>(j.at("from"), path + ".from");
    l.to = field_as<std::vector<std::size_t>>(j.at("to"), path + ".to");
  }
  return l;
}

inline std::vector<LayerSpec> parse_layers(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) invalid(path, "must be a non-empty list of layers");
  std::vector<LayerSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_layer(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

inline ParaLens build_layer(const LayerSpec& l) {
  if (l.type == "linear") return linear(l.in, l.out);
  if (l.type == "bias") return bias(l.n);
  if (l.type == "dense") return dense(l.in, l.out, l.act);
  if (l.type == "sigmoid") return activation(Activation::Sigmoid, l.n);
  if (l.type == "relu") return activation(Activation::Relu, l.n);
  if (l.type == "softargmax") return softargmax(l.n);
  if (l.type == "conv") return conv_layer(l.k, l.m);
  if (l.type == "maxpool") return maxpool(l.k, l.n);
  return reshape_layer(Shape(l.from), Shape(l.to));
}

/// Builds a layer chain, reporting the first link whose shapes disagree.
inline ParaLens build_chain(const std::vector<LayerSpec>& layers, const std::string& path) {
  std::vector<ParaLens> built;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = path + "[" + std::to_string(i) + "]";
    try {
      built.push_back(build_layer(layers[i]));
    } catch (const Error& e) {
      detail::invalid(where, e.what());
    }
    if (i > 0 && built[i - 1].dst != built[i].src)
      detail::invalid(where, "expects input " + built[i].src.str() + " but the previous layer produces " + built[i - 1].dst.str());
  }
  return para_chain(built);
}

inline LossLens build_loss(const std::string& kind, const Port& prediction, const std::string& field = "loss") {
  if (prediction.size() != 1 || prediction[0].shape.rank() != 1)
    detail::invalid(field, "model output " + to_string(prediction) + " is not a single vector");
  const std::size_t b = prediction[0].shape[0];
  const bool z2 = prediction[0].kind == ScalarKind::Z2;
  if (kind == "xor") {
    if (!z2) detail::invalid(field, "xor loss needs a z2 model");
    return boolean_xor_loss(b);
  }
  if (z2) detail::invalid(field, kind + " loss needs a real model");
  if (kind == "quadratic") return quadratic_loss(b);
  if (kind == "softmax_ce") return softmax_ce_loss(b);
  if (kind == "dot") return dot_loss(b);
  detail::invalid(field, "'" + kind + "' is not one of quadratic, softmax_ce, dot, xor");
}

inline OptimiserLens build_optimiser(const OptimiserSpec& o, const Port& target) {
  if (o.kind == "ascent") return basic_update(target, Polarity::Ascent);
  if (o.kind == "descent") return basic_update(target, Polarity::Descent);
  if (o.kind == "momentum") return momentum(target, o.gamma);
  if (o.kind == "nesterov") return nesterov(target, o.gamma);
  if (o.kind == "adagrad") return adagrad(target, o.epsilon, o.delta);
  if (o.kind == "adam") return adam(target, {o.beta1, o.beta2, o.epsilon, o.delta, false});
  detail::invalid("optimiser.kind", "unknown optimiser '" + o.kind + "'");
}

inline ExperimentConfig parse_config_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  ExperimentConfig c;
  c.base_dir = base_dir;
  check_keys(j, "", {"backend", "mode", "model", "loss", "rate", "optimiser", "epochs", "batch_size", "seed", "data", "dream", "gan",
                     "output_dir"});
  read_opt(j, "backend", "", c.backend);
  require_choice(c.backend, "backend", {"smooth", "z2"});
  read_opt(j, "mode", "", c.mode);
  require_choice(c.mode, "mode", {"train", "dream", "gan"});
  if (!j.contains("model")) invalid("model", "is required");
  const Json& m = j.at("model");
  check_keys(m, "model", {"layers", "circuit", "discriminator"});
  if (c.backend == "z2") {
    if (!m.contains("circuit")) invalid("model.circuit", "is required for the z2 backend");
    c.circuit = field_as<std::string>(m.at("circuit"), "model.circuit");
  } else {
    if (!m.contains("layers")) invalid("model.layers", "is required for the smooth backend");
    c.layers = parse_layers(m.at("layers"), "model.layers");
  }
  if (m.contains("discriminator")) c.discriminator = parse_layers(m.at("discriminator"), "model.discriminator");
  read_opt(j, "loss", "", c.loss);
  require_choice(c.loss, "loss", {"quadratic", "softmax_ce", "dot", "xor"});
  if (j.contains("rate")) {
    const Json& r = j.at("rate");
    check_keys(r, "rate", {"kind", "epsilon"});
    std::string kind = "constant";
    read_opt(r, "kind", "rate", kind);
    require_choice(kind, "rate.kind", {"constant", "identity", "proportional"});
    c.rate.kind = kind == "constant" ? RateKind::Constant : kind == "identity" ? RateKind::Identity : RateKind::Proportional;
    read_opt(r, "epsilon", "rate", c.rate.epsilon);
  }
  if (j.contains("optimiser")) {
    const Json& o = j.at("optimiser");
    check_keys(o, "optimiser", {"kind", "gamma", "epsilon", "delta", "beta1", "beta2"});
    read_opt(o, "kind", "optimiser", c.optimiser.kind);
    require_choice(c.optimiser.kind, "optimiser.kind", {"ascent", "descent", "momentum", "nesterov", "adagrad", "adam"});
    if (c.optimiser.kind == "adagrad") c.optimiser.delta = 1e-7;
    read_opt(o, "gamma", "optimiser", c.optimiser.gamma);
    read_opt(o, "epsilon", "optimiser", c.optimiser.epsilon);
    read_opt(o, "delta", "optimiser", c.optimiser.delta);
    read_opt(o, "beta1", "optimiser", c.optimiser.beta1);
    read_opt(o, "beta2", "optimiser", c.optimiser.beta2);
    if (c.optimiser.gamma < 0) invalid("optimiser.gamma", "must be >= 0");
    if (!(c.optimiser.epsilon > 0)) invalid("optimiser.epsilon", "must be > 0");
    if (!(c.optimiser.delta > 0)) invalid("optimiser.delta", "must be > 0");
    if (!(c.optimiser.beta1 >= 0 && c.optimiser.beta1 < 1)) invalid("optimiser.beta1", "must lie in [0, 1)");
    if (!(c.optimiser.beta2 >= 0 && c.optimiser.beta2 < 1)) invalid("optimiser.beta2", "must lie in [0, 1)");
  }
  read_opt(j, "epochs", "", c.epochs);
  read_opt(j, "batch_size", "", c.batch_size);
  if (c.batch_size == 0) invalid("batch_size", "must be at least 1");
  read_opt(j, "seed", "", c.seed);
  read_opt(j, "output_dir", "", c.output_dir);
  if (j.contains("data")) {
    const Json& d = j.at("data");
    check_keys(d, "data", {"format", "train", "train_labels", "test", "test_labels", "limit"});
    read_opt(d, "format", "data", c.data.format);
    require_choice(c.data.format, "data.format", {"csv", "idx"});
    read_opt(d, "train", "data", c.data.train);
    read_opt(d, "train_labels", "data", c.data.train_labels);
    read_opt(d, "test", "data", c.data.test);
    read_opt(d, "test_labels", "data", c.data.test_labels);
    read_opt(d, "limit", "data", c.data.limit);
  }
  if (j.contains("dream")) {
    const Json& d = j.at("dream");
    check_keys(d, "dream", {"steps", "target", "init", "params"});
    read_opt(d, "steps", "dream", c.dream.steps);
    read_opt(d, "target", "dream", c.dream.target);
    read_opt(d, "init", "dream", c.dream.init);
    require_choice(c.dream.init, "dream.init", {"zeros", "random"});
    read_opt(d, "params", "dream", c.dream.params);
  }
  if (j.contains("gan")) {
    const Json& g = j.at("gan");
    check_keys(g, "gan", {"steps", "alpha", "data_mean", "data_std"});
    read_opt(g, "steps", "gan", c.gan.steps);
    read_opt(g, "alpha", "gan", c.gan.alpha);
    read_opt(g, "data_mean", "gan", c.gan.data_mean);
    read_opt(g, "data_std", "gan", c.gan.data_std);
    if (!(c.gan.alpha > 0)) invalid("gan.alpha", "must be > 0");
  }
  return c;
}

/// Shape and file checks run before any computation.
inline void validate(const ExperimentConfig& c, bool check_files = true) {
  using detail::invalid;
  auto exists = [&](const std::string& field, const std::string& p) {
    if (p.empty()) invalid(field, "is required");
    if (check_files && !std::filesystem::exists(c.resolve(p))) invalid(field, "file '" + c.resolve(p) + "' does not exist");
  };
  if (c.mode == "gan") {
    if (c.backend != "smooth") invalid("backend", "gan mode needs the smooth backend");
    if (c.discriminator.empty()) invalid("model.discriminator", "is required in gan mode");
    ParaLens g = build_chain(c.layers, "model.layers");
    ParaLens d = build_chain(c.discriminator, "model.discriminator");
    if (g.dst != d.src) invalid("model.discriminator", "expects " + d.src.str() + " but the generator produces " + g.dst.str());
    if (g.src.point != Port{real_type(Shape{1})} || g.dst.point != Port{real_type(Shape{1})})
      invalid("model.layers", "the gan toy uses a generator R^1 -> R^1");
    return;
  }
  ParaLens model = c.backend == "z2" ? (exists("model.circuit", c.circuit), circuit_model(load_circuit(c.resolve(c.circuit))))
                                     : build_chain(c.layers, "model.layers");
  LossLens loss = build_loss(c.loss, model.dst.point);
  if (c.rate.kind != RateKind::Identity && c.backend == "z2") invalid("rate.kind", "the z2 backend needs the identity rate");
  if (c.mode == "dream") {
    if (c.backend != "smooth") invalid("backend", "dream mode needs the smooth backend");
    if (c.dream.target >= element_count(model.dst.point)) invalid("dream.target", "outside the model output");
    if (!c.dream.params.empty()) exists("dream.params", c.dream.params);
    return;
  }
  exists("data.train", c.data.train);
  if (c.data.format == "idx") exists("data.train_labels", c.data.train_labels);
  if (!c.data.test.empty()) exists("data.test", c.data.test);
  if (!c.data.test_labels.empty()) exists("data.test_labels", c.data.test_labels);
  (void)loss;
}

inline Json read_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot read config " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

/// Reads, parses and validates a config file.
inline ExperimentConfig parse_config(const std::string& path) {
  ExperimentConfig c = parse_config_json(read_config_json(path), std::filesystem::path(path).parent_path());
  validate(c);
  return c;
}

}  // namespace paralens
