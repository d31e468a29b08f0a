#include "lassoflex/baseline.hpp"

#include <cmath>

#include "lassoflex/errors.hpp"

namespace lfn {

using nd::Parameter;
using nd::Tensor;
using nd::Var;

nlohmann::ordered_json LassoNetConfig::to_json() const {
  nlohmann::ordered_json j;
  j["inputs"] = inputs;
  j["hidden"] = hidden;
  j["outputs"] = outputs;
  j["tau"] = tau;
  j["M"] = M;
  j["seed"] = seed;
  return j;
}

LassoNetConfig LassoNetConfig::from_json(const nlohmann::json& j) {
  LassoNetConfig c;
  c.inputs = j.at("inputs");
  c.hidden = j.at("hidden");
  c.outputs = j.at("outputs");
  c.tau = j.at("tau");
  c.M = j.at("M");
  c.seed = j.at("seed");
  return c;
}

namespace {

Parameter uniform(std::string name, nd::Shape s, double fan_in, std::mt19937_64& rng) {
  const double a = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(std::move(s));
  for (auto& v : t.data()) v = u(rng);
  return Parameter(std::move(name), std::move(t));
}

}  // namespace

LassoNet::LassoNet(LassoNetConfig cfg) : cfg_(cfg) {
  if (cfg_.inputs == 0 || cfg_.hidden == 0 || cfg_.outputs == 0)
    throw ConfigError("LassoNet: inputs, hidden and outputs must be positive");
  if (!(cfg_.M > 0.0)) throw ConfigError("LassoNet: M must be > 0");
  std::mt19937_64 rng(cfg_.seed);
  const std::size_t p = cfg_.inputs, K = cfg_.hidden, C = cfg_.outputs;
  {
    std::normal_distribution<double> n(0.0, 1e-2);
    Tensor b({p, C});
    for (auto& v : b.data()) v = n(rng);
    beta_ = Parameter("beta", std::move(b));
  }
  w1_ = uniform("mlp.w1", {p, K}, double(p), rng);
  b1_ = uniform("mlp.b1", {K}, double(p), rng);
  w2_ = uniform("mlp.w2", {K, C}, double(K), rng);
  b2_ = uniform("mlp.b2", {C}, double(K), rng);
}

Var LassoNet::forward(nd::Tape& t, const Tensor& x, bool, std::mt19937_64&) {
  if (x.rank() != 2 || x.dim(1) != cfg_.inputs)
    throw DimensionError("LassoNet: expected [n x " + std::to_string(cfg_.inputs) + "], got " +
                         nd::shape_str(x.shape()));
  Var in = t.constant(x);
  Var skip = nd::matmul(in, t.param(beta_));
  Var h = nd::relu(nd::add_trailing(nd::matmul(in, t.param(w1_)), t.param(b1_)));
  Var deep = nd::add_trailing(nd::matmul(h, t.param(w2_)), t.param(b2_));
  return nd::add(skip, nd::scale(deep, cfg_.tau));
}

std::vector<Parameter*> LassoNet::parameters() { return {&beta_, &w1_, &b1_, &w2_, &b2_}; }

std::vector<prox::GateGroup> LassoNet::gate_groups() const {
  const std::size_t p = cfg_.inputs, K = cfg_.hidden, C = cfg_.outputs;
  std::vector<prox::GateGroup> groups(p);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t c = 0; c < C; ++c) groups[j].theta.push_back({0, j * C + c});
    for (std::size_t k = 0; k < K; ++k) groups[j].w.push_back({1, j * K + k});
  }
  return groups;
}

train::TrainConfig lassonet_defaults() {
  train::TrainConfig c;
  c.variant = prox::Variant::Hier;
  c.optimizer = train::OptimizerKind::SgdNesterov;
  c.lr = 1e-3;
  c.momentum = 0.9;
  return c;
}

train::TrainReport lassonet_train(LassoNet& model, const train::TrainData& data, const train::TrainConfig& cfg) {
  train::Trainer t(model, data, cfg);
  t.run();
  return t.report();
}

}  // namespace lfn
