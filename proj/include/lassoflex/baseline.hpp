#pragma once

#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lassoflex/path_model.hpp"
#include "lassoflex/training.hpp"

namespace lfn {

struct LassoNetConfig {
  std::size_t inputs = 0;  // raw (expanded) input columns
  std::size_t hidden = 64;
  std::size_t outputs = 1;
  double tau = 1.0;
  double M = 10.0;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
  static LassoNetConfig from_json(const nlohmann::json& j);
};

/// y = x beta + tau * (relu(x W1 + b1) W2 + b2) on raw inputs, with W1's
/// row i gated by beta row i.
class LassoNet final : public PathModel {
 public:
  explicit LassoNet(LassoNetConfig cfg);

  nd::Var forward(nd::Tape& tape, const nd::Tensor& x, bool training, std::mt19937_64& rng) override;

  std::vector<nd::Parameter*> parameters() override;
  nd::Parameter& beta() override { return beta_; }
  std::vector<nd::Parameter*> gate_tensors() override { return {&beta_, &w1_}; }
  std::vector<prox::GateGroup> gate_groups() const override;

  std::size_t features() const override { return cfg_.inputs; }
  std::size_t outputs() const override { return cfg_.outputs; }
  std::string kind() const override { return "lassonet"; }

  const LassoNetConfig& config() const { return cfg_; }
  nd::Parameter& first_layer() { return w1_; }
  nd::Parameter& second_layer() { return w2_; }

 private:
  LassoNetConfig cfg_;
  nd::Parameter beta_, w1_, b1_, w2_, b2_;
};

/// Training defaults for the baseline: joint hier prox and SGD with
/// Nesterov momentum.
train::TrainConfig lassonet_defaults();

/// Builds a LassoNet over the prepared raw inputs and runs both phases.
train::TrainReport lassonet_train(LassoNet& model, const train::TrainData& data, const train::TrainConfig& cfg);

}  // namespace lfn
