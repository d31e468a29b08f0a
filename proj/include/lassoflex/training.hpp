#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lassoflex/data.hpp"
#include "lassoflex/encoding.hpp"
#include "lassoflex/path_model.hpp"
#include "lassoflex/prox.hpp"

namespace lfn::train {

struct LambdaPathConfig {
  double lambda_start = 1e-2;
  std::optional<double> lambda_end;
  double multiplier = 1e3;
  std::size_t size = 20;
  double power = 0.95;
};

/// lambda_i = (l0^(1/p) + i/(S-1) (lE^(1/p) - l0^(1/p)))^p
struct LambdaPath {
  double lambda_start = 0.0;
  double lambda_end = 0.0;
  double power = 1.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

LambdaPath build_lambda_path(const LambdaPathConfig& cfg);

enum class OptimizerKind { AdamW, SgdNesterov };

/// How lambda is turned into a per-step threshold. PerFeature uses
/// lambda * (mean step over the feature's gate coordinates), Mean uses the
/// mean step over all of beta, None uses lambda itself.
enum class StepScaling { PerFeature, Mean, None };
StepScaling parse_step_scaling(const std::string& s);
std::string step_scaling_name(StepScaling s);
OptimizerKind parse_optimizer(const std::string& s);
std::string optimizer_name(OptimizerKind k);

struct TrainConfig {
  std::size_t pretrain_epochs = 200;
  std::size_t lambda_epochs = 100;
  std::size_t patience = 20;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double momentum = 0.9;
  OptimizerKind optimizer = OptimizerKind::AdamW;
  double M = 10.0;
  double lambda_bar = 0.0;
  prox::Variant variant = prox::Variant::SeqEma;
  prox::EmaOptions ema_options;
  double ema_decay = 0.99;
  StepScaling step_scaling = StepScaling::PerFeature;
  LambdaPathConfig path;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Model-ready inputs for one split.
struct Prepared {
  nd::Tensor x;             // rows along axis 0
  nd::Tensor y;             // [n, 1] regression targets
  std::vector<int> labels;  // classification targets
  std::size_t rows() const { return x.rank() ? x.dim(0) : 0; }
};

struct TrainData {
  Task task = Task::Regression;
  Prepared train, val;
};

/// Fits one encoding per column on the training rows: PLE breakpoints for
/// numeric columns, one-hot over the vocabulary for categorical ones.
enc::PleSpec fit_encoder(const data::TabularDataset& ds, std::size_t bins, enc::BreakpointMode mode);
/// Padded PLE encoding [n, d, K] of the given rows.
Prepared prepare_encoded(const data::TabularDataset& ds, const enc::PleSpec& spec, data::SplitLabel s);
/// Raw inputs with one-hot categorical columns [n, p] of the given rows.
Prepared prepare_raw(const data::TabularDataset& ds, data::SplitLabel s);

struct EpochRecord {
  std::string phase;  // "pretrain" or "lambda"
  std::size_t stage = 0;
  double lambda = 0.0;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double ema_val_loss = 0.0;
  std::size_t k = 0;

  nlohmann::ordered_json to_json() const;
};

struct StageRecord {
  double lambda = 0.0;
  double lambda_eff = 0.0;
  std::size_t epochs = 0;
  std::size_t k = 0;
  double best_val = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<StageRecord> stages;
  double pretrain_best_val = 0.0;
  double best_val = 0.0;
  /// "pretrain" or "lambda-<stage>".
  std::string best_id = "pretrain";
  std::vector<std::size_t> importance;
  /// Stage index after which each feature was last active (-1: never pruned).
  std::vector<int> dropped_at;
  double wall_clock_s = 0.0;

  std::string jsonl() const;
  nlohmann::ordered_json summary() const;
};

/// Weight averages maintained alongside a model's parameters.
struct EmaShadow {
  double decay = 0.99;
  std::vector<nd::Tensor> values;

  void init(const std::vector<nd::Parameter*>& params);
  void update(const std::vector<nd::Parameter*>& params);
};

/// One training run. Holds the optimizer state and EMA shadows across
/// phases so pretrain() and lambda_train() can be called in sequence.
class Trainer {
 public:
  Trainer(PathModel& model, const TrainData& data, TrainConfig cfg);
  ~Trainer();

  /// Dense training with early stopping; restores the best weights.
  void pretrain();
  /// Walks the lambda path with a prox after every gradient step until no
  /// feature is active; restores the best weights seen, including the
  /// pretrained ones.
  void lambda_train(const LambdaPath& path);
  void run();

  const TrainReport& report() const { return report_; }
  TrainReport& report() { return report_; }
  const EmaShadow& ema() const { return ema_; }
  double validation_loss();
  double ema_validation_loss();

 private:
  double train_epoch(const prox::LayerProx* prox);
  double apply_prox(const prox::LayerProx& cfg);
  void record_epoch(EpochRecord rec);

  PathModel& model_;
  const TrainData& data_;
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<nd::Parameter*> params_;
  std::unique_ptr<nd::Optimizer> opt_;
  EmaShadow ema_;
  std::vector<bool> dead_;
  double last_lambda_eff_ = 0.0;
  TrainReport report_;
};

/// Mean loss (MSE or cross-entropy) of the model over a prepared split in
/// evaluation mode.
double mean_loss(PathModel& m, const Prepared& p, Task task);
/// Model outputs [n, out] in evaluation mode.
nd::Tensor predict(PathModel& m, const nd::Tensor& x);

enum class Metric { Rmse, Mse, Accuracy, LogLoss };
Metric parse_metric(const std::string& s);
/// Metric of raw outputs: predictions for regression, logits otherwise.
double metric_value(const nd::Tensor& out, const Prepared& p, Metric m);
double evaluate(PathModel& m, const Prepared& p, Metric metric);

struct SyntheticTruth {
  std::vector<double> beta_star;
  std::vector<std::size_t> support;
  double alpha = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
};

struct Synthetic {
  data::TabularDataset dataset;
  SyntheticTruth truth;
};

/// y = beta*^T x + alpha NN_R(x) + gamma eps with x, eps standard normal,
/// beta* ~ U[1,2] with random sign on the support and NN_R a fixed random
/// one-hidden-layer ReLU net.
Synthetic synth_targeted(std::size_t d, const std::vector<std::size_t>& support, double alpha, double gamma,
                         std::size_t n, std::uint64_t seed);

/// min |beta| over the support minus max |beta| elsewhere.
double support_margin(const nd::Tensor& beta, const std::vector<std::size_t>& support);
/// True when every support feature ranks above every other feature by |beta|.
bool support_ranked_first(const nd::Tensor& beta, const std::vector<std::size_t>& support);

}  // namespace lfn::train
