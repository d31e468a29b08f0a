#include "lassoflex/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lassoflex/errors.hpp"
#include "lassoflex/optim.hpp"

namespace lfn::train {

using nd::Tensor;
using nlohmann::ordered_json;

LambdaPath build_lambda_path(const LambdaPathConfig& cfg) {
  if (!(cfg.lambda_start > 0.0) || !std::isfinite(cfg.lambda_start))
    throw ConfigError("lambda path: lambda_start must be positive");
  if (cfg.size < 2) throw ConfigError("lambda path: size must be at least 2");
  if (!(cfg.power > 0.0 && cfg.power <= 1.0)) throw ConfigError("lambda path: power must lie in (0, 1]");
  const double end = cfg.lambda_end ? *cfg.lambda_end : cfg.lambda_start * cfg.multiplier;
  if (!(end > cfg.lambda_start) || !std::isfinite(end))
    throw ConfigError("lambda path: lambda_end must exceed lambda_start");

  LambdaPath p;
  p.lambda_start = cfg.lambda_start;
  p.lambda_end = end;
  p.power = cfg.power;
  const double b0 = std::pow(cfg.lambda_start, 1.0 / cfg.power);
  const double bE = std::pow(end, 1.0 / cfg.power);
  const double S1 = double(cfg.size - 1);
  for (std::size_t i = 0; i < cfg.size; ++i) {
    const double b = b0 + (double(i) / S1) * (bE - b0);
    p.values.push_back(std::pow(b, cfg.power));
  }
  return p;
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adamw" || s == "adam") return OptimizerKind::AdamW;
  if (s == "sgd-nesterov" || s == "sgd") return OptimizerKind::SgdNesterov;
  throw ConfigError("unknown optimizer '" + s + "' (expected adamw or sgd-nesterov)");
}

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::AdamW ? "adamw" : "sgd-nesterov"; }

StepScaling parse_step_scaling(const std::string& s) {
  if (s == "eta") return StepScaling::PerFeature;
  if (s == "eta-mean") return StepScaling::Mean;
  if (s == "none") return StepScaling::None;
  throw ConfigError("unknown prox step scaling '" + s + "' (expected eta, eta-mean or none)");
}

std::string step_scaling_name(StepScaling s) {
  switch (s) {
    case StepScaling::PerFeature: return "eta";
    case StepScaling::Mean: return "eta-mean";
    case StepScaling::None: return "none";
  }
  return "eta";
}

ordered_json TrainConfig::to_json() const {
  ordered_json j;
  j["pretrain_epochs"] = pretrain_epochs;
  j["lambda_epochs"] = lambda_epochs;
  j["patience"] = patience;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["momentum"] = momentum;
  j["optimizer"] = optimizer_name(optimizer);
  j["M"] = M;
  j["lambda_bar"] = lambda_bar;
  j["prox"] = prox::variant_name(variant);
  j["ema_clamp_live"] = ema_options.clamp_live;
  j["ema_enforce_feasibility"] = ema_options.enforce_feasibility;
  j["ema_decay"] = ema_decay;
  j["prox_step_scaling"] = step_scaling_name(step_scaling);
  j["lambda_start"] = path.lambda_start;
  j["lambda_end"] = path.lambda_end ? ordered_json(*path.lambda_end) : ordered_json(nullptr);
  j["lambda_multiplier"] = path.multiplier;
  j["path_size"] = path.size;
  j["path_power"] = path.power;
  j["seed"] = seed;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  auto get = [&](const char* key, auto& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  get("pretrain_epochs", c.pretrain_epochs);
  get("lambda_epochs", c.lambda_epochs);
  get("patience", c.patience);
  get("batch_size", c.batch_size);
  get("lr", c.lr);
  get("weight_decay", c.weight_decay);
  get("momentum", c.momentum);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  get("M", c.M);
  get("lambda_bar", c.lambda_bar);
  if (j.contains("prox")) c.variant = prox::parse_variant(j.at("prox").get<std::string>());
  get("ema_clamp_live", c.ema_options.clamp_live);
  get("ema_enforce_feasibility", c.ema_options.enforce_feasibility);
  get("ema_decay", c.ema_decay);
  if (j.contains("prox_step_scaling")) c.step_scaling = parse_step_scaling(j.at("prox_step_scaling").get<std::string>());
  get("lambda_start", c.path.lambda_start);
  if (j.contains("lambda_end") && !j.at("lambda_end").is_null()) c.path.lambda_end = j.at("lambda_end").get<double>();
  get("lambda_multiplier", c.path.multiplier);
  get("path_size", c.path.size);
  get("path_power", c.path.power);
  get("seed", c.seed);
  return c;
}

// ---- data preparation ------------------------------------------------------

enc::PleSpec fit_encoder(const data::TabularDataset& ds, std::size_t bins, enc::BreakpointMode mode) {
  const auto rows = ds.rows_in(data::SplitLabel::Train);
  if (rows.empty()) throw DataError("fit_encoder: no training rows");
  std::optional<enc::TreeTarget> tt;
  if (mode == enc::BreakpointMode::Tree) {
    enc::TreeTarget t;
    t.classification = ds.task == Task::Classification;
    for (auto r : rows) t.y.push_back(ds.target[r]);
    tt = std::move(t);
  }
  enc::PleSpec spec;
  for (const auto& c : ds.columns) {
    if (c.kind == data::ColumnKind::Categorical) {
      if (c.vocab.empty()) throw DataError("fit_encoder: column '" + c.name + "' has no vocabulary");
      spec.features.push_back(enc::onehot(c.vocab.size(), c.name));
      continue;
    }
    std::vector<double> col;
    col.reserve(rows.size());
    for (auto r : rows) col.push_back(c.numeric[r]);
    spec.features.push_back(enc::fit_breakpoints(col, bins, mode, tt, c.name).encoding);
  }
  return spec;
}

namespace {

void fill_targets(Prepared& p, const data::TabularDataset& ds, const std::vector<std::size_t>& rows) {
  if (ds.task == Task::Classification)
    p.labels = data::target_labels(ds, rows);
  else
    p.y = data::target_matrix(ds, rows);
}

}  // namespace

Prepared prepare_encoded(const data::TabularDataset& ds, const enc::PleSpec& spec, data::SplitLabel s) {
  const auto rows = ds.rows_in(s);
  Prepared p;
  p.x = enc::encode_padded(data::feature_matrix(ds, rows), spec);
  fill_targets(p, ds, rows);
  return p;
}

Prepared prepare_raw(const data::TabularDataset& ds, data::SplitLabel s) {
  const auto rows = ds.rows_in(s);
  Prepared p;
  p.x = data::expanded_matrix(ds, rows);
  fill_targets(p, ds, rows);
  return p;
}

namespace {

Tensor take_rows(const Tensor& x, std::span<const std::size_t> idx) {
  nd::Shape s = x.shape();
  const std::size_t stride = x.numel() / s[0];
  s[0] = idx.size();
  Tensor out(s);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(x.data().begin() + std::ptrdiff_t(idx[i] * stride), stride,
                out.data().begin() + std::ptrdiff_t(i * stride));
  return out;
}

Prepared take(const Prepared& p, std::span<const std::size_t> idx) {
  Prepared b;
  b.x = take_rows(p.x, idx);
  if (p.y.rank()) b.y = take_rows(p.y, idx);
  for (auto i : idx)
    if (!p.labels.empty()) b.labels.push_back(p.labels[i]);
  return b;
}

nd::Var loss_of(nd::Var out, const Prepared& b, Task task) {
  return task == Task::Classification ? nd::softmax_xent(out, b.labels) : nd::mse_loss(out, b.y);
}

constexpr std::size_t kEvalChunk = 1024;

template <class F>
void for_chunks(std::size_t n, F&& f) {
  std::vector<std::size_t> idx;
  for (std::size_t s = 0; s < n; s += kEvalChunk) {
    const std::size_t e = std::min(n, s + kEvalChunk);
    idx.resize(e - s);
    std::iota(idx.begin(), idx.end(), s);
    f(std::span<const std::size_t>(idx));
  }
}

}  // namespace

Tensor predict(PathModel& m, const Tensor& x) {
  const std::size_t n = x.dim(0);
  Tensor out({n, m.outputs()});
  std::mt19937_64 rng(0);
  for_chunks(n, [&](std::span<const std::size_t> idx) {
    nd::Tape tape;
    const Tensor& o = m.forward(tape, take_rows(x, idx), false, rng).value();
    std::copy(o.data().begin(), o.data().end(), out.data().begin() + std::ptrdiff_t(idx[0] * m.outputs()));
  });
  return out;
}

double mean_loss(PathModel& m, const Prepared& p, Task task) {
  const std::size_t n = p.rows();
  if (n == 0) throw DataError("mean_loss: empty split");
  double acc = 0.0;
  std::mt19937_64 rng(0);
  for_chunks(n, [&](std::span<const std::size_t> idx) {
    nd::Tape tape;
    const Prepared b = take(p, idx);
    acc += loss_of(m.forward(tape, b.x, false, rng), b, task).value().item() * double(idx.size());
  });
  return acc / double(n);
}

Metric parse_metric(const std::string& s) {
  if (s == "rmse") return Metric::Rmse;
  if (s == "mse") return Metric::Mse;
  if (s == "accuracy") return Metric::Accuracy;
  if (s == "logloss") return Metric::LogLoss;
  throw ConfigError("unknown metric '" + s + "' (expected rmse, mse, accuracy or logloss)");
}

double metric_value(const Tensor& out, const Prepared& p, Metric m) {
  const std::size_t n = out.dim(0), c = out.dim(1);
  if (n == 0) throw DataError("metric: empty split");
  switch (m) {
    case Metric::Rmse:
    case Metric::Mse: {
      if (p.y.numel() != out.numel()) throw ConfigError("metric: regression metric needs regression targets");
      double s = 0.0;
      for (std::size_t i = 0; i < out.numel(); ++i) s += (out[i] - p.y[i]) * (out[i] - p.y[i]);
      s /= double(out.numel());
      return m == Metric::Rmse ? std::sqrt(s) : s;
    }
    case Metric::Accuracy: {
      if (p.labels.size() != n) throw ConfigError("metric: accuracy needs class labels");
      std::size_t hit = 0;
      for (std::size_t r = 0; r < n; ++r) {
        std::size_t arg = 0;
        for (std::size_t k = 1; k < c; ++k)
          if (out.at(r, k) > out.at(r, arg)) arg = k;
        hit += int(arg) == p.labels[r];
      }
      return double(hit) / double(n);
    }
    case Metric::LogLoss: {
      if (p.labels.size() != n) throw ConfigError("metric: logloss needs class labels");
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        double mx = out.at(r, 0);
        for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, out.at(r, k));
        double z = 0.0;
        for (std::size_t k = 0; k < c; ++k) z += std::exp(out.at(r, k) - mx);
        s += std::log(z) + mx - out.at(r, std::size_t(p.labels[r]));
      }
      return s / double(n);
    }
  }
  throw ConfigError("unknown metric");
}

double evaluate(PathModel& m, const Prepared& p, Metric metric) { return metric_value(predict(m, p.x), p, metric); }

// ---- reports -------------------------------------------------------------------

ordered_json EpochRecord::to_json() const {
  ordered_json j;
  j["phase"] = phase;
  j["stage"] = stage;
  j["lambda"] = lambda;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  j["val_loss"] = val_loss;
  j["ema_val_loss"] = ema_val_loss;
  j["k"] = k;
  return j;
}

std::string TrainReport::jsonl() const {
  std::ostringstream os;
  for (const auto& e : epochs) os << e.to_json().dump() << '\n';
  return os.str();
}

ordered_json TrainReport::summary() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["pretrain_best_val"] = pretrain_best_val;
  j["best_val"] = best_val;
  j["best_id"] = best_id;
  ordered_json st = ordered_json::array();
  for (const auto& s : stages)
    st.push_back({{"lambda", s.lambda}, {"lambda_eff", s.lambda_eff}, {"epochs", s.epochs}, {"k", s.k},
                  {"best_val", s.best_val}});
  j["stages"] = st;
  j["importance"] = importance;
  j["dropped_at"] = dropped_at;
  j["wall_clock_s"] = wall_clock_s;
  return j;
}

void EmaShadow::init(const std::vector<nd::Parameter*>& params) {
  values.clear();
  for (auto* p : params) values.push_back(p->value);
}

void EmaShadow::update(const std::vector<nd::Parameter*>& params) {
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& s = values[k];
    const auto& v = params[k]->value;
    for (std::size_t i = 0; i < v.numel(); ++i) s[i] = decay * s[i] + (1.0 - decay) * v[i];
  }
}

// ---- trainer -----------------------------------------------------------------

Trainer::Trainer(PathModel& model, const TrainData& data, TrainConfig cfg)
    : model_(model), data_(data), cfg_(cfg), rng_(cfg.seed), params_(model.parameters()) {
  if (cfg_.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(cfg_.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(cfg_.ema_decay >= 0.0 && cfg_.ema_decay < 1.0)) throw ConfigError("ema decay must lie in [0, 1)");
  if (data_.train.rows() == 0 || data_.val.rows() == 0) throw DataError("training needs train and validation rows");
  if (cfg_.optimizer == OptimizerKind::AdamW) {
    nd::AdamConfig a;
    a.lr = cfg_.lr;
    a.weight_decay = cfg_.weight_decay;
    opt_ = std::make_unique<nd::Adam>(a);
  } else {
    nd::SgdConfig s;
    s.lr = cfg_.lr;
    s.momentum = cfg_.momentum;
    s.weight_decay = cfg_.weight_decay;
    opt_ = std::make_unique<nd::SgdNesterov>(s);
  }
  const nd::Parameter* beta = &model_.beta();
  for (auto* p : params_) opt_->add(p, p != beta);
  ema_.decay = cfg_.ema_decay;
  ema_.init(params_);
  dead_.assign(model_.features(), false);
  report_.dropped_at.assign(model_.features(), -1);
}

Trainer::~Trainer() = default;

void Trainer::record_epoch(EpochRecord rec) { report_.epochs.push_back(std::move(rec)); }

double Trainer::apply_prox(const prox::LayerProx& base) {
  auto gates = model_.gate_tensors();
  std::vector<Tensor*> live;
  std::vector<const Tensor*> ema;
  for (auto* g : gates) {
    live.push_back(&g->value);
    const auto it = std::find(params_.begin(), params_.end(), g);
    if (it == params_.end()) throw ContractError("gate tensor is not a model parameter");
    ema.push_back(&ema_.values[std::size_t(it - params_.begin())]);
  }
  const auto groups = model_.gate_groups();
  const bool hard = base.variant != prox::Variant::Convex;
  const double tol = 1e-9 * (1.0 + base.M);
  double worst = 0.0, mean_scale = 1.0;

  if (cfg_.step_scaling == StepScaling::PerFeature) {
    const Tensor eta = opt_->last_steps(&model_.beta());
    std::vector<prox::GateGroup> one(1);
    double acc = 0.0;
    for (std::size_t j = 0; j < groups.size(); ++j) {
      if (dead_[j]) continue;
      double s = 0.0;
      for (const auto& r : groups[j].theta) s += eta[r.index];
      s /= double(groups[j].theta.size());
      acc += s;
      prox::LayerProx cfg = base;
      cfg.lambda *= s;
      cfg.lambda_bar *= s;
      one[0] = groups[j];
      worst = std::max(worst, prox::apply_layer(live, ema, one, cfg));
    }
    mean_scale = acc / double(std::max<std::size_t>(1, groups.size()));
  } else {
    prox::LayerProx cfg = base;
    if (cfg_.step_scaling == StepScaling::Mean) mean_scale = opt_->mean_step(&model_.beta());
    cfg.lambda *= mean_scale;
    cfg.lambda_bar *= mean_scale;
    worst = prox::apply_layer(live, ema, groups, cfg);
  }
  if (hard && worst > tol)
    throw ContractError("prox left a feature outside the hierarchy constraint (violation " + std::to_string(worst) +
                        ")");
  return base.lambda * mean_scale;
}

double Trainer::train_epoch(const prox::LayerProx* prox) {
  const std::size_t n = data_.train.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  std::vector<std::size_t> dead_idx;
  for (std::size_t j = 0; j < dead_.size(); ++j)
    if (dead_[j]) dead_idx.push_back(j);

  double acc = 0.0;
  for (std::size_t s = 0; s < n; s += cfg_.batch_size) {
    const std::size_t e = std::min(n, s + cfg_.batch_size);
    const Prepared b = take(data_.train, std::span<const std::size_t>(order).subspan(s, e - s));
    opt_->zero_grad();
    nd::Tape tape;
    const auto loss = loss_of(model_.forward(tape, b.x, true, rng_), b, data_.task);
    tape.backward(loss);
    acc += loss.value().item() * double(e - s);
    opt_->step();
    if (!dead_idx.empty()) model_.mask_features(dead_idx);
    ema_.update(params_);
    if (prox) last_lambda_eff_ = apply_prox(*prox);
  }
  return acc / double(n);
}

double Trainer::validation_loss() { return mean_loss(model_, data_.val, data_.task); }

namespace {

/// Swaps EMA values into every non-gate parameter for the lifetime of the
/// guard. Gates stay live so the sparsity pattern is the current one.
class EmaSwap {
 public:
  EmaSwap(const std::vector<nd::Parameter*>& params, const std::vector<nd::Parameter*>& gates,
          const EmaShadow& ema)
      : params_(params) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (std::find(gates.begin(), gates.end(), params[k]) != gates.end()) continue;
      swapped_.push_back(k);
      saved_.push_back(params[k]->value);
      params[k]->value = ema.values[k];
    }
  }
  ~EmaSwap() {
    for (std::size_t i = 0; i < swapped_.size(); ++i) params_[swapped_[i]]->value = std::move(saved_[i]);
  }

 private:
  const std::vector<nd::Parameter*>& params_;
  std::vector<std::size_t> swapped_;
  std::vector<Tensor> saved_;
};

}  // namespace

double Trainer::ema_validation_loss() {
  EmaSwap swap(params_, model_.gate_tensors(), ema_);
  return validation_loss();
}

void Trainer::pretrain() {
  double best = validation_loss();
  Snapshot snap = take_snapshot(model_);
  std::size_t since = 0;
  for (std::size_t ep = 0; ep < cfg_.pretrain_epochs; ++ep) {
    EpochRecord rec;
    rec.phase = "pretrain";
    rec.epoch = ep;
    rec.train_loss = train_epoch(nullptr);
    rec.val_loss = validation_loss();
    rec.ema_val_loss = ema_validation_loss();
    rec.k = active_features(model_.beta().value).k;
    record_epoch(rec);
    if (rec.val_loss < best) {
      best = rec.val_loss;
      snap = take_snapshot(model_);
      since = 0;
    } else if (++since >= cfg_.patience) {
      break;
    }
  }
  restore_snapshot(model_, snap);
  report_.pretrain_best_val = best;
  report_.best_val = best;
  report_.best_id = "pretrain";
}

void Trainer::lambda_train(const LambdaPath& path) {
  const bool use_ema = cfg_.variant == prox::Variant::SeqEma;
  double global_best = report_.pretrain_best_val;
  if (report_.epochs.empty()) global_best = validation_loss();
  Snapshot global = take_snapshot(model_);
  std::string best_id = "pretrain";
  ema_.init(params_);

  const std::size_t d = model_.features();
  std::vector<double> last_norm(d, 0.0);
  std::size_t k = active_features(model_.beta().value).k;

  for (std::size_t st = 0; st < path.size() && k > 0; ++st) {
    prox::LayerProx pc;
    pc.variant = cfg_.variant;
    pc.lambda = path.values[st];
    pc.lambda_bar = cfg_.lambda_bar;
    pc.M = cfg_.M;
    pc.ema = cfg_.ema_options;

    StageRecord sr;
    sr.lambda = path.values[st];
    sr.best_val = std::numeric_limits<double>::infinity();
    std::size_t since = 0;
    for (std::size_t ep = 0; ep < cfg_.lambda_epochs; ++ep) {
      for (std::size_t j = 0; j < d; ++j)
        if (!dead_[j]) last_norm[j] = gate_norm(model_.beta().value, j);
      EpochRecord rec;
      rec.phase = "lambda";
      rec.stage = st;
      rec.lambda = pc.lambda;
      rec.epoch = ep;
      rec.train_loss = train_epoch(&pc);
      sr.lambda_eff = last_lambda_eff_;
      sr.epochs = ep + 1;

      const auto active = active_features(model_.beta().value);
      std::vector<bool> alive(d, false);
      for (auto j : active.indices) alive[j] = true;
      for (std::size_t j = 0; j < d; ++j)
        if (!alive[j] && !dead_[j]) {
          dead_[j] = true;
          report_.dropped_at[j] = int(st);
        }
      k = active.k;

      rec.val_loss = validation_loss();
      rec.ema_val_loss = ema_validation_loss();
      rec.k = k;
      record_epoch(rec);
      const double sel = use_ema ? rec.ema_val_loss : rec.val_loss;
      if (sel < global_best) {
        global_best = sel;
        best_id = "lambda-" + std::to_string(st);
        if (use_ema) {
          EmaSwap swap(params_, model_.gate_tensors(), ema_);
          global = take_snapshot(model_);
        } else {
          global = take_snapshot(model_);
        }
      }
      if (sel < sr.best_val) {
        sr.best_val = sel;
        since = 0;
      } else if (++since >= cfg_.patience) {
        break;
      }
      if (k == 0) break;
    }
    sr.k = k;
    report_.stages.push_back(sr);
  }

  // Path order: features pruned later rank higher; ties by their last gate norm.
  std::vector<double> final_norm(d);
  for (std::size_t j = 0; j < d; ++j) final_norm[j] = dead_[j] ? last_norm[j] : gate_norm(model_.beta().value, j);
  restore_snapshot(model_, global);
  report_.best_val = global_best;
  report_.best_id = best_id;
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  auto stage_of = [&](std::size_t j) {
    return report_.dropped_at[j] < 0 ? std::numeric_limits<int>::max() : report_.dropped_at[j];
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (stage_of(a) != stage_of(b)) return stage_of(a) > stage_of(b);
    return final_norm[a] > final_norm[b];
  });
  report_.importance = order;
}

void Trainer::run() {
  const auto t0 = std::chrono::steady_clock::now();
  pretrain();
  lambda_train(build_lambda_path(cfg_.path));
  report_.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- synthetic data ------------------------------------------------------------

ordered_json SyntheticTruth::to_json() const {
  ordered_json j;
  j["schema_version"] = 1;
  j["beta_star"] = beta_star;
  j["support"] = support;
  j["alpha"] = alpha;
  j["gamma"] = gamma;
  j["seed"] = seed;
  return j;
}

Synthetic synth_targeted(std::size_t d, const std::vector<std::size_t>& support, double alpha, double gamma,
                         std::size_t n, std::uint64_t seed) {
  if (d == 0 || n == 0) throw ConfigError("synth: d and n must be positive");
  for (auto j : support)
    if (j >= d) throw ConfigError("synth: support index " + std::to_string(j) + " out of range");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u12(1.0, 2.0);
  std::bernoulli_distribution coin(0.5);

  Synthetic s;
  s.truth.support = support;
  std::sort(s.truth.support.begin(), s.truth.support.end());
  s.truth.support.erase(std::unique(s.truth.support.begin(), s.truth.support.end()), s.truth.support.end());
  s.truth.alpha = alpha;
  s.truth.gamma = gamma;
  s.truth.seed = seed;
  s.truth.beta_star.assign(d, 0.0);
  for (auto j : s.truth.support) {
    const double sign = coin(rng) ? 1.0 : -1.0;
    s.truth.beta_star[j] = sign * u12(rng);
  }

  constexpr std::size_t kHidden = 16;
  std::vector<double> w1(d * kHidden), b1(kHidden), a(kHidden);
  for (auto& v : w1) v = n01(rng) / std::sqrt(double(d));
  for (auto& v : b1) v = n01(rng);
  for (auto& v : a) v = n01(rng) / std::sqrt(double(kHidden));
  const double c = n01(rng);

  auto& ds = s.dataset;
  ds.target_name = "y";
  ds.columns.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    ds.columns[j].name = "x" + std::to_string(j);
    ds.columns[j].numeric.resize(n);
    ds.columns[j].relevant = s.truth.beta_star[j] != 0.0;
  }
  ds.target.resize(n);
  std::vector<double> x(d), h(kHidden);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) x[j] = ds.columns[j].numeric[r] = n01(rng);
    double lin = 0.0;
    for (std::size_t j = 0; j < d; ++j) lin += s.truth.beta_star[j] * x[j];
    double net = c;
    for (std::size_t u = 0; u < kHidden; ++u) {
      double z = b1[u];
      for (std::size_t j = 0; j < d; ++j) z += x[j] * w1[j * kHidden + u];
      net += a[u] * std::max(z, 0.0);
    }
    ds.target[r] = lin + alpha * net + gamma * n01(rng);
  }
  return s;
}

double support_margin(const Tensor& beta, const std::vector<std::size_t>& support) {
  std::vector<bool> in(beta.dim(0), false);
  for (auto j : support) in.at(j) = true;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t j = 0; j < beta.dim(0); ++j) {
    const double g = gate_norm(beta, j);
    if (in[j])
      lo = std::min(lo, g);
    else
      hi = std::max(hi, g);
  }
  return lo - hi;
}

bool support_ranked_first(const Tensor& beta, const std::vector<std::size_t>& support) {
  return support_margin(beta, support) > 0.0;
}

}  // namespace lfn::train
