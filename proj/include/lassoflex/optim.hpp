#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lassoflex/autodiff.hpp"

namespace lfn::nd {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW)
};

/// First/second moment estimates for one tensor.
struct AdamMoments {
  Tensor m;
  Tensor v;
  long t = 0;

  AdamMoments() = default;
  explicit AdamMoments(const Shape& s) : m(s), v(s) {}
};

/// One bias-corrected Adam update of `param` in place. Returns the
/// per-coordinate effective step lr / (sqrt(v_hat) + eps).
Tensor adam_update(Tensor& param, const Tensor& grad, AdamMoments& st, const AdamConfig& cfg);

class Optimizer {
 public:
  virtual ~Optimizer() = default;

  /// Registers a parameter. `decay` selects whether weight decay applies.
  void add(Parameter* p, bool decay = true);
  virtual void step() = 0;
  /// Mean effective per-coordinate step of a registered parameter from the
  /// most recent step().
  virtual double mean_step(const Parameter* p) const = 0;
  /// Per-coordinate effective steps of a registered parameter from the most
  /// recent step().
  virtual Tensor last_steps(const Parameter* p) const = 0;
  virtual std::string kind() const = 0;

  std::size_t size() const { return params_.size(); }
  void zero_grad();

 protected:
  std::size_t index_of(const Parameter* p) const;
  virtual void on_add(Parameter* p) = 0;

  std::vector<Parameter*> params_;
  std::vector<bool> decay_;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  void step() override;
  double mean_step(const Parameter* p) const override;
  Tensor last_steps(const Parameter* p) const override;
  std::string kind() const override { return "adamw"; }

  const AdamConfig& config() const { return cfg_; }
  std::vector<AdamMoments>& moments() { return moments_; }
  const std::vector<AdamMoments>& moments() const { return moments_; }

 private:
  void on_add(Parameter* p) override;
  AdamConfig cfg_;
  std::vector<AdamMoments> moments_;
  std::vector<double> mean_steps_;
  std::vector<Tensor> steps_;
};

struct SgdConfig {
  double lr = 1e-2;
  double momentum = 0.9;
  double weight_decay = 0.0;  // coupled (added to the gradient)
};

/// SGD with Nesterov momentum: buf = mu * buf + g; p -= lr * (g + mu * buf).
class SgdNesterov final : public Optimizer {
 public:
  explicit SgdNesterov(SgdConfig cfg) : cfg_(cfg) {}
  void step() override;
  double mean_step(const Parameter*) const override { return cfg_.lr; }
  Tensor last_steps(const Parameter* p) const override { return Tensor(p->value.shape(), cfg_.lr); }
  std::string kind() const override { return "sgd-nesterov"; }

  std::vector<Tensor>& buffers() { return bufs_; }

 private:
  void on_add(Parameter* p) override;
  SgdConfig cfg_;
  std::vector<Tensor> bufs_;
};

}  // namespace lfn::nd
