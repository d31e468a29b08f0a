#include "lassoflex/optim.hpp"

#include <cmath>

#include "lassoflex/errors.hpp"

namespace lfn::nd {

Tensor adam_update(Tensor& param, const Tensor& grad, AdamMoments& st, const AdamConfig& cfg) {
  if (grad.shape() != param.shape()) throw DimensionError("adam: gradient shape does not match parameter");
  if (st.m.shape() != param.shape()) st = AdamMoments(param.shape());
  ++st.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(st.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(st.t));
  Tensor eta(param.shape());
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double g = grad[i];
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    eta[i] = cfg.lr / (std::sqrt(vhat) + cfg.eps);
    param[i] -= eta[i] * mhat;
  }
  return eta;
}

void Optimizer::add(Parameter* p, bool decay) {
  params_.push_back(p);
  decay_.push_back(decay);
  on_add(p);
}

void Optimizer::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

std::size_t Optimizer::index_of(const Parameter* p) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i] == p) return i;
  throw ContractError("optimizer: parameter not registered");
}

void Adam::on_add(Parameter* p) {
  moments_.emplace_back(p->value.shape());
  mean_steps_.push_back(cfg_.lr);
  steps_.emplace_back();
}

void Adam::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (decay_[k] && cfg_.weight_decay > 0.0) {
      const double shrink = 1.0 - cfg_.lr * cfg_.weight_decay;
      for (auto& v : p.value.data()) v *= shrink;
    }
    Tensor eta = adam_update(p.value, p.grad, moments_[k], cfg_);
    double acc = 0.0;
    for (double e : eta.data()) acc += e;
    mean_steps_[k] = eta.numel() ? acc / double(eta.numel()) : cfg_.lr;
    steps_[k] = std::move(eta);
  }
}

double Adam::mean_step(const Parameter* p) const { return mean_steps_[index_of(p)]; }

Tensor Adam::last_steps(const Parameter* p) const {
  const Tensor& s = steps_[index_of(p)];
  return s.numel() ? s : Tensor(p->value.shape(), cfg_.lr);
}

void SgdNesterov::on_add(Parameter* p) { bufs_.emplace_back(p->value.shape()); }

void SgdNesterov::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    Tensor& buf = bufs_[k];
    const double wd = decay_[k] ? cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double g = p.grad[i] + wd * p.value[i];
      buf[i] = cfg_.momentum * buf[i] + g;
      p.value[i] -= cfg_.lr * (g + cfg_.momentum * buf[i]);
    }
  }
}

}  // namespace lfn::nd
