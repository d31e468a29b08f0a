#include "lassoflex/gradcheck.hpp"

#include <cmath>

#include "lassoflex/errors.hpp"

namespace lfn::nd {

namespace {

double eval_loss(const LossFn& f) {
  Tape t;
  const double v = f(t).value().item();
  if (!std::isfinite(v)) throw NumericError("gradient check: non-finite loss");
  return v;
}

}  // namespace

GradCheckReport check_gradients(const LossFn& f, const std::vector<Parameter*>& params, double eps, double floor) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw ConfigError("gradient check step must lie in [1e-7, 1e-3]");
  for (auto* p : params) p->zero_grad();
  {
    Tape t;
    Var loss = f(t);
    if (!std::isfinite(loss.value().item())) throw NumericError("gradient check: non-finite loss");
    t.backward(loss);
  }
  GradCheckReport rep;
  for (auto* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double up = eval_loss(f);
      p->value[i] = orig - eps;
      const double down = eval_loss(f);
      p->value[i] = orig;
      const double num = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      rep.max_abs_grad = std::max(rep.max_abs_grad, std::abs(a));
      ++rep.coordinates;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = p->name;
        rep.worst_index = i;
      }
    }
  }
  return rep;
}

}  // namespace lfn::nd
