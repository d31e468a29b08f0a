#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lassoflex/autodiff.hpp"

namespace lfn::nd {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_grad = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

/// Builds the scalar loss on the given tape. Parameters must be bound with
/// tape.param() inside the callback so perturbations are picked up.
using LossFn = std::function<Var(Tape&)>;

/// Central-difference check of every coordinate of every parameter.
/// Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckReport check_gradients(const LossFn& f, const std::vector<Parameter*>& params, double eps = 1e-6,
                                double floor = 1e-6);

}  // namespace lfn::nd
