#include "lassoflex/path_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lassoflex/errors.hpp"

namespace lfn {

using nd::Tensor;

void PathModel::mask_features(const std::vector<std::size_t>& features) {
  auto tensors = gate_tensors();
  const auto groups = gate_groups();
  for (auto j : features) {
    if (j >= groups.size()) throw ContractError("mask_features: feature index out of range");
    for (const auto& r : groups[j].theta) tensors[r.tensor]->value[r.index] = 0.0;
    for (const auto& r : groups[j].w) tensors[r.tensor]->value[r.index] = 0.0;
  }
}

double gate_norm(const Tensor& beta, std::size_t j) {
  const std::size_t c = beta.dim(1);
  double s = 0.0;
  for (std::size_t k = 0; k < c; ++k) s += beta.at(j, k) * beta.at(j, k);
  return std::sqrt(s);
}

ActiveSet active_features(const Tensor& beta) {
  ActiveSet a;
  for (std::size_t j = 0; j < beta.dim(0); ++j) {
    bool nz = false;
    for (std::size_t k = 0; k < beta.dim(1); ++k) nz = nz || beta.at(j, k) != 0.0;
    if (nz) a.indices.push_back(j);
  }
  a.k = a.indices.size();
  return a;
}

std::vector<std::size_t> feature_importance(const Tensor& beta) {
  std::vector<std::size_t> order(beta.dim(0));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> mag(order.size());
  for (std::size_t j = 0; j < mag.size(); ++j) mag[j] = gate_norm(beta, j);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return mag[a] > mag[b]; });
  return order;
}

Snapshot take_snapshot(PathModel& m) {
  Snapshot s;
  for (auto* p : m.parameters()) s.values.push_back(p->value);
  s.extra = m.extra_state();
  return s;
}

void restore_snapshot(PathModel& m, const Snapshot& s) {
  auto ps = m.parameters();
  if (ps.size() != s.values.size()) throw ContractError("snapshot does not match model parameters");
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s.values[i];
  m.set_extra_state(s.extra);
}

nlohmann::ordered_json tensor_to_json(const Tensor& t) {
  nlohmann::ordered_json j;
  j["shape"] = t.shape();
  j["data"] = t.vec();
  return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
  return Tensor(j.at("shape").get<nd::Shape>(), j.at("data").get<std::vector<double>>());
}

}  // namespace lfn
