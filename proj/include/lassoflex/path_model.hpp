#pragma once

#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lassoflex/autodiff.hpp"
#include "lassoflex/prox.hpp"

namespace lfn {

enum class Task { Regression, Classification };

/// What the training loop needs from a gated model.
class PathModel {
 public:
  virtual ~PathModel() = default;

  /// Maps a batch of prepared inputs (rows along axis 0) to [B, out].
  virtual nd::Var forward(nd::Tape& tape, const nd::Tensor& x, bool training, std::mt19937_64& rng) = 0;

  virtual std::vector<nd::Parameter*> parameters() = 0;
  /// Skip-connection gates, shape [d, out].
  virtual nd::Parameter& beta() = 0;
  /// Tensors addressed by gate_groups(), and the groups themselves.
  virtual std::vector<nd::Parameter*> gate_tensors() = 0;
  virtual std::vector<prox::GateGroup> gate_groups() const = 0;

  virtual std::size_t features() const = 0;
  virtual std::size_t outputs() const = 0;
  virtual std::string kind() const = 0;

  /// Non-parameter state that changes in training mode (e.g. running
  /// statistics), for snapshots.
  virtual nlohmann::json extra_state() const { return nullptr; }
  virtual void set_extra_state(const nlohmann::json&) {}

  /// Zeroes every coordinate of the given features' groups.
  void mask_features(const std::vector<std::size_t>& features);
};

/// Gate magnitude of feature j: l2 norm of beta row j.
double gate_norm(const nd::Tensor& beta, std::size_t j);

struct ActiveSet {
  std::size_t k = 0;
  std::vector<std::size_t> indices;
};
/// Features whose gate row has any exactly nonzero entry.
ActiveSet active_features(const nd::Tensor& beta);
/// Feature indices ordered by gate magnitude, descending; ties by index.
std::vector<std::size_t> feature_importance(const nd::Tensor& beta);

/// Parameter values plus extra state, for best-checkpoint bookkeeping.
struct Snapshot {
  std::vector<nd::Tensor> values;
  nlohmann::json extra;
};
Snapshot take_snapshot(PathModel& m);
void restore_snapshot(PathModel& m, const Snapshot& s);

nlohmann::ordered_json tensor_to_json(const nd::Tensor& t);
nd::Tensor tensor_from_json(const nlohmann::json& j);

}  // namespace lfn
