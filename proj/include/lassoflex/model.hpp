#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "lassoflex/autodiff.hpp"
#include "lassoflex/encoding.hpp"
#include "lassoflex/path_model.hpp"

namespace lfn {

struct FlexConfig {
  std::size_t features = 0;   // d
  std::size_t in_width = 1;   // padded encoding width (max K_i)
  std::size_t embed = 8;      // e
  std::size_t pfe_depth = 2;
  std::size_t mixer_blocks = 2;  // block 1 is the gated bottleneck
  std::size_t hidden = 64;       // bottleneck width
  std::size_t token_hidden = 64;
  std::size_t channel_hidden = 64;
  std::size_t outputs = 1;
  double tau = 1.0;
  double M = 10.0;
  double dropout = 0.1;
  double pfe_dropout = 0.0;
  /// Adds each feature's embedding weights to its prox group.
  bool gate_pfe = false;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
  static FlexConfig from_json(const nlohmann::json& j);
};

struct EmbeddingOut {
  nd::Var z;      // [B, d, e]
  nd::Var z_bar;  // [B, d]
};

/// Per-feature embeddings over PLE, a tied-group-lasso skip on the pooled
/// embeddings and a tau-scaled mixer whose first block is the gated
/// bottleneck (no LayerNorm, no residual).
class LassoFlexNet final : public PathModel {
 public:
  explicit LassoFlexNet(FlexConfig cfg);

  EmbeddingOut pfe_forward(nd::Tape& tape, const nd::Tensor& encoded, bool training, std::mt19937_64& rng);
  nd::Var mixer_forward(nd::Tape& tape, nd::Var z, bool training, std::mt19937_64& rng);
  nd::Var forward(nd::Tape& tape, const nd::Tensor& encoded, bool training, std::mt19937_64& rng) override;

  std::vector<nd::Parameter*> parameters() override;
  nd::Parameter& beta() override { return beta_; }
  std::vector<nd::Parameter*> gate_tensors() override;
  std::vector<prox::GateGroup> gate_groups() const override;

  std::size_t features() const override { return cfg_.features; }
  std::size_t outputs() const override { return cfg_.outputs; }
  std::string kind() const override { return "lassoflexnet"; }

  nlohmann::json extra_state() const override;
  void set_extra_state(const nlohmann::json& j) override;

  const FlexConfig& config() const { return cfg_; }
  FlexConfig& config() { return cfg_; }
  nd::Parameter& bottleneck_in() { return w1_; }
  nd::BatchNormState& batchnorm() { return bn_; }

 private:
  struct PfeLayer {
    nd::Parameter w, b, ln_g, ln_b;
  };
  struct MixerBlock {
    nd::Parameter tok_ln_g, tok_ln_b, tok_w1, tok_b1, tok_w2, tok_b2;
    nd::Parameter ch_ln_g, ch_ln_b, ch_w1, ch_b1, ch_w2, ch_b2;
  };

  FlexConfig cfg_;
  nd::Parameter in_w_, in_b_;
  std::vector<PfeLayer> pfe_;
  nd::BatchNormState bn_;
  nd::Parameter beta_;
  nd::Parameter w1_, b1_, w2_, b2_;
  std::vector<MixerBlock> blocks_;
  nd::Parameter head_w_, head_b_;
};

/// Checkpoint: magic header, format version, config, encoder spec, parameter
/// values, running statistics, optional EMA shadows.
struct Checkpoint {
  std::string model_kind;
  nlohmann::ordered_json config;
  enc::PleSpec spec;
  std::vector<std::pair<std::string, nd::Tensor>> params;
  nlohmann::json extra;
  std::vector<nd::Tensor> ema;
  nlohmann::json meta;
};

inline constexpr const char* kCheckpointMagic = "LASSOFLEX-CKPT";
inline constexpr int kCheckpointVersion = 1;

Checkpoint make_checkpoint(PathModel& m, const nlohmann::ordered_json& config, const enc::PleSpec& spec);
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);
/// Copies checkpoint values into a model built from the same config.
void apply_checkpoint(PathModel& m, const Checkpoint& c);

}  // namespace lfn
