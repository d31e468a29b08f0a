#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lassoflex/optim.hpp"
#include "lassoflex/tensor.hpp"

namespace lfn::prox {

/// sign with sign(0) = +1.
inline double sign_of(double v) { return v < 0.0 ? -1.0 : 1.0; }

double soft_threshold(double v, double tau);
std::vector<double> soft_threshold(std::span<const double> v, double tau);

/// Gate (scalar, or a row of per-class gates) together with its first-layer
/// weight row.
struct GateBlock {
  std::vector<double> theta;
  std::vector<double> w;
};

/// Joint hierarchical prox (sorting algorithm). For vector theta the gate
/// magnitude is its l2 norm and its direction is preserved.
GateBlock hier_prox(std::span<const double> theta, std::span<const double> w, double lambda, double M);
GateBlock hier_prox(double theta, std::span<const double> w, double lambda, double M);

/// Sequential prox: theta' = S_lambda(theta), then
/// W' = sign(W) * min(M|theta'|, S_lambda_bar(|W|)).
GateBlock seq_prox(std::span<const double> theta, std::span<const double> w, double lambda, double lambda_bar,
                   double M);
GateBlock seq_prox(double theta, std::span<const double> w, double lambda, double lambda_bar, double M);

struct EmaOptions {
  /// Clamp W by live magnitudes instead of the EMA magnitudes in the final min.
  bool clamp_live = false;
  /// Project the result onto ||W||_inf <= M|theta| after the sorting step.
  bool enforce_feasibility = true;
};

/// Sequential hierarchical prox driven by EMA magnitudes and live signs.
GateBlock seq_hier_prox_adam_ema(const GateBlock& live, const GateBlock& ema, double lambda, double M,
                                 EmaOptions opt = {});

/// Sparse-group prox in scaled coordinates (u_row = U / M). Returns (b, w~);
/// the caller maps back with W = M * w~.
GateBlock convex_relax_prox(std::span<const double> v, std::span<const double> u_scaled, double alpha,
                            double lambda_bar, double beta_grp);
GateBlock convex_relax_prox(double v, std::span<const double> u_scaled, double alpha, double lambda_bar,
                            double beta_grp);

/// Adam step on `param` followed by per-coordinate soft-thresholding with
/// tau_i = lambda * eta_i, eta_i = lr / (sqrt(v_hat_i) + eps).
nd::Tensor prox_adam_step(nd::Tensor& param, const nd::Tensor& grad, nd::AdamMoments& state, double lambda,
                          const nd::AdamConfig& cfg);

struct JumpLimits {
  double left;
  double right;
  bool jump;
};
/// Limits of the hier_prox gate as v -> 0-/0+ for the one-coordinate row (u).
JumpLimits discontinuity_limits(double u, double M, double lambda);

struct SwitchRate {
  double empirical;
  double bound;
  double std_error;
};
/// Monte-Carlo probability that any m_j - eta * xi_j changes sign,
/// xi_j ~ N(0, nu_j^2), alongside the Chebyshev bound sum eta^2 nu^2 / m^2.
SwitchRate branch_switch_rate(std::span<const double> margins, std::span<const double> noise_std, double eta,
                              std::size_t trials, std::uint64_t seed);

// ---- layer-level application --------------------------------------------

enum class Variant { Hier, Seq, SeqEma, Convex };
Variant parse_variant(const std::string& s);
std::string variant_name(Variant v);

/// Location of one coordinate inside a list of tensors.
struct Ref {
  std::size_t tensor;
  std::size_t index;
};

/// One gated feature: its gate coordinates and the weights it controls.
struct GateGroup {
  std::vector<Ref> theta;
  std::vector<Ref> w;
};

struct LayerProx {
  Variant variant = Variant::SeqEma;
  double lambda = 0.0;
  double lambda_bar = 0.0;
  double M = 10.0;
  EmaOptions ema;
};

/// Applies the selected operator to every group in place. `ema` must be
/// parallel to `live` for the EMA variant. Returns the largest violation of
/// ||W_j||_inf <= M ||theta_j|| (0 for the convex variant).
double apply_layer(const std::vector<nd::Tensor*>& live, const std::vector<const nd::Tensor*>& ema,
                   const std::vector<GateGroup>& groups, const LayerProx& cfg);

/// max(0, ||W||_inf - M ||theta||) for one block.
double violation(const GateBlock& b, double M);

}  // namespace lfn::prox
