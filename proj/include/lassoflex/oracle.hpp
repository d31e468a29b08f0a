#pragma once

// Brute-force reference solvers for the proximal subproblems. They share no
// code with the closed forms in prox.cpp beyond the objective definitions.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lassoflex/prox.hpp"

namespace lfn::oracle {

/// Golden-section minimization of a unimodal f on [a, b].
double golden_section(const std::function<double(double)>& f, double a, double b, double tol = 1e-13);

/// 1/2 (v-b)^2 + 1/2 ||U-W||^2 + lambda |b| + lambda_bar ||W||_1, +inf when
/// ||W||_inf > M |b| (beyond 1e-12).
double hier_objective(double v, std::span<const double> U, double b, std::span<const double> W, double lambda,
                      double lambda_bar, double M);

/// 1/2 (b-v)^2 + 1/2 ||w-U||^2 + alpha |b| + lambda_bar ||w||_1 + beta ||(b, w)||_2
double convex_objective(double v, std::span<const double> U, double b, std::span<const double> w, double alpha,
                        double lambda_bar, double beta);

/// Reduces to one dimension in b (W = clip(U, +-M|b|)) and searches both
/// sign branches.
prox::GateBlock hier_oracle(double v, std::span<const double> U, double lambda, double M);

/// Per-coordinate constrained minimization of the W step given theta'.
std::vector<double> seq_w_oracle(std::span<const double> U, double theta_new, double lambda_bar, double M);

/// Coordinate descent on the objective with the group norm smoothed by
/// sqrt(||x||^2 + delta^2); the origin is always tried as a candidate.
prox::GateBlock convex_oracle(double v, std::span<const double> U, double alpha, double lambda_bar, double beta);

/// Straight transcription of the EMA-driven sequential algorithm.
prox::GateBlock seq_ema_oracle(double theta, std::span<const double> W, double theta_ema,
                               std::span<const double> W_ema, double lambda, double M);

struct SuiteReport {
  std::string op;
  std::size_t instances = 0;
  double max_objective_gap = 0.0;
  double max_solution_error = 0.0;
  std::size_t feasibility_violations = 0;
  std::size_t nonexpansive_violations = 0;

  nlohmann::ordered_json to_json() const;
};

inline const std::vector<std::string>& suite_ops() {
  static const std::vector<std::string> ops = {"soft", "hier", "seq", "seq-ema", "convex", "adam"};
  return ops;
}

/// Runs `n` random instances (scalar gate, K <= 4) for one operator.
SuiteReport run_suite(const std::string& op, std::size_t n, std::uint64_t seed);

}  // namespace lfn::oracle
