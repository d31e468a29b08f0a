#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "json.hpp"
#include "lassoflex/encoding.hpp"

namespace lfn::analysis {

/// Inputs within this distance of a knot or kink are rejected.
inline constexpr double kKnotTolerance = 1e-9;

/// Linear-kernel ridge regression on encoded points. With `spec` unset the
/// encoder is the identity; with `rotation` set, inputs are rotated before
/// encoding.
struct KernelProblem {
  std::optional<enc::PleSpec> spec;
  std::vector<std::vector<double>> points;
  std::vector<double> labels;
  double ridge = 0.1;
  std::optional<Eigen::MatrixXd> rotation;

  void validate() const;
};

Eigen::VectorXd encode_point(const KernelProblem& p, const std::vector<double>& x);
Eigen::MatrixXd gram_matrix(const KernelProblem& p);
/// f(x) = k_x^T (K + ridge I)^-1 y
double kernel_ridge_predict(const KernelProblem& p, const std::vector<double>& query);

/// The two-point rotation example: the same problem before and after a 45
/// degree rotation of the inputs.
struct RotationWitness {
  Eigen::Matrix2d gram;
  Eigen::Matrix2d gram_rotated;
  double prediction = 0.0;
  double prediction_rotated = 0.0;

  nlohmann::ordered_json to_json() const;
};
RotationWitness rotation_witness();

/// 1 + <phi(x), phi(x')>
double value_kernel_ple(double x, double x2, const enc::FeatureEncoding& f);
/// 1{s(x) = s(x')} / Delta_s^2; zero outside the grid.
double slope_kernel_ple(double x, double x2, const enc::FeatureEncoding& f);

/// f(x) = c + sum_r a_r relu(w_r x + b_r)
struct ReluNet1 {
  std::vector<double> a, w, b;
  double c = 0.0;

  std::size_t width() const { return a.size(); }
  double operator()(double x) const;
  /// df/dx away from kinks.
  double slope(double x) const;
  /// -b_r / w_r for every w_r != 0.
  std::vector<double> kink_candidates() const;
  void validate() const;
};

ReluNet1 random_relu_net(std::size_t m, std::uint64_t seed);

/// 1 + sum_r [relu(z_r) relu(z_r') + a_r^2 (1 + x x') 1_r(x) 1_r(x')]
double value_kernel_mlp(double x, double x2, const ReluNet1& net);
/// sum_r (w_r^2 + a_r^2) 1_r(x) 1_r(x')
double slope_kernel_mlp(double x, double x2, const ReluNet1& net);

/// Distinct candidate kinks in (lo, hi) where the left and right slopes differ.
std::size_t count_kinks(const ReluNet1& net, double lo, double hi);

/// Linear-on-PLE weights of a continuous piecewise-linear function.
struct SplineWeights {
  std::vector<double> w;
  double c = 0.0;
};
/// w_t = alpha_t Delta_t, c = s(b_0).
SplineWeights spline_to_weights(const enc::FeatureEncoding& f, const std::vector<double>& slopes, double base);
/// alpha_t = w_t / Delta_t
std::vector<double> weights_to_slopes(const enc::FeatureEncoding& f, const SplineWeights& sw);
/// c + sum_t w_t e_t(x)
double ple_linear(const enc::FeatureEncoding& f, const SplineWeights& sw, double x);
/// Direct evaluation of the spline with the given bin slopes, constant
/// outside the grid.
double spline_value(const enc::FeatureEncoding& f, const std::vector<double>& slopes, double base, double x);

/// Singular values below rel_tol * sigma_max count as zero.
std::size_t numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-8);

/// Slope kernel over every pair of sample points, several per bin.
struct SlopeSweep {
  std::size_t bins = 0;
  std::size_t pairs = 0;
  std::size_t cross_bin_pairs = 0;
  std::size_t cross_bin_nonzero = 0;
  double same_bin_max_error = 0.0;  // |K - 1/Delta^2|

  nlohmann::ordered_json to_json() const;
};
SlopeSweep slope_sweep(const enc::FeatureEncoding& f, std::size_t per_bin = 3);

}  // namespace lfn::analysis
