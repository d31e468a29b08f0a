#include "lassoflex/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lassoflex/errors.hpp"

namespace lfn::analysis {

using nlohmann::ordered_json;

void KernelProblem::validate() const {
  if (!(ridge > 0.0)) throw ConfigError("kernel ridge: ridge parameter must be > 0");
  if (points.size() != labels.size()) throw DimensionError("kernel ridge: points and labels differ in length");
  if (points.empty()) throw ConfigError("kernel ridge: no training points");
  const std::size_t dim = points[0].size();
  for (const auto& p : points)
    if (p.size() != dim) throw DimensionError("kernel ridge: ragged points");
  if (spec && spec->size() != dim) throw DimensionError("kernel ridge: encoder width does not match the points");
  if (rotation) {
    const auto& M = *rotation;
    if (std::size_t(M.rows()) != dim || std::size_t(M.cols()) != dim)
      throw DimensionError("kernel ridge: rotation must be square over the input dimension");
    const double err = (M.transpose() * M - Eigen::MatrixXd::Identity(M.rows(), M.cols())).cwiseAbs().maxCoeff();
    if (err > 1e-12) throw ConfigError("kernel ridge: rotation is not orthogonal");
  }
}

Eigen::VectorXd encode_point(const KernelProblem& p, const std::vector<double>& x) {
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(x.size()));
  if (p.rotation) v = *p.rotation * v;
  if (!p.spec) return v;
  std::vector<double> out;
  for (std::size_t j = 0; j < p.spec->size(); ++j) {
    const auto& f = p.spec->features[j];
    const auto e = f.kind == enc::Kind::Ple ? enc::encode_ple(v(Eigen::Index(j)), f)
                                            : enc::encode_onehot(int(std::lround(v(Eigen::Index(j)))), f.cardinality);
    out.insert(out.end(), e.begin(), e.end());
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), Eigen::Index(out.size()));
}

namespace {

Eigen::MatrixXd encoded_rows(const KernelProblem& p) {
  std::vector<Eigen::VectorXd> z;
  for (const auto& x : p.points) z.push_back(encode_point(p, x));
  Eigen::MatrixXd Z(Eigen::Index(z.size()), z[0].size());
  for (std::size_t i = 0; i < z.size(); ++i) Z.row(Eigen::Index(i)) = z[i].transpose();
  return Z;
}

}  // namespace

Eigen::MatrixXd gram_matrix(const KernelProblem& p) {
  p.validate();
  const Eigen::MatrixXd Z = encoded_rows(p);
  return Z * Z.transpose();
}

double kernel_ridge_predict(const KernelProblem& p, const std::vector<double>& query) {
  p.validate();
  const Eigen::MatrixXd Z = encoded_rows(p);
  const Eigen::Index n = Z.rows();
  const Eigen::MatrixXd A = Z * Z.transpose() + p.ridge * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(p.labels.data(), n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const Eigen::VectorXd coef = lu.solve(y);
  if (!coef.allFinite() || (A * coef - y).norm() > 1e-8 * (1.0 + y.norm()))
    throw NumericError("kernel ridge: linear system is singular");
  return (Z * encode_point(p, query)).dot(coef);
}

ordered_json RotationWitness::to_json() const {
  auto mat = [](const Eigen::Matrix2d& m) {
    return ordered_json::array({ordered_json::array({m(0, 0), m(0, 1)}), ordered_json::array({m(1, 0), m(1, 1)})});
  };
  ordered_json j;
  j["schema_version"] = 1;
  j["gram"] = mat(gram);
  j["gram_rotated"] = mat(gram_rotated);
  j["prediction"] = prediction;
  j["prediction_rotated"] = prediction_rotated;
  return j;
}

RotationWitness rotation_witness() {
  KernelProblem p;
  enc::PleSpec spec;
  spec.features = {enc::ple_from_edges({-1.0, 0.0, 1.0}, "x1"), enc::ple_from_edges({-1.0, 0.0, 1.0}, "x2")};
  p.spec = spec;
  p.points = {{0.5, 0.0}, {0.0, 0.5}};
  p.labels = {1.0, -1.0};
  p.ridge = 0.1;

  RotationWitness w;
  w.gram = gram_matrix(p);
  w.prediction = kernel_ridge_predict(p, p.points[0]);

  const double h = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd M(2, 2);
  M << h, -h, h, h;
  p.rotation = M;
  w.gram_rotated = gram_matrix(p);
  w.prediction_rotated = kernel_ridge_predict(p, p.points[0]);
  return w;
}

double value_kernel_ple(double x, double x2, const enc::FeatureEncoding& f) { return 1.0 + enc::ple_gram(x, x2, f); }

namespace {

void reject_near_knot(double x, const enc::FeatureEncoding& f) {
  for (double b : f.edges)
    if (std::abs(x - b) < kKnotTolerance) throw ConfigError("input lies on a knot of the PLE grid");
}

bool inside(double x, const enc::FeatureEncoding& f) { return x > f.edges.front() && x < f.edges.back(); }

}  // namespace

double slope_kernel_ple(double x, double x2, const enc::FeatureEncoding& f) {
  if (f.kind != enc::Kind::Ple || f.bins() == 0) throw ConfigError("slope kernel needs a PLE encoding");
  reject_near_knot(x, f);
  reject_near_knot(x2, f);
  if (!inside(x, f) || !inside(x2, f)) return 0.0;
  const auto s = enc::locate(x, f).bin, s2 = enc::locate(x2, f).bin;
  if (s != s2) return 0.0;
  const double d = f.delta(s);
  return 1.0 / (d * d);
}

double ReluNet1::operator()(double x) const {
  double y = c;
  for (std::size_t r = 0; r < width(); ++r) y += a[r] * std::max(0.0, w[r] * x + b[r]);
  return y;
}

double ReluNet1::slope(double x) const {
  double g = 0.0;
  for (std::size_t r = 0; r < width(); ++r)
    if (w[r] * x + b[r] > 0.0) g += a[r] * w[r];
  return g;
}

std::vector<double> ReluNet1::kink_candidates() const {
  std::vector<double> k;
  for (std::size_t r = 0; r < width(); ++r)
    if (w[r] != 0.0) k.push_back(-b[r] / w[r]);
  return k;
}

void ReluNet1::validate() const {
  if (w.size() != a.size() || b.size() != a.size()) throw DimensionError("ReluNet1: a, w, b must share a width");
}

ReluNet1 random_relu_net(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  ReluNet1 net;
  for (std::size_t r = 0; r < m; ++r) {
    net.a.push_back(n01(rng));
    net.w.push_back(n01(rng));
    net.b.push_back(n01(rng));
  }
  net.c = n01(rng);
  return net;
}

namespace {

void reject_near_kink(double x, const ReluNet1& net) {
  for (std::size_t r = 0; r < net.width(); ++r)
    if (net.w[r] != 0.0 && std::abs(x + net.b[r] / net.w[r]) < kKnotTolerance)
      throw ConfigError("input lies on a kink of the ReLU net");
}

}  // namespace

double value_kernel_mlp(double x, double x2, const ReluNet1& net) {
  net.validate();
  reject_near_kink(x, net);
  reject_near_kink(x2, net);
  double k = 1.0;
  for (std::size_t r = 0; r < net.width(); ++r) {
    const double z = net.w[r] * x + net.b[r], z2 = net.w[r] * x2 + net.b[r];
    k += std::max(0.0, z) * std::max(0.0, z2);
    if (z > 0.0 && z2 > 0.0) k += net.a[r] * net.a[r] * (1.0 + x * x2);
  }
  return k;
}

double slope_kernel_mlp(double x, double x2, const ReluNet1& net) {
  net.validate();
  reject_near_kink(x, net);
  reject_near_kink(x2, net);
  double k = 0.0;
  for (std::size_t r = 0; r < net.width(); ++r)
    if (net.w[r] * x + net.b[r] > 0.0 && net.w[r] * x2 + net.b[r] > 0.0)
      k += net.w[r] * net.w[r] + net.a[r] * net.a[r];
  return k;
}

std::size_t count_kinks(const ReluNet1& net, double lo, double hi) {
  net.validate();
  std::vector<std::pair<double, double>> pts;  // location, slope jump contribution
  for (std::size_t r = 0; r < net.width(); ++r) {
    if (net.w[r] == 0.0) continue;
    const double t = -net.b[r] / net.w[r];
    if (t > lo && t < hi) pts.emplace_back(t, net.a[r] * std::abs(net.w[r]));
  }
  std::sort(pts.begin(), pts.end());
  std::size_t count = 0;
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t j = i;
    double jump = 0.0, scale = 0.0;
    while (j < pts.size() && std::abs(pts[j].first - pts[i].first) <= 1e-12 * std::max(1.0, std::abs(pts[i].first))) {
      jump += pts[j].second;
      scale += std::abs(pts[j].second);
      ++j;
    }
    if (std::abs(jump) > 1e-12 * std::max(1.0, scale)) ++count;
    i = j;
  }
  return count;
}

SplineWeights spline_to_weights(const enc::FeatureEncoding& f, const std::vector<double>& slopes, double base) {
  if (slopes.size() != f.bins()) throw DimensionError("spline: one slope per bin required");
  SplineWeights sw;
  sw.c = base;
  for (std::size_t t = 1; t <= f.bins(); ++t) sw.w.push_back(slopes[t - 1] * f.delta(t));
  return sw;
}

std::vector<double> weights_to_slopes(const enc::FeatureEncoding& f, const SplineWeights& sw) {
  if (sw.w.size() != f.bins()) throw DimensionError("spline: one weight per bin required");
  std::vector<double> s;
  for (std::size_t t = 1; t <= f.bins(); ++t) s.push_back(sw.w[t - 1] / f.delta(t));
  return s;
}

double ple_linear(const enc::FeatureEncoding& f, const SplineWeights& sw, double x) {
  const auto e = enc::encode_ple(x, f);
  double y = sw.c;
  for (std::size_t t = 0; t < e.size(); ++t) y += sw.w[t] * e[t];
  return y;
}

double spline_value(const enc::FeatureEncoding& f, const std::vector<double>& slopes, double base, double x) {
  double y = base;
  for (std::size_t t = 1; t <= f.bins(); ++t) {
    const double lo = f.edges[t - 1], hi = f.edges[t];
    if (x <= lo) break;
    y += slopes[t - 1] * (std::min(x, hi) - lo);
  }
  return y;
}

std::size_t numerical_rank(const Eigen::MatrixXd& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smax = s.maxCoeff();
  if (smax == 0.0) return 0;
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s(i) >= rel_tol * smax;
  return r;
}

ordered_json SlopeSweep::to_json() const {
  ordered_json j;
  j["bins"] = bins;
  j["pairs"] = pairs;
  j["cross_bin_pairs"] = cross_bin_pairs;
  j["cross_bin_nonzero"] = cross_bin_nonzero;
  j["same_bin_max_error"] = same_bin_max_error;
  return j;
}

SlopeSweep slope_sweep(const enc::FeatureEncoding& f, std::size_t per_bin) {
  if (per_bin == 0) throw ConfigError("slope sweep: per_bin must be positive");
  std::vector<std::pair<double, std::size_t>> pts;
  for (std::size_t t = 1; t <= f.bins(); ++t)
    for (std::size_t i = 1; i <= per_bin; ++i)
      pts.emplace_back(f.edges[t - 1] + f.delta(t) * double(i) / double(per_bin + 1), t);
  SlopeSweep s;
  s.bins = f.bins();
  for (const auto& [x, t] : pts)
    for (const auto& [x2, t2] : pts) {
      const double k = slope_kernel_ple(x, x2, f);
      ++s.pairs;
      if (t != t2) {
        ++s.cross_bin_pairs;
        s.cross_bin_nonzero += k != 0.0;
      } else {
        const double d = f.delta(t);
        s.same_bin_max_error = std::max(s.same_bin_max_error, std::abs(k - 1.0 / (d * d)));
      }
    }
  return s;
}

}  // namespace lfn::analysis
