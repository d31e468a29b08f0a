#include "lassoflex/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lassoflex/errors.hpp"

namespace lfn::oracle {

double golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  // Endpoints matter when the minimizer sits on the boundary.
  double best = 0.5 * (a + b), fbest = f(best);
  for (double x : {a, b})
    if (f(x) < fbest) {
      fbest = f(x);
      best = x;
    }
  return best;
}

double hier_objective(double v, std::span<const double> U, double b, std::span<const double> W, double lambda,
                      double lambda_bar, double M) {
  double obj = 0.5 * (v - b) * (v - b) + lambda * std::abs(b);
  for (std::size_t i = 0; i < U.size(); ++i) {
    if (std::abs(W[i]) > M * std::abs(b) + 1e-12) return INFINITY;
    obj += 0.5 * (U[i] - W[i]) * (U[i] - W[i]) + lambda_bar * std::abs(W[i]);
  }
  return obj;
}

double convex_objective(double v, std::span<const double> U, double b, std::span<const double> w, double alpha,
                        double lambda_bar, double beta) {
  double obj = 0.5 * (b - v) * (b - v) + alpha * std::abs(b);
  double n2 = b * b;
  for (std::size_t i = 0; i < U.size(); ++i) {
    obj += 0.5 * (w[i] - U[i]) * (w[i] - U[i]) + lambda_bar * std::abs(w[i]);
    n2 += w[i] * w[i];
  }
  return obj + beta * std::sqrt(n2);
}

prox::GateBlock hier_oracle(double v, std::span<const double> U, double lambda, double M) {
  double umax = 0.0;
  for (double u : U) umax = std::max(umax, std::abs(u));
  const double B = std::abs(v) + M * umax * double(U.size() + 1) + 1.0;
  auto reduced = [&](double b) {
    double obj = 0.5 * (v - b) * (v - b) + lambda * std::abs(b);
    for (double u : U) {
      const double excess = std::max(0.0, std::abs(u) - M * std::abs(b));
      obj += 0.5 * excess * excess;
    }
    return obj;
  };
  const double bp = golden_section(reduced, 0.0, B);
  const double bn = golden_section(reduced, -B, 0.0);
  const double b = reduced(bp) <= reduced(bn) ? bp : bn;
  prox::GateBlock out{{b}, {}};
  for (double u : U) out.w.push_back(std::clamp(u, -M * std::abs(b), M * std::abs(b)));
  return out;
}

std::vector<double> seq_w_oracle(std::span<const double> U, double theta_new, double lambda_bar, double M) {
  const double cap = M * std::abs(theta_new);
  std::vector<double> w;
  for (double u : U) {
    auto f = [&](double x) { return 0.5 * (u - x) * (u - x) + lambda_bar * std::abs(x); };
    w.push_back(cap == 0.0 ? 0.0 : golden_section(f, -cap, cap));
  }
  return w;
}

prox::GateBlock convex_oracle(double v, std::span<const double> U, double alpha, double lambda_bar, double beta) {
  const double delta = 1e-10;
  const std::size_t n = U.size() + 1;
  std::vector<double> y(n), pen(n, lambda_bar);
  y[0] = v;
  pen[0] = alpha;
  for (std::size_t i = 0; i < U.size(); ++i) y[i + 1] = U[i];
  std::vector<double> x = y;
  for (int sweep = 0; sweep < 5000; ++sweep) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double rest = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        if (k != i) rest += x[k] * x[k];
      auto g = [&](double t) {
        return 0.5 * (t - y[i]) * (t - y[i]) + pen[i] * std::abs(t) + beta * std::sqrt(t * t + rest + delta * delta);
      };
      const double lim = std::abs(y[i]) + 1e-3;
      const double t = golden_section(g, -lim, lim);
      change = std::max(change, std::abs(t - x[i]));
      x[i] = t;
    }
    if (change < 1e-13) break;
  }
  prox::GateBlock out{{x[0]}, std::vector<double>(x.begin() + 1, x.end())};
  const std::vector<double> zeros(U.size(), 0.0);
  if (convex_objective(v, U, 0.0, zeros, alpha, lambda_bar, beta) <
      convex_objective(v, U, out.theta[0], out.w, alpha, lambda_bar, beta))
    out = {{0.0}, zeros};
  return out;
}

prox::GateBlock seq_ema_oracle(double theta, std::span<const double> W, double theta_ema,
                               std::span<const double> W_ema, double lambda, double M) {
  auto S = [](double x, double t) { return x > t ? x - t : (x < -t ? x + t : 0.0); };
  auto sgn = [](double x) { return x >= 0.0 ? 1.0 : -1.0; };
  const std::size_t K = W.size();
  const double beta_t = sgn(theta) * std::abs(S(theta_ema, lambda));
  std::vector<double> a(K);
  for (std::size_t i = 0; i < K; ++i) a[i] = std::abs(W_ema[i]);
  std::sort(a.begin(), a.end());
  std::reverse(a.begin(), a.end());
  std::vector<double> wm(K + 1);
  for (std::size_t m = 0; m <= K; ++m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += a[i];
    wm[m] = M / (1.0 + double(m) * M * M) * S(std::abs(beta_t) + M * s, lambda);
  }
  std::size_t chosen = K;
  for (std::size_t m = 0; m <= K; ++m) {
    const double hi = m == 0 ? INFINITY : a[m - 1];
    const double lo = m + 1 <= K ? a[m] : 0.0;
    if (lo <= wm[m] && wm[m] <= hi) {
      chosen = m;
      break;
    }
  }
  prox::GateBlock out{{beta_t}, {}};
  for (std::size_t i = 0; i < K; ++i) out.w.push_back(sgn(W[i]) * std::min(wm[chosen], std::abs(W_ema[i])));
  return out;
}

nlohmann::ordered_json SuiteReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["operator"] = op;
  j["instances"] = instances;
  j["max_objective_gap"] = max_objective_gap;
  j["max_solution_error"] = max_solution_error;
  j["feasibility_violations"] = feasibility_violations;
  j["nonexpansive_violations"] = nonexpansive_violations;
  return j;
}

namespace {

struct Instance {
  double v;
  std::vector<double> U;
  double lambda, lambda_bar, M;
};

Instance draw(std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> kdist(1, 4);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Instance in;
  in.v = 2.0 * n01(rng);
  in.U.resize(std::size_t(kdist(rng)));
  for (auto& x : in.U) x = 2.0 * n01(rng);
  in.lambda = u01(rng);
  in.lambda_bar = 0.5 * u01(rng);
  in.M = 0.2 + 2.8 * u01(rng);
  return in;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

SuiteReport run_suite(const std::string& op, std::size_t n, std::uint64_t seed) {
  const auto& ops = suite_ops();
  if (std::find(ops.begin(), ops.end(), op) == ops.end()) throw ConfigError("unknown operator '" + op + "'");
  std::mt19937_64 rng(seed);
  SuiteReport rep;
  rep.op = op;
  rep.instances = n;
  for (std::size_t it = 0; it < n; ++it) {
    Instance in = draw(rng);
    if (op == "soft") {
      const double got = prox::soft_threshold(in.v, in.lambda);
      auto f = [&](double b) { return 0.5 * (in.v - b) * (in.v - b) + in.lambda * std::abs(b); };
      const double ref = golden_section(f, -std::abs(in.v) - 1.0, std::abs(in.v) + 1.0);
      rep.max_objective_gap = std::max(rep.max_objective_gap, f(got) - f(ref));
      rep.max_solution_error = std::max(rep.max_solution_error, std::abs(got - ref));
    } else if (op == "hier") {
      const auto got = prox::hier_prox(in.v, in.U, in.lambda, in.M);
      const auto ref = hier_oracle(in.v, in.U, in.lambda, in.M);
      if (prox::violation(got, in.M) > 1e-12) ++rep.feasibility_violations;
      const double fg = hier_objective(in.v, in.U, got.theta[0], got.w, in.lambda, 0.0, in.M);
      const double fr = hier_objective(in.v, in.U, ref.theta[0], ref.w, in.lambda, 0.0, in.M);
      rep.max_objective_gap = std::max(rep.max_objective_gap, fg - fr);
      rep.max_solution_error = std::max(rep.max_solution_error, std::abs(got.theta[0] - ref.theta[0]));
    } else if (op == "seq") {
      const auto got = prox::seq_prox(in.v, in.U, in.lambda, in.lambda_bar, in.M);
      if (prox::violation(got, in.M) > 1e-12) ++rep.feasibility_violations;
      auto fb = [&](double b) { return 0.5 * (in.v - b) * (in.v - b) + in.lambda * std::abs(b); };
      const double bref = golden_section(fb, -std::abs(in.v) - 1.0, std::abs(in.v) + 1.0);
      const auto wref = seq_w_oracle(in.U, got.theta[0], in.lambda_bar, in.M);
      auto fw = [&](std::span<const double> w) {
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
          s += 0.5 * (in.U[i] - w[i]) * (in.U[i] - w[i]) + in.lambda_bar * std::abs(w[i]);
        return s;
      };
      rep.max_objective_gap =
          std::max({rep.max_objective_gap, fb(got.theta[0]) - fb(bref), fw(got.w) - fw(wref)});
      rep.max_solution_error =
          std::max({rep.max_solution_error, std::abs(got.theta[0] - bref), max_abs_diff(got.w, wref)});
    } else if (op == "seq-ema") {
      std::normal_distribution<double> n01(0.0, 1.0);
      const double theta_ema = in.v + 0.3 * n01(rng);
      std::vector<double> W_ema = in.U;
      for (auto& x : W_ema) x += 0.3 * n01(rng);
      const prox::GateBlock live{{in.v}, in.U}, ema{{theta_ema}, W_ema};
      const auto verbatim = prox::seq_hier_prox_adam_ema(live, ema, in.lambda, in.M, {false, false});
      const auto ref = seq_ema_oracle(in.v, in.U, theta_ema, W_ema, in.lambda, in.M);
      rep.max_solution_error = std::max(
          {rep.max_solution_error, std::abs(verbatim.theta[0] - ref.theta[0]), max_abs_diff(verbatim.w, ref.w)});
      const auto feasible = prox::seq_hier_prox_adam_ema(live, ema, in.lambda, in.M);
      if (prox::violation(feasible, in.M) > 1e-12) ++rep.feasibility_violations;
    } else if (op == "convex") {
      const auto got = prox::convex_relax_prox(in.v, in.U, in.lambda, in.lambda_bar, in.lambda);
      const auto ref = convex_oracle(in.v, in.U, in.lambda, in.lambda_bar, in.lambda);
      const double fg = convex_objective(in.v, in.U, got.theta[0], got.w, in.lambda, in.lambda_bar, in.lambda);
      const double fr = convex_objective(in.v, in.U, ref.theta[0], ref.w, in.lambda, in.lambda_bar, in.lambda);
      rep.max_objective_gap = std::max(rep.max_objective_gap, fg - fr);
      rep.max_solution_error = std::max(rep.max_solution_error, std::abs(got.theta[0] - ref.theta[0]));
      // Firm nonexpansiveness against a second random input.
      Instance other = draw(rng);
      other.U.resize(in.U.size());
      for (auto& x : other.U) x = 2.0 * std::normal_distribution<double>(0.0, 1.0)(rng);
      const auto p2 = prox::convex_relax_prox(other.v, other.U, in.lambda, in.lambda_bar, in.lambda);
      double lhs = (got.theta[0] - p2.theta[0]) * (got.theta[0] - p2.theta[0]);
      double rhs = (got.theta[0] - p2.theta[0]) * (in.v - other.v);
      for (std::size_t i = 0; i < in.U.size(); ++i) {
        const double dp = got.w[i] - p2.w[i];
        lhs += dp * dp;
        rhs += dp * (in.U[i] - other.U[i]);
      }
      if (lhs > rhs + 1e-12) ++rep.nonexpansive_violations;
    } else {  // adam
      std::normal_distribution<double> n01(0.0, 1.0);
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      const std::size_t K = in.U.size();
      nd::AdamConfig cfg;
      cfg.lr = 0.05 + 0.2 * u01(rng);
      nd::Tensor param({K}), grad({K});
      nd::AdamMoments st({K});
      st.t = long(std::uniform_int_distribution<int>(0, 5)(rng));
      for (std::size_t i = 0; i < K; ++i) {
        param[i] = in.U[i];
        grad[i] = n01(rng);
        if (st.t > 0) {
          st.m[i] = 0.3 * n01(rng);
          st.v[i] = 0.5 * u01(rng);
        }
      }
      const double lambda = 2.0 * in.lambda;
      // Independent moment recursion.
      std::vector<double> ref_target(K), ref_eta(K);
      const long t = st.t + 1;
      for (std::size_t i = 0; i < K; ++i) {
        const double m = cfg.beta1 * st.m[i] + (1 - cfg.beta1) * grad[i];
        const double v = cfg.beta2 * st.v[i] + (1 - cfg.beta2) * grad[i] * grad[i];
        const double mh = m / (1 - std::pow(cfg.beta1, double(t)));
        const double vh = v / (1 - std::pow(cfg.beta2, double(t)));
        ref_eta[i] = cfg.lr / (std::sqrt(vh) + cfg.eps);
        ref_target[i] = param[i] - ref_eta[i] * mh;
      }
      nd::Tensor out = param;
      prox::prox_adam_step(out, grad, st, lambda, cfg);
      for (std::size_t i = 0; i < K; ++i) {
        auto f = [&](double b) {
          return (b - ref_target[i]) * (b - ref_target[i]) / (2.0 * ref_eta[i]) + lambda * std::abs(b);
        };
        const double span = std::abs(ref_target[i]) + 1.0;
        const double ref = golden_section(f, -span, span);
        rep.max_objective_gap = std::max(rep.max_objective_gap, f(out[i]) - f(ref));
        rep.max_solution_error = std::max(rep.max_solution_error, std::abs(out[i] - ref));
      }
    }
  }
  return rep;
}

}  // namespace lfn::oracle
