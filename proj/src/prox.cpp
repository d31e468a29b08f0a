#include "lassoflex/prox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lassoflex/errors.hpp"

namespace lfn::prox {

using nd::Tensor;

double soft_threshold(double v, double tau) {
  if (!(tau >= 0.0)) throw ConfigError("soft threshold needs tau >= 0");
  const double a = std::abs(v) - tau;
  return a > 0.0 ? std::copysign(a, v) : 0.0;
}

std::vector<double> soft_threshold(std::span<const double> v, double tau) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = soft_threshold(v[i], tau);
  return out;
}

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double norm_inf(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

/// Unit direction of theta; sign(0) = +1 on the first coordinate.
std::vector<double> direction(std::span<const double> theta) {
  std::vector<double> d(theta.size(), 0.0);
  if (theta.empty()) return d;
  if (theta.size() == 1) {
    d[0] = sign_of(theta[0]);
    return d;
  }
  const double n = norm2(theta);
  if (n == 0.0) {
    d[0] = 1.0;
    return d;
  }
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = theta[i] / n;
  return d;
}

/// The shared scalar w_m~ of the sorting algorithm for gate magnitude g and
/// row magnitudes `mags`.
double hier_threshold(double g, std::vector<double> mags, double lambda, double M) {
  std::sort(mags.begin(), mags.end(), std::greater<>());
  const std::size_t K = mags.size();
  double prefix = 0.0;
  double fallback = 0.0, fallback_gap = INFINITY;
  for (std::size_t m = 0; m <= K; ++m) {
    if (m > 0) prefix += mags[m - 1];
    const double wm = M / (1.0 + double(m) * M * M) * soft_threshold(g + M * prefix, lambda);
    const double upper = m == 0 ? INFINITY : mags[m - 1];
    const double lower = m == K ? 0.0 : mags[m];
    if (lower <= wm && wm <= upper) return wm;
    const double gap = std::max(lower - wm, wm - upper);
    if (gap < fallback_gap) {
      fallback_gap = gap;
      fallback = wm;
    }
  }
  return fallback;
}

std::vector<double> abs_of(std::span<const double> v) {
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
  return a;
}

void check_M(double M) {
  if (!(M > 0.0)) throw ConfigError("hierarchy multiplier M must be > 0");
}

}  // namespace

double violation(const GateBlock& b, double M) { return std::max(0.0, norm_inf(b.w) - M * norm2(b.theta)); }

GateBlock hier_prox(std::span<const double> theta, std::span<const double> w, double lambda, double M) {
  check_M(M);
  const double wm = hier_threshold(norm2(theta), abs_of(w), lambda, M);
  GateBlock out;
  const auto dir = direction(theta);
  for (double d : dir) out.theta.push_back(d * wm / M);
  for (double x : w) out.w.push_back(sign_of(x) * std::min(wm, std::abs(x)));
  return out;
}

GateBlock hier_prox(double theta, std::span<const double> w, double lambda, double M) {
  return hier_prox(std::span<const double>(&theta, 1), w, lambda, M);
}

GateBlock seq_prox(std::span<const double> theta, std::span<const double> w, double lambda, double lambda_bar,
                   double M) {
  check_M(M);
  GateBlock out;
  const double g = norm2(theta);
  const double shrunk = soft_threshold(g, lambda);
  if (theta.size() == 1) {
    out.theta = {soft_threshold(theta[0], lambda)};
  } else {
    for (double d : direction(theta)) out.theta.push_back(d * shrunk);
  }
  const double cap = M * std::abs(shrunk);
  for (double x : w) out.w.push_back(sign_of(x) * std::min(cap, soft_threshold(std::abs(x), lambda_bar)));
  return out;
}

GateBlock seq_prox(double theta, std::span<const double> w, double lambda, double lambda_bar, double M) {
  return seq_prox(std::span<const double>(&theta, 1), w, lambda, lambda_bar, M);
}

GateBlock seq_hier_prox_adam_ema(const GateBlock& live, const GateBlock& ema, double lambda, double M,
                                 EmaOptions opt) {
  check_M(M);
  if (live.theta.size() != ema.theta.size() || live.w.size() != ema.w.size())
    throw ContractError("EMA shadow shape does not match live parameters");
  GateBlock out;
  // Lasso first: EMA magnitude, live sign.
  const double gate = std::abs(soft_threshold(norm2(ema.theta), lambda));
  std::vector<double> dir = direction(live.theta);
  if (live.theta.size() > 1 && norm2(live.theta) == 0.0) dir = direction(ema.theta);
  for (double d : dir) out.theta.push_back(d * gate);

  const auto ema_mags = abs_of(ema.w);
  const double wm = hier_threshold(gate, ema_mags, lambda, M);
  const double cap = M * gate;
  for (std::size_t i = 0; i < live.w.size(); ++i) {
    const double clamp_by = opt.clamp_live ? std::abs(live.w[i]) : ema_mags[i];
    double mag = std::min(wm, clamp_by);
    if (opt.enforce_feasibility) mag = std::min(mag, cap);
    out.w.push_back(sign_of(live.w[i]) * mag);
  }
  return out;
}

GateBlock convex_relax_prox(std::span<const double> v, std::span<const double> u_scaled, double alpha,
                            double lambda_bar, double beta_grp) {
  if (alpha < 0.0 || lambda_bar < 0.0 || beta_grp < 0.0) throw ConfigError("convex prox penalties must be >= 0");
  GateBlock out{soft_threshold(v, alpha), soft_threshold(u_scaled, lambda_bar)};
  double r2 = 0.0;
  for (double x : out.theta) r2 += x * x;
  for (double x : out.w) r2 += x * x;
  const double r = std::sqrt(r2);
  const double kappa = r > 0.0 ? std::max(0.0, 1.0 - beta_grp / r) : 0.0;
  for (auto& x : out.theta) x *= kappa;
  for (auto& x : out.w) x *= kappa;
  return out;
}

GateBlock convex_relax_prox(double v, std::span<const double> u_scaled, double alpha, double lambda_bar,
                            double beta_grp) {
  return convex_relax_prox(std::span<const double>(&v, 1), u_scaled, alpha, lambda_bar, beta_grp);
}

Tensor prox_adam_step(Tensor& param, const Tensor& grad, nd::AdamMoments& state, double lambda,
                      const nd::AdamConfig& cfg) {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  Tensor eta = nd::adam_update(param, grad, state, cfg);
  for (std::size_t i = 0; i < param.numel(); ++i) param[i] = soft_threshold(param[i], lambda * eta[i]);
  return eta;
}

JumpLimits discontinuity_limits(double u, double M, double lambda) {
  check_M(M);
  if (u <= 0.0) throw ConfigError("discontinuity limits need u > 0");
  if (M * u <= lambda) return {0.0, 0.0, false};
  const double r = (M * u - lambda) / (1.0 + M * M);
  return {-r, r, true};
}

SwitchRate branch_switch_rate(std::span<const double> margins, std::span<const double> noise_std, double eta,
                              std::size_t trials, std::uint64_t seed) {
  if (margins.size() != noise_std.size()) throw DimensionError("margins and noise_std differ in length");
  if (trials == 0) throw ConfigError("trials must be >= 1");
  double bound = 0.0;
  for (std::size_t j = 0; j < margins.size(); ++j) {
    if (!(margins[j] > 0.0)) throw ConfigError("margins must be > 0");
    if (noise_std[j] < 0.0) throw ConfigError("noise std must be >= 0");
    bound += eta * eta * noise_std[j] * noise_std[j] / (margins[j] * margins[j]);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::size_t flips = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    bool any = false;
    for (std::size_t j = 0; j < margins.size(); ++j) {
      const double xi = noise_std[j] * n01(rng);
      if (margins[j] - eta * xi < 0.0) any = true;
    }
    flips += any ? 1 : 0;
  }
  const double p = double(flips) / double(trials);
  return {p, bound, std::sqrt(p * (1.0 - p) / double(trials))};
}

Variant parse_variant(const std::string& s) {
  if (s == "hier") return Variant::Hier;
  if (s == "seq") return Variant::Seq;
  if (s == "seq-ema") return Variant::SeqEma;
  if (s == "convex") return Variant::Convex;
  throw ConfigError("unknown prox variant '" + s + "' (expected hier|seq|seq-ema|convex)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Hier: return "hier";
    case Variant::Seq: return "seq";
    case Variant::SeqEma: return "seq-ema";
    case Variant::Convex: return "convex";
  }
  return "?";
}

namespace {

GateBlock gather(const std::vector<const Tensor*>& src, const GateGroup& g) {
  GateBlock b;
  for (const auto& r : g.theta) b.theta.push_back((*src[r.tensor])[r.index]);
  for (const auto& r : g.w) b.w.push_back((*src[r.tensor])[r.index]);
  return b;
}

}  // namespace

double apply_layer(const std::vector<Tensor*>& live, const std::vector<const Tensor*>& ema,
                   const std::vector<GateGroup>& groups, const LayerProx& cfg) {
  check_M(cfg.M);
  std::vector<const Tensor*> live_c(live.begin(), live.end());
  if (cfg.variant == Variant::SeqEma && ema.size() != live.size())
    throw ContractError("EMA variant needs shadows parallel to the live tensors");
  for (std::size_t i = 0; i < ema.size() && cfg.variant == Variant::SeqEma; ++i)
    if (ema[i]->shape() != live[i]->shape()) throw ContractError("EMA shadow shape mismatch");
  double worst = 0.0;
  for (const auto& g : groups) {
    GateBlock in = gather(live_c, g);
    GateBlock out;
    switch (cfg.variant) {
      case Variant::Hier: out = hier_prox(in.theta, in.w, cfg.lambda, cfg.M); break;
      case Variant::Seq: out = seq_prox(in.theta, in.w, cfg.lambda, cfg.lambda_bar, cfg.M); break;
      case Variant::SeqEma: out = seq_hier_prox_adam_ema(in, gather(ema, g), cfg.lambda, cfg.M, cfg.ema); break;
      case Variant::Convex: {
        std::vector<double> scaled(in.w.size());
        for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = in.w[i] / cfg.M;
        out = convex_relax_prox(in.theta, scaled, cfg.lambda, cfg.lambda_bar * cfg.M, cfg.lambda);
        for (auto& x : out.w) x *= cfg.M;
        break;
      }
    }
    for (std::size_t i = 0; i < g.theta.size(); ++i) (*live[g.theta[i].tensor])[g.theta[i].index] = out.theta[i];
    for (std::size_t i = 0; i < g.w.size(); ++i) (*live[g.w[i].tensor])[g.w[i].index] = out.w[i];
    if (cfg.variant != Variant::Convex) worst = std::max(worst, violation(out, cfg.M));
  }
  return worst;
}

}  // namespace lfn::prox
