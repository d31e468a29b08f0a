#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lassoflex/analysis.hpp"
#include "lassoflex/baseline.hpp"
#include "lassoflex/cli.hpp"
#include "lassoflex/gradcheck.hpp"
#include "lassoflex/model.hpp"
#include "lassoflex/oracle.hpp"
#include "lassoflex/prox.hpp"
#include "lassoflex/training.hpp"

using namespace lfn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome rotation_example() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto w = analysis::rotation_witness();
  const double dt = seconds_since(t0);
  double err = 0.0;
  err = std::max(err, std::abs(w.gram(0, 0) - 2.25));
  err = std::max(err, std::abs(w.gram(0, 1) - 2.0));
  err = std::max(err, std::abs(w.gram(1, 0) - 2.0));
  err = std::max(err, std::abs(w.gram(1, 1) - 2.25));
  err = std::max(err, std::abs(w.gram_rotated(0, 0) - 2.25));
  err = std::max(err, std::abs(w.gram_rotated(0, 1) - 1.7714));
  err = std::max(err, std::abs(w.gram_rotated(1, 0) - 1.7714));
  err = std::max(err, std::abs(w.gram_rotated(1, 1) - 1.5429));
  err = std::max(err, std::abs(w.prediction - 0.7143));
  err = std::max(err, std::abs(w.prediction_rotated - 0.5276));
  return {err < 1e-3 && dt < 1.0, "predictions " + fmt("%.4f", w.prediction) + " / " +
                                      fmt("%.4f", w.prediction_rotated) + ", max error " + fmt("%.1e", err) +
                                      ", " + fmt("%.3f", dt) + " s"};
}

Outcome prox_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (const char* op : {"hier", "seq", "convex", "adam"}) {
    const auto r = oracle::run_suite(op, 200, 2024);
    ok = ok && r.instances >= 200 && r.max_objective_gap < 1e-5 && r.feasibility_violations == 0;
    detail += std::string(op) + " gap " + fmt("%.1e", r.max_objective_gap) + " viol " +
              std::to_string(r.feasibility_violations) + "; ";
  }
  const double dt = seconds_since(t0);
  return {ok && dt < 60.0, detail + fmt("%.2f s", dt)};
}

Outcome discontinuity() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  std::size_t fne = 0;
  struct In {
    double v;
    double u;
    double M;
    double lam;
  };
  std::vector<In> inputs;
  for (int i = 0; i < 20; ++i) {
    const double M = 0.3 + 4.0 * u01(rng), u = 0.2 + 2.0 * u01(rng);
    const double lam = (0.05 + 0.9 * u01(rng)) * M * u;
    const double limit = (M * u - lam) / (1.0 + M * M);
    const std::vector<double> row = {u};
    const double right = prox::hier_prox(1e-6, row, lam, M).theta[0];
    const double left = prox::hier_prox(-1e-6, row, lam, M).theta[0];
    worst = std::max({worst, std::abs(right - limit), std::abs(left + limit)});
    inputs.push_back({1e-6, u, M, lam});
    inputs.push_back({-1e-6, u, M, lam});
  }
  // Firm nonexpansiveness of the convex relaxation over every pair of inputs
  // sharing parameters (the +/- pair for each configuration).
  for (std::size_t i = 0; i < inputs.size(); i += 2) {
    const auto& a = inputs[i];
    const auto& b = inputs[i + 1];
    const std::vector<double> ua = {a.u / a.M}, ub = {b.u / b.M};
    const auto p = prox::convex_relax_prox(a.v, ua, a.lam, 0.0, a.lam);
    const auto q = prox::convex_relax_prox(b.v, ub, a.lam, 0.0, a.lam);
    double lhs = std::pow(p.theta[0] - q.theta[0], 2) + std::pow(p.w[0] - q.w[0], 2);
    double rhs = (p.theta[0] - q.theta[0]) * (a.v - b.v) + (p.w[0] - q.w[0]) * (ua[0] - ub[0]);
    if (lhs > rhs + 1e-15) ++fne;
  }
  return {worst < 1e-4 && fne == 0,
          "max |gate - limit| " + fmt("%.2e", worst) + ", firm nonexpansiveness violations " + std::to_string(fne)};
}

Outcome gradient_integrity() {
  FlexConfig c;
  c.features = 4;
  c.in_width = 5;
  c.embed = 4;
  c.pfe_depth = 2;
  c.mixer_blocks = 1;
  c.hidden = 8;
  c.tau = 0.5;
  c.seed = 17;
  LassoFlexNet m(c);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  nd::Tensor x({8, 4, 5}), y({8, 1});
  for (auto& v : x.data()) v = u01(rng);
  for (auto& v : y.data()) v = n01(rng);
  auto f = [&](nd::Tape& t) {
    std::mt19937_64 drop(9);
    return nd::mse_loss(m.forward(t, x, true, drop), y);
  };
  const auto r = nd::check_gradients(f, m.parameters(), 1e-5, 1e-5);
  return {r.max_rel_error < 1e-4, "max relative error " + fmt("%.2e", r.max_rel_error) + " over " +
                                      std::to_string(r.coordinates) + " coordinates"};
}

Outcome slope_diagonality() {
  const auto f = enc::ple_from_edges({-2.0, -1.0, -0.25, 0.0, 0.5, 1.5, 3.0});
  const auto s = analysis::slope_sweep(f, 5);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.5, 3.5);
  std::vector<double> xs(200);
  for (auto& x : xs) x = u(rng);
  Eigen::MatrixXd K(200, 200);
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 200; ++j) K(i, j) = analysis::value_kernel_ple(xs[std::size_t(i)], xs[std::size_t(j)], f);
  const std::size_t rank = analysis::numerical_rank(K, 1e-8);
  return {s.bins == 6 && s.cross_bin_nonzero == 0 && s.same_bin_max_error == 0.0 && rank <= 7,
          std::to_string(s.cross_bin_nonzero) + " nonzero cross-bin entries of " + std::to_string(s.cross_bin_pairs) +
              ", same-bin error " + fmt("%.1e", s.same_bin_max_error) + ", value Gram rank " + std::to_string(rank) +
              " (T + 1 = 7)"};
}

struct TargetedRun {
  double pretrain_best = 0.0;
  double best = 0.0;
  double margin = 0.0;
  bool ranked = false;
};

train::TrainConfig targeted_schedule(std::uint64_t seed) {
  train::TrainConfig c;
  c.pretrain_epochs = 50;
  c.lambda_epochs = 10;
  c.patience = 5;
  c.batch_size = 256;
  c.lr = 3e-3;
  c.seed = seed;
  c.path.lambda_start = 1e-3;
  c.path.multiplier = 1e4;
  c.path.size = 12;
  return c;
}

TargetedRun run_targeted(std::uint64_t seed, bool flex, double tau) {
  std::vector<std::size_t> all(20);
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 pick(seed);
  std::shuffle(all.begin(), all.end(), pick);
  std::vector<std::size_t> support(all.begin(), all.begin() + 5);
  std::sort(support.begin(), support.end());

  auto syn = train::synth_targeted(20, support, 0.0, 0.1, 5000, 1000 + seed);
  auto& ds = syn.dataset;
  data::split(ds, {}, data::SplitMode::Random, seed);
  data::standardize_fit_apply(ds);
  train::TrainData td;
  td.task = Task::Regression;
  std::unique_ptr<PathModel> model;
  train::TrainConfig tc = targeted_schedule(seed);
  if (flex) {
    const auto spec = train::fit_encoder(ds, 8, enc::BreakpointMode::Quantile);
    td.train = train::prepare_encoded(ds, spec, data::SplitLabel::Train);
    td.val = train::prepare_encoded(ds, spec, data::SplitLabel::Val);
    FlexConfig fc;
    fc.features = 20;
    fc.in_width = spec.max_width();
    fc.embed = 4;
    fc.pfe_depth = 1;
    fc.mixer_blocks = 1;
    fc.hidden = 16;
    fc.dropout = 0.0;
    fc.tau = tau;
    fc.seed = seed;
    model = std::make_unique<LassoFlexNet>(fc);
    tc.variant = prox::Variant::SeqEma;
  } else {
    td.train = train::prepare_raw(ds, data::SplitLabel::Train);
    td.val = train::prepare_raw(ds, data::SplitLabel::Val);
    LassoNetConfig lc;
    lc.inputs = 20;
    lc.hidden = 16;
    lc.tau = tau;
    lc.seed = seed;
    model = std::make_unique<LassoNet>(lc);
    const auto d = lassonet_defaults();
    tc.variant = d.variant;
    tc.optimizer = d.optimizer;
    tc.lr = 1e-2;
  }
  train::Trainer t(*model, td, tc);
  t.run();
  TargetedRun r;
  r.pretrain_best = t.report().pretrain_best_val;
  r.best = t.report().best_val;
  r.margin = train::support_margin(model->beta().value, support);
  r.ranked = train::support_ranked_first(model->beta().value, support);
  return r;
}

Outcome targeted_experiment() {
  const auto t0 = std::chrono::steady_clock::now();
  int ranked = 0;
  bool never_worse = true;
  double m_tau1 = 0.0, m_small = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto f = run_targeted(seed, true, 0.001);
    ranked += f.ranked;
    never_worse = never_worse && f.best <= f.pretrain_best;
    const auto a = run_targeted(seed, false, 1.0);
    const auto b = run_targeted(seed, false, 0.001);
    never_worse = never_worse && a.best <= a.pretrain_best && b.best <= b.pretrain_best;
    m_tau1 += a.margin / 10.0;
    m_small += b.margin / 10.0;
  }
  const double dt = seconds_since(t0);
  const bool ok = ranked >= 9 && m_small > m_tau1 && never_worse && dt < 900.0;
  return {ok, "(a) support ranked first in " + std::to_string(ranked) + "/10 seeds; (b) LassoNet margin tau=0.001 " +
                  fmt("%.4f", m_small) + " vs tau=1 " + fmt("%.4f", m_tau1) + "; (c) best <= pretrained on all runs: " +
                  (never_worse ? "yes" : "no") + "; " + fmt("%.1f s", dt)};
}

Outcome path_exactness() {
  long double worst = 0.0L;
  bool monotone = true;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    train::LambdaPathConfig c;
    c.lambda_start = std::pow(10.0, -8.0 + 6.0 * u01(rng));
    c.multiplier = std::pow(10.0, 1.0 + 4.0 * u01(rng));
    c.size = 2 + std::size_t(u01(rng) * 40);
    c.power = i == 0 ? 1.0 : 0.05 + 0.95 * u01(rng);
    const auto p = train::build_lambda_path(c);
    const long double p0 = c.power, l0 = c.lambda_start, lE = l0 * static_cast<long double>(c.multiplier);
    const long double b0 = std::pow(l0, 1.0L / p0), bE = std::pow(lE, 1.0L / p0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const long double ref = std::pow(b0 + (static_cast<long double>(k) / (c.size - 1)) * (bE - b0), p0);
      worst = std::max(worst, std::abs((p.values[k] - ref) / ref));
      if (k) monotone = monotone && p.values[k] > p.values[k - 1];
    }
  }
  train::LambdaPathConfig lin;
  lin.lambda_start = 1.0;
  lin.lambda_end = 3.0;
  lin.size = 3;
  lin.power = 1.0;
  const auto l = train::build_lambda_path(lin);
  const bool linear = l.values == std::vector<double>{1.0, 2.0, 3.0};
  return {worst < 1e-14L && linear && monotone,
          "max relative error " + fmt("%.2e", double(worst)) + ", p=1 linear: " + (linear ? "yes" : "no")};
}

Outcome chebyshev() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int bad = 0;
  double worst_slack = -1e9;
  for (int i = 0; i < 50; ++i) {
    const std::size_t d = 1 + std::size_t(u01(rng) * 6);
    std::vector<double> m(d), s(d);
    for (auto& v : m) v = 0.05 + u01(rng);
    for (auto& v : s) v = 0.05 + 2.0 * u01(rng);
    const double eta = 0.01 + 0.5 * u01(rng);
    const auto r = prox::branch_switch_rate(m, s, eta, 20000, 1000 + std::uint64_t(i));
    const double slack = r.empirical - (r.bound + 3.0 * r.std_error);
    worst_slack = std::max(worst_slack, slack);
    bad += slack > 0.0;
  }
  return {bad == 0, std::to_string(bad) + " of 50 configurations exceed bound + 3 SE (max excess " +
                        fmt("%.3g", worst_slack) + ")"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "lassoflex-acceptance-determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ostringstream out, err;
  int code = cli::run({"synth", "targeted", "--d", "8", "--support", "3", "--n", "800", "--seed", "3", "--out",
                       (dir / "data").string()},
                      out, err);
  code = code ? code
              : cli::run({"train", "--data", (dir / "data.csv").string(), "--target", "y", "--prox", "seq-ema",
                          "--pretrain-epochs", "8", "--lambda-epochs", "3", "--path-size", "4", "--embed", "4",
                          "--hidden", "16", "--token-hidden", "8", "--channel-hidden", "8", "--seed", "11", "--out",
                          (dir / "a").string()},
                         out, err);
  code = code ? code
              : cli::run({"train", "--manifest", (dir / "a/manifest.json").string(), "--out", (dir / "b").string()},
                         out, err);
  const std::string a = slurp(dir / "a/seed-11/report.jsonl"), b = slurp(dir / "b/seed-11/report.jsonl");
  const bool same = code == 0 && !a.empty() && a == b;
  fs::remove_all(dir);
  return {same, "exit " + std::to_string(code) + ", " + std::to_string(a.size()) + " bytes, identical: " +
                    (same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"rotation example Gram matrices and kernel ridge predictions", rotation_example},
      {"prox operators match brute-force oracles", prox_oracles},
      {"hier prox discontinuity and convex firm nonexpansiveness", discontinuity},
      {"full-model gradient check", gradient_integrity},
      {"slope kernel diagonal across bins, value kernel rank", slope_diagonality},
      {"targeted experiment: support recovery, tau ordering, no regression", targeted_experiment},
      {"lambda path matches its formula", path_exactness},
      {"branch switch rate within the Chebyshev bound", chebyshev},
      {"train reports are byte-identical under a manifest", determinism},
  };
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && std::size_t(k) <= criteria.size()) selected[std::size_t(k - 1)] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %zu. %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
