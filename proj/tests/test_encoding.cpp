#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "lassoflex/encoding.hpp"
#include "lassoflex/errors.hpp"

using namespace lfn;
using namespace lfn::enc;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Exhaustive single-split search minimizing squared error; independent of
// the splitter in the library.
double best_single_split(const std::vector<double>& x, const std::vector<double>& y) {
  double best = INFINITY, thr = 0;
  std::vector<double> cands = x;
  std::sort(cands.begin(), cands.end());
  for (std::size_t i = 1; i < cands.size(); ++i) {
    if (cands[i] == cands[i - 1]) continue;
    const double c = 0.5 * (cands[i] + cands[i - 1]);
    double sl = 0, nl = 0, sr = 0, nr = 0;
    for (std::size_t r = 0; r < x.size(); ++r) (x[r] < c ? (sl += y[r], nl += 1) : (sr += y[r], nr += 1));
    double sse = 0;
    for (std::size_t r = 0; r < x.size(); ++r) {
      const double m = x[r] < c ? sl / nl : sr / nr;
      sse += (y[r] - m) * (y[r] - m);
    }
    if (sse < best) {
      best = sse;
      thr = c;
    }
  }
  return thr;
}

}  // namespace

TEST_CASE("quantile breakpoints") {
  auto r = fit_breakpoints({0, 1, 2, 3, 4}, 2, BreakpointMode::Quantile);
  CHECK(r.encoding.edges == std::vector<double>{0, 2, 4});
  CHECK(r.warnings.empty());

  auto c = fit_breakpoints({5, 5, 5}, 3, BreakpointMode::Quantile);
  CHECK(c.encoding.degenerate);
  CHECK(c.encoding.width() == 1);
  CHECK(encode_ple(7.0, c.encoding) == std::vector<double>{0.0});
  CHECK_FALSE(c.warnings.empty());

  auto few = fit_breakpoints({0, 0, 1, 1, 2}, 8, BreakpointMode::Quantile);
  CHECK(few.encoding.bins() == 2);
  CHECK_FALSE(few.warnings.empty());
}

TEST_CASE("tree breakpoints find the step") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(400), y(400);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = x[i] > 0.5 ? 1.0 : 0.0;
  }
  auto r = fit_breakpoints(x, 2, BreakpointMode::Tree, TreeTarget{y, false});
  REQUIRE(r.encoding.bins() == 2);
  const double split = r.encoding.edges[1];
  CHECK(split >= 0.45);
  CHECK(split <= 0.55);
  CHECK(split == doctest::Approx(best_single_split(x, y)).epsilon(1e-12));

  auto g = fit_breakpoints(x, 2, BreakpointMode::Tree, TreeTarget{y, true});
  CHECK(g.encoding.edges[1] == doctest::Approx(split));
  CHECK_THROWS_AS(fit_breakpoints(x, 2, BreakpointMode::Tree), ConfigError);
}

TEST_CASE("encode_ple matches the reference encodings") {
  auto f = ple_from_edges({-1, 0, 1});
  auto a = encode_ple(0.5, f);
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 0.5);
  auto b = encode_ple(-0.3536, f);
  CHECK(b[0] == doctest::Approx(0.6464).epsilon(1e-9));
  CHECK(b[1] == 0.0);
  CHECK(encode_ple(-1.0, f) == std::vector<double>{0, 0});
  CHECK(encode_ple(-9.0, f) == std::vector<double>{0, 0});
  CHECK(encode_ple(9.0, f) == std::vector<double>{1, 1});
  CHECK_THROWS_AS(ple_from_edges({0, 0, 1}), EncodingError);
}

TEST_CASE("encode_ple structure, monotonicity and continuity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  auto f = ple_from_edges({-2.0, -0.7, 0.1, 0.4, 1.9});
  for (int rep = 0; rep < 1000; ++rep) {
    const double x = u(rng);
    const auto e = encode_ple(x, f);
    const auto [s, a] = locate(x, f);
    for (std::size_t t = 1; t <= f.bins(); ++t) {
      CHECK(e[t - 1] >= 0.0);
      CHECK(e[t - 1] <= 1.0);
      if (t < s) CHECK(e[t - 1] == 1.0);
      if (t > s) CHECK(e[t - 1] == 0.0);
      if (t == s) CHECK(e[t - 1] == doctest::Approx(a));
    }
    const double x2 = x + std::abs(u(rng)) * 0.1;
    const auto e2 = encode_ple(x2, f);
    for (std::size_t t = 0; t < e.size(); ++t) CHECK(e2[t] >= e[t]);
    // Linear between consecutive knots: the derivative along the bin is 1/Delta.
    const auto e3 = encode_ple(x + 1e-9, f);
    for (std::size_t t = 0; t < e.size(); ++t) CHECK(std::abs(e3[t] - e[t]) <= 1e-9 / f.delta(t + 1) + 1e-15);
  }
}

TEST_CASE("linear-on-PLE derivative is w_t / Delta_t inside bin t") {
  auto f = ple_from_edges({0.0, 0.5, 2.0, 3.0});
  const std::vector<double> w = {1.0, -2.0, 0.5};
  auto model = [&](double x) { return dot(w, encode_ple(x, f)); };
  for (double x : {0.2, 1.1, 2.7}) {
    const auto [s, a] = locate(x, f);
    const double h = 1e-6;
    CHECK((model(x + h) - model(x - h)) / (2 * h) == doctest::Approx(w[s - 1] / f.delta(s)).epsilon(1e-8));
  }
}

TEST_CASE("one-hot") {
  CHECK(encode_onehot(2, 4) == std::vector<double>{0, 0, 1, 0});
  CHECK(encode_onehot(kUnknownCategory, 4) == std::vector<double>{0, 0, 0, 0});
  CHECK_THROWS_AS(encode_onehot(4, 4), EncodingError);
  CHECK_THROWS_AS(encode_onehot(-3, 4), EncodingError);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> id(-1, 5);
  for (int i = 0; i < 200; ++i) {
    const auto e = encode_onehot(id(rng), 6);
    const double s = std::accumulate(e.begin(), e.end(), 0.0);
    CHECK((s == 0.0 || s == 1.0));
  }
}

TEST_CASE("ple_gram closed form") {
  auto f = ple_from_edges({-1, 0, 1});
  // Two-feature concatenation of phi(0.5), phi(0) against phi(0), phi(0.5).
  const double g = ple_gram(0.5, 0.0, f) + ple_gram(0.0, 0.5, f);
  CHECK(g == doctest::Approx(2.0).epsilon(1e-12));

  auto h = ple_from_edges({0, 1, 2, 3});
  CHECK(ple_gram(1.5, 1.5, h) == doctest::Approx(1.0 + 0.25));

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-0.5, 3.5);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK(std::abs(ple_gram(a, b, h) - dot(encode_ple(a, h), encode_ple(b, h))) < 1e-12);
  }
  // Right-continuous at a knot.
  CHECK(std::abs(ple_gram(1.0, 2.0, h) - dot(encode_ple(1.0, h), encode_ple(2.0, h))) < 1e-12);
}

TEST_CASE("spec json round trip and padded encoding") {
  PleSpec spec;
  spec.features.push_back(ple_from_edges({-1, 0, 1}, "a"));
  spec.features.push_back(onehot(3, "colour"));
  auto c = fit_breakpoints({2, 2}, 2, BreakpointMode::Quantile, std::nullopt, "const");
  spec.features.push_back(c.encoding);
  const auto back = PleSpec::from_json(nlohmann::ordered_json::parse(spec.to_json().dump()));
  REQUIRE(back.size() == 3);
  CHECK(back.features[0].edges == spec.features[0].edges);
  CHECK(back.features[1].cardinality == 3);
  CHECK(back.features[2].degenerate);
  CHECK(back.features[1].name == "colour");

  nd::Tensor x = nd::Tensor::from_rows({{0.5, 2, 9}, {-0.5, -1, 2}});
  auto e = encode_padded(x, spec);
  CHECK(e.shape() == nd::Shape{2, 3, 3});
  CHECK(e[0] == 1.0);
  CHECK(e[1] == 0.5);
  CHECK(e[2] == 0.0);
  CHECK(e[3 + 2] == 1.0);
  CHECK(e[9 + 3] == 0.0);
  CHECK(e[9 + 4] == 0.0);
  CHECK(e[9 + 5] == 0.0);
}
