#include <cmath>
#include <random>

#include "doctest.h"
#include "lassoflex/baseline.hpp"
#include "lassoflex/errors.hpp"
#include "lassoflex/gradcheck.hpp"

using namespace lfn;
using nd::Tensor;

namespace {

Tensor random_x(std::size_t n, std::size_t p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0, 1);
  Tensor x({n, p});
  for (auto& v : x.data()) v = n01(rng);
  return x;
}

Tensor run(LassoNet& m, const Tensor& x) {
  nd::Tape t;
  std::mt19937_64 rng(0);
  return m.forward(t, x, false, rng).value();
}

LassoNetConfig cfg(std::size_t p, double tau) {
  LassoNetConfig c;
  c.inputs = p;
  c.hidden = 5;
  c.tau = tau;
  c.seed = 2;
  return c;
}

}  // namespace

TEST_CASE("zero MLP weights leave a linear model") {
  LassoNet m(cfg(3, 1.0));
  m.first_layer().value.fill(0.0);
  m.second_layer().value.fill(0.0);
  for (auto* p : m.parameters())
    if (p->name == "mlp.b2") p->value.fill(0.0);
  const Tensor x = random_x(4, 3, 1);
  const Tensor y = run(m, x);
  for (std::size_t r = 0; r < 4; ++r) {
    double lin = 0.0;
    for (std::size_t j = 0; j < 3; ++j) lin += x.at(r, j) * m.beta().value[j];
    CHECK(y[r] == doctest::Approx(lin).epsilon(1e-14));
  }
}

TEST_CASE("LassoNet gradient matches finite differences") {
  LassoNet m(cfg(4, 0.8));
  const Tensor x = random_x(8, 4, 2);
  const Tensor y = random_x(8, 1, 3);
  auto f = [&](nd::Tape& t) {
    std::mt19937_64 rng(0);
    return nd::mse_loss(m.forward(t, x, true, rng), y);
  };
  CHECK(nd::check_gradients(f, m.parameters(), 1e-6, 1e-6).max_rel_error < 1e-4);
}

TEST_CASE("tau scales the MLP contribution exactly") {
  LassoNet a(cfg(3, 1.0)), b(cfg(3, 0.001));
  const Tensor x = random_x(5, 3, 4);
  a.beta().value.fill(0.0);
  b.beta().value.fill(0.0);
  const Tensor ya = run(a, x), yb = run(b, x);
  for (std::size_t i = 0; i < ya.numel(); ++i) CHECK(yb[i] == doctest::Approx(0.001 * ya[i]).epsilon(1e-13));
}

TEST_CASE("LassoNet gate groups pair beta rows with first-layer rows") {
  LassoNet m(cfg(3, 1.0));
  const auto g = m.gate_groups();
  REQUIRE(g.size() == 3);
  CHECK(g[1].theta.size() == 1);
  CHECK(g[1].theta[0].index == 1);
  REQUIRE(g[1].w.size() == 5);
  CHECK(g[1].w[0].tensor == 1);
  CHECK(g[1].w[0].index == 5);
  CHECK_THROWS_AS(LassoNet(cfg(0, 1.0)), ConfigError);
  CHECK_THROWS_AS(run(m, random_x(2, 4, 1)), DimensionError);
}

TEST_CASE("zero lambda hier prox leaves a feasible LassoNet untouched") {
  LassoNet m(cfg(4, 1.0));
  m.beta().value.fill(1.0);
  const Tensor before = m.first_layer().value;
  auto gates = m.gate_tensors();
  prox::LayerProx p;
  p.variant = prox::Variant::Hier;
  p.lambda = 0.0;
  p.M = 10.0;
  prox::apply_layer({&gates[0]->value, &gates[1]->value}, {}, m.gate_groups(), p);
  CHECK(m.first_layer().value == before);
  CHECK(m.beta().value == Tensor({4, 1}, 1.0));
}

TEST_CASE("baseline defaults use hier prox and Nesterov SGD") {
  const auto c = lassonet_defaults();
  CHECK(c.variant == prox::Variant::Hier);
  CHECK(c.optimizer == train::OptimizerKind::SgdNesterov);
  const auto j = cfg(3, 0.5).to_json();
  CHECK(LassoNetConfig::from_json(j).to_json() == j);
}
