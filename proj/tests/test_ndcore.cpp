#include <cmath>
#include <random>

#include "doctest.h"
#include "lassoflex/autodiff.hpp"
#include "lassoflex/errors.hpp"
#include "lassoflex/gradcheck.hpp"
#include "lassoflex/optim.hpp"

using namespace lfn;
using namespace lfn::nd;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(s));
  for (auto& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("tensor shape contract") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.reshaped({3, 2}).dim(0) == 3);
  CHECK_THROWS_AS(t.reshaped({4, 2}), DimensionError);
}

TEST_CASE("matmul examples") {
  Tape t;
  auto I = t.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
  auto A = t.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  CHECK(matmul(I, A).value() == A.value());
  auto r = t.constant(Tensor::from_rows({{1, 0}}));
  auto c = t.constant(Tensor::from_rows({{2}, {5}}));
  CHECK(matmul(r, c).value().item() == 2.0);
  CHECK_THROWS_AS(matmul(A, r), DimensionError);
}

TEST_CASE("matmul gradient matches central differences") {
  std::mt19937_64 rng(7);
  Parameter a("a", random_tensor({3, 4}, rng));
  Parameter b("b", random_tensor({4, 2}, rng));
  Tensor target = random_tensor({3, 2}, rng);
  auto rep = check_gradients([&](Tape& t) { return mse_loss(matmul(t.param(a), t.param(b)), target); }, {&a, &b});
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("relu examples") {
  Tape t;
  auto x = t.constant(Tensor({3}, {-1, 0, 2}));
  CHECK(relu(x).value() == Tensor({3}, {0, 0, 2}));
  std::mt19937_64 rng(1);
  auto y = t.constant(random_tensor({10}, rng));
  CHECK(relu(relu(y)).value() == relu(y).value());

  Parameter p("x", Tensor({2}, {-1.0, 2.0}));
  auto rep = check_gradients([&](Tape& t) { return sum_all(relu(t.param(p))); }, {&p});
  CHECK(rep.max_rel_error < 1e-6);
  // Subgradient at exactly zero.
  Parameter z("z", Tensor({1}, {0.0}));
  Tape t2;
  auto out = sum_all(relu(t2.param(z)));
  t2.backward(out);
  CHECK(z.grad[0] == 0.0);
}

TEST_CASE("gelu examples") {
  Tape t;
  CHECK(gelu(t.constant(Tensor::scalar(0.0))).value().item() == 0.0);
  const double g10 = gelu(t.constant(Tensor::scalar(10.0))).value().item();
  CHECK(g10 >= 9.99);
  CHECK(g10 <= 10.0);
  std::mt19937_64 rng(3);
  Parameter p("x", random_tensor({8}, rng));
  auto rep = check_gradients([&](Tape& t) { return sum_all(gelu(t.param(p))); }, {&p});
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("batchnorm_fixed") {
  Tape t;
  BatchNormState st;
  auto y = batchnorm_fixed(t.constant(Tensor::from_rows({{1, 5}, {2, 5}, {3, 5}})), st, true);
  double mean = 0, var = 0;
  for (int i = 0; i < 3; ++i) mean += y.value().at(i, 0) / 3.0;
  for (int i = 0; i < 3; ++i) var += std::pow(y.value().at(i, 0) - mean, 2) / 3.0;
  CHECK(std::abs(mean) < 1e-12);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  for (int i = 0; i < 3; ++i) CHECK(y.value().at(i, 1) == 0.0);

  BatchNormState bad;
  CHECK_THROWS_AS(batchnorm_fixed(t.constant(Tensor({1, 2})), bad, true), DimensionError);
}

TEST_CASE("batchnorm running statistics approach batch statistics") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor({16, 3}, rng, 2.0);
  for (std::size_t i = 0; i < 16; ++i) x.at(i, 1) += 4.0;
  BatchNormState st;
  Tape t;
  Tensor train_out;
  for (int k = 0; k < 200; ++k) train_out = batchnorm_fixed(t.constant(x), st, true).value();
  const Tensor eval_out = batchnorm_fixed(t.constant(x), st, false).value();
  // Explicit statistics recomputed independently.
  for (std::size_t j = 0; j < 3; ++j) {
    double mu = 0, var = 0;
    for (std::size_t i = 0; i < 16; ++i) mu += x.at(i, j) / 16.0;
    for (std::size_t i = 0; i < 16; ++i) var += std::pow(x.at(i, j) - mu, 2) / 16.0;
    CHECK(st.running_mean[j] == doctest::Approx(mu).epsilon(1e-9));
    CHECK(st.running_var[j] == doctest::Approx(var).epsilon(1e-9));
  }
  CHECK(max_abs_diff(train_out, eval_out) < 1e-8);
}

TEST_CASE("batchnorm gradient in training mode") {
  std::mt19937_64 rng(5);
  Parameter p("x", random_tensor({6, 3}, rng));
  Tensor w = random_tensor({6, 3}, rng);
  BatchNormState st;
  auto rep = check_gradients(
      [&](Tape& t) { return mse_loss(batchnorm_fixed(t.param(p), st, true), w); }, {&p});
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("layernorm") {
  Tape t;
  auto one = t.constant(Tensor({1}, 1.0));
  auto zero = t.constant(Tensor({1}, 0.0));
  CHECK(layernorm(t.constant(Tensor({1, 1}, 3.0)), one, zero).value().item() == 0.0);

  auto g3 = t.constant(Tensor({3}, 1.0));
  auto b3 = t.constant(Tensor({3}, 0.0));
  auto y = layernorm(t.constant(Tensor({3}, {1, 2, 3})), g3, b3).value();
  CHECK(std::abs(y[0] + y[1] + y[2]) < 1e-12);
  CHECK((y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) / 3.0 == doctest::Approx(1.0).epsilon(1e-4));

  std::mt19937_64 rng(9);
  Parameter x("x", random_tensor({4, 2, 5}, rng));
  Parameter gam("g", random_tensor({2, 5}, rng));
  Parameter off("b", random_tensor({2, 5}, rng));
  Tensor target = random_tensor({4, 2, 5}, rng);
  auto rep = check_gradients(
      [&](Tape& t) { return mse_loss(layernorm(t.param(x), t.param(gam), t.param(off)), target); }, {&x, &gam, &off});
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("shape ops and featurewise matmul gradients") {
  std::mt19937_64 rng(21);
  Parameter x("x", random_tensor({3, 4, 2}, rng));
  Parameter w("w", random_tensor({4, 2, 3}, rng));
  Parameter b("b", random_tensor({4, 3}, rng));
  Tensor target = random_tensor({3, 3}, rng);
  auto f = [&](Tape& t) {
    auto h = add_trailing(featurewise_matmul(t.param(x), t.param(w)), t.param(b));
    auto tr = transpose12(gelu(h));  // [3, 3, 4]
    auto m = mean_last(tr);          // [3, 3]
    auto n = mean_axis1(h);          // [3, 3]
    return add(mse_loss(m, target), mse_loss(reshape(n, {9}), target));
  };
  auto rep = check_gradients(f, {&x, &w, &b});
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("featurewise matmul has no cross-feature weights") {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({2, 3, 2}, rng);
  Tensor w = random_tensor({3, 2, 2}, rng);
  Tape t;
  Tensor y0 = featurewise_matmul(t.constant(x), t.constant(w)).value();
  for (std::size_t k = 0; k < 4; ++k) w[2 * 4 + k] += 1.0;  // feature 2 only
  Tensor y1 = featurewise_matmul(t.constant(x), t.constant(w)).value();
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t q = 0; q < 2; ++q) CHECK(y0[(n * 3 + i) * 2 + q] == y1[(n * 3 + i) * 2 + q]);
}

TEST_CASE("softmax cross-entropy gradient") {
  std::mt19937_64 rng(4);
  Parameter l("logits", random_tensor({5, 3}, rng));
  std::vector<int> y = {0, 2, 1, 1, 0};
  auto rep = check_gradients([&](Tape& t) { return softmax_xent(t.param(l), y); }, {&l});
  CHECK(rep.max_rel_error < 1e-6);
}

TEST_CASE("check_gradients contract") {
  std::mt19937_64 rng(13);
  Parameter w("w", random_tensor({4, 1}, rng));
  Tensor x = random_tensor({6, 4}, rng);
  auto lin = [&](Tape& t) { return sum_all(matmul(t.constant(x), t.param(w))); };
  CHECK(check_gradients(lin, {&w}).max_rel_error < 1e-8);

  auto constant = [&](Tape& t) { return scale(sum_all(t.param(w)), 0.0); };
  auto rep = check_gradients(constant, {&w});
  CHECK(rep.max_abs_grad < 1e-10);

  CHECK_THROWS_AS(check_gradients(lin, {&w}, 1e-2), ConfigError);
  CHECK_THROWS_AS(check_gradients(lin, {&w}, 1e-9), ConfigError);
}

TEST_CASE("non-finite values raise") {
  Tape t;
  CHECK_THROWS_AS(t.constant(Tensor({1}, {std::nan("")})), NumericError);
}

TEST_CASE("random-seed gradient property over many seeds") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    Parameter a("a", random_tensor({3, 4}, rng));
    Parameter w("w", random_tensor({4, 3}, rng, 0.5));
    Parameter g("g", random_tensor({3}, rng));
    Parameter b("b", random_tensor({3}, rng));
    Tensor target = random_tensor({3, 3}, rng);
    auto f = [&](Tape& t) {
      auto h = layernorm(gelu(matmul(t.param(a), t.param(w))), t.param(g), t.param(b));
      return mse_loss(relu(h), target);
    };
    worst = std::max(worst, check_gradients(f, {&a, &w, &g, &b}, 1e-6, 1e-4).max_rel_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("dropout is identity in evaluation mode and inverted in training") {
  std::mt19937_64 rng(3);
  Tape t;
  Tensor x({1000}, 1.0);
  auto v = t.constant(x);
  CHECK(dropout(v, 0.5, false, rng).value() == x);
  auto y = dropout(v, 0.5, true, rng).value();
  double s = 0;
  for (double e : y.data()) {
    CHECK((e == 0.0 || e == 2.0));
    s += e;
  }
  CHECK(s / 1000.0 == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("adam and sgd steps") {
  Parameter p("p", Tensor({2}, {1.0, -1.0}));
  p.grad = Tensor({2}, {0.5, -0.5});
  Adam opt(AdamConfig{.lr = 0.1});
  opt.add(&p);
  opt.step();
  // First bias-corrected step moves each coordinate by lr * sign(g).
  CHECK(p.value[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.value[1] == doctest::Approx(-0.9).epsilon(1e-6));

  Parameter q("q", Tensor({1}, {1.0}));
  q.grad = Tensor({1}, {1.0});
  SgdNesterov sgd(SgdConfig{.lr = 0.1, .momentum = 0.5});
  sgd.add(&q);
  sgd.step();  // buf = 1; q -= 0.1 * (1 + 0.5)
  CHECK(q.value[0] == doctest::Approx(0.85));
}
