#include "lassoflex/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "lassoflex/errors.hpp"

namespace lfn::nd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;
using StridedC = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

bool any_grad(Tape& t, std::initializer_list<Var> vs) {
  for (auto v : vs)
    if (t.requires_grad(v)) return true;
  return false;
}

constexpr double kSqrt2OverPi = 0.79788456080286535588;

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor t) { return record(std::move(t), false, nullptr); }

Var Tape::param(Parameter& p) {
  Var v = record(p.value, true, nullptr);
  nodes_[v.id].param = &p;
  return v;
}

Var Tape::record(Tensor value, bool requires_grad, Backward backward) {
  if (!value.all_finite()) throw NumericError("non-finite value produced at tape node " + std::to_string(nodes_.size()));
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_slot(Var v) {
  Node& n = nodes_[v.id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) { accumulate(v.id, g.data()); }

void Tape::accumulate(std::size_t id, std::span<const double> g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  Tensor& slot = grad_slot(Var{this, id});
  auto d = slot.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
}

void Tape::backward(Var loss) {
  if (value(loss).numel() != 1) throw DimensionError("backward() needs a scalar loss");
  if (!nodes_[loss.id].requires_grad) return;
  grad_slot(loss).fill(1.0);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.param) {
      if (n.param->grad.shape() != n.value.shape()) n.param->grad = Tensor(n.value.shape());
      auto pg = n.param->grad.data();
      auto g = n.grad.data();
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += g[k];
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.rank() == 2 && B.rank() == 2 && A.dim(1) == B.dim(0),
          "matmul: incompatible shapes " + shape_str(A.shape()) + " and " + shape_str(B.shape()));
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out({m, n});
  Map(out.data().data(), m, n).noalias() = MapC(A.data().data(), m, k) * MapC(B.data().data(), k, n);
  Tape& t = *a.tape;
  return t.record(std::move(out), any_grad(t, {a, b}), [a, b, m, k, n](Tape& t, const Tensor& g) {
    MapC G(g.data().data(), m, n);
    if (t.requires_grad(a)) {
      Tensor ga({m, k});
      Map(ga.data().data(), m, k).noalias() = G * MapC(b.value().data().data(), k, n).transpose();
      t.accumulate(a, ga);
    }
    if (t.requires_grad(b)) {
      Tensor gb({k, n});
      Map(gb.data().data(), k, n).noalias() = MapC(a.value().data().data(), m, k).transpose() * G;
      t.accumulate(b, gb);
    }
  });
}

Var add(Var a, Var b) {
  require(a.value().shape() == b.value().shape(), "add: shape mismatch");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  Tape& t = *a.tape;
  return t.record(std::move(out), any_grad(t, {a, b}), [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var add_trailing(Var x, Var b) {
  const Tensor& X = x.value();
  const Tensor& Bv = b.value();
  const std::size_t nb = Bv.numel();
  require(nb > 0 && X.numel() % nb == 0, "add_trailing: bias " + shape_str(Bv.shape()) + " does not tile " +
                                             shape_str(X.shape()));
  Tensor out = X;
  auto o = out.data();
  auto bv = Bv.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i % nb];
  Tape& t = *x.tape;
  return t.record(std::move(out), any_grad(t, {x, b}), [x, b, nb](Tape& t, const Tensor& g) {
    t.accumulate(x, g);
    if (t.requires_grad(b)) {
      std::vector<double> gb(nb, 0.0);
      auto gv = g.data();
      for (std::size_t i = 0; i < gv.size(); ++i) gb[i % nb] += gv[i];
      t.accumulate(b.id, gb);
    }
  });
}

Var scale(Var x, double s) {
  Tensor out = x.value();
  for (auto& v : out.data()) v *= s;
  Tape& t = *x.tape;
  return t.record(std::move(out), t.requires_grad(x), [x, s](Tape& t, const Tensor& g) {
    Tensor gx = g;
    for (auto& v : gx.data()) v *= s;
    t.accumulate(x, gx);
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  Tape& t = *x.tape;
  return t.record(std::move(out), t.requires_grad(x), [x](Tape& t, const Tensor& g) {
    Tensor gx = g;
    auto xv = x.value().data();
    auto gv = gx.data();
    // Subgradient at exactly 0 is taken to be 0.
    for (std::size_t i = 0; i < gv.size(); ++i)
      if (!(xv[i] > 0.0)) gv[i] = 0.0;
    t.accumulate(x, gx);
  });
}

Var gelu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) {
    const double u = kSqrt2OverPi * (v + kGeluCubic * v * v * v);
    v = 0.5 * v * (1.0 + std::tanh(u));
  }
  Tape& t = *x.tape;
  return t.record(std::move(out), t.requires_grad(x), [x](Tape& t, const Tensor& g) {
    Tensor gx = g;
    auto xv = x.value().data();
    auto gv = gx.data();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      const double v = xv[i];
      const double u = kSqrt2OverPi * (v + kGeluCubic * v * v * v);
      const double th = std::tanh(u);
      const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * v * v);
      gv[i] *= 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
    }
    t.accumulate(x, gx);
  });
}

Var layernorm(Var x, Var gamma, Var offset, double eps) {
  const Tensor& X = x.value();
  require(X.rank() >= 1, "layernorm: rank 0 input");
  const std::size_t d = X.shape().back();
  const std::size_t rows = X.numel() / d;
  const std::size_t np = gamma.value().numel();
  require(np == offset.value().numel() && np % d == 0 && X.numel() % np == 0,
          "layernorm: affine params " + shape_str(gamma.value().shape()) + " do not tile " + shape_str(X.shape()));
  Tensor out(X.shape());
  Tensor xhat(X.shape());
  std::vector<double> inv_std(rows);
  auto xv = X.data();
  auto gv = gamma.value().data();
  auto bv = offset.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= double(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= double(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t idx = r * d + j;
      const double h = (row[j] - mu) * inv_std[r];
      xhat[idx] = h;
      out[idx] = h * gv[idx % np] + bv[idx % np];
    }
  }
  Tape& t = *x.tape;
  return t.record(std::move(out), any_grad(t, {x, gamma, offset}),
                  [x, gamma, offset, d, rows, np, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Tape& t, const Tensor& g) {
                    auto gg = g.data();
                    auto gam = gamma.value().data();
                    if (t.requires_grad(gamma) || t.requires_grad(offset)) {
                      std::vector<double> dg(np, 0.0), db(np, 0.0);
                      for (std::size_t i = 0; i < gg.size(); ++i) {
                        dg[i % np] += gg[i] * xhat[i];
                        db[i % np] += gg[i];
                      }
                      t.accumulate(gamma.id, dg);
                      t.accumulate(offset.id, db);
                    }
                    if (!t.requires_grad(x)) return;
                    Tensor gx(x.value().shape());
                    std::vector<double> gh(d);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double mean_gh = 0.0, mean_ghx = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        const std::size_t idx = r * d + j;
                        gh[j] = gg[idx] * gam[idx % np];
                        mean_gh += gh[j];
                        mean_ghx += gh[j] * xhat[idx];
                      }
                      mean_gh /= double(d);
                      mean_ghx /= double(d);
                      for (std::size_t j = 0; j < d; ++j) {
                        const std::size_t idx = r * d + j;
                        gx[idx] = inv_std[r] * (gh[j] - mean_gh - xhat[idx] * mean_ghx);
                      }
                    }
                    t.accumulate(x, gx);
                  });
}

Var batchnorm_fixed(Var x, BatchNormState& state, bool training) {
  const Tensor& X = x.value();
  require(X.rank() == 2, "batchnorm_fixed: expects [batch, columns], got " + shape_str(X.shape()));
  const std::size_t n = X.dim(0), c = X.dim(1);
  if (state.running_mean.numel() != c) state = BatchNormState(c);
  const double eps2 = state.eps * state.eps;
  std::vector<double> mean(c, 0.0), inv(c, 0.0);
  if (training) {
    require(n >= 2, "batchnorm_fixed: training mode needs batch >= 2");
    std::vector<double> var(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) mean[j] += X.at(i, j);
    for (auto& m : mean) m /= double(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double dlt = X.at(i, j) - mean[j];
        var[j] += dlt * dlt;
      }
    for (std::size_t j = 0; j < c; ++j) {
      var[j] /= double(n);
      inv[j] = 1.0 / std::sqrt(var[j] + eps2);
      if (!state.initialized) {
        state.running_mean[j] = mean[j];
        state.running_var[j] = var[j];
      } else {
        state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mean[j];
        state.running_var[j] = (1.0 - state.momentum) * state.running_var[j] + state.momentum * var[j];
      }
    }
    state.initialized = true;
  } else {
    for (std::size_t j = 0; j < c; ++j) {
      mean[j] = state.running_mean[j];
      inv[j] = 1.0 / std::sqrt(state.running_var[j] + eps2);
    }
  }
  Tensor out({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = (X.at(i, j) - mean[j]) * inv[j];
  Tape& t = *x.tape;
  Tensor xhat = out;
  return t.record(std::move(out), t.requires_grad(x),
                  [x, n, c, training, inv = std::move(inv), xhat = std::move(xhat)](Tape& t, const Tensor& g) {
                    Tensor gx({n, c});
                    if (!training) {
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < c; ++j) gx.at(i, j) = g.at(i, j) * inv[j];
                    } else {
                      for (std::size_t j = 0; j < c; ++j) {
                        double mg = 0.0, mgx = 0.0;
                        for (std::size_t i = 0; i < n; ++i) {
                          mg += g.at(i, j);
                          mgx += g.at(i, j) * xhat.at(i, j);
                        }
                        mg /= double(n);
                        mgx /= double(n);
                        for (std::size_t i = 0; i < n; ++i)
                          gx.at(i, j) = inv[j] * (g.at(i, j) - mg - xhat.at(i, j) * mgx);
                      }
                    }
                    t.accumulate(x, gx);
                  });
}

Var dropout(Var x, double p, bool training, std::mt19937_64& rng) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  std::vector<double> mask(x.value().numel());
  for (auto& m : mask) m = keep(rng) ? s : 0.0;
  Tensor out = x.value();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= mask[i];
  Tape& t = *x.tape;
  return t.record(std::move(out), t.requires_grad(x), [x, mask = std::move(mask)](Tape& t, const Tensor& g) {
    Tensor gx = g;
    auto gv = gx.data();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= mask[i];
    t.accumulate(x, gx);
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  Tape& t = *x.tape;
  return t.record(std::move(out), t.requires_grad(x), [x](Tape& t, const Tensor& g) { t.accumulate(x.id, g.data()); });
}

Var transpose12(Var x) {
  const Tensor& X = x.value();
  require(X.rank() == 3, "transpose12: expects rank 3, got " + shape_str(X.shape()));
  const std::size_t B = X.dim(0), a = X.dim(1), b = X.dim(2);
  Tensor out({B, b, a});
  for (std::size_t n = 0; n < B; ++n)
    Map(out.data().data() + n * a * b, b, a) = MapC(X.data().data() + n * a * b, a, b).transpose();
  Tape& t = *x.tape;
  return t.record(std::move(out), t.requires_grad(x), [x, B, a, b](Tape& t, const Tensor& g) {
    Tensor gx({B, a, b});
    for (std::size_t n = 0; n < B; ++n)
      Map(gx.data().data() + n * a * b, a, b) = MapC(g.data().data() + n * a * b, b, a).transpose();
    t.accumulate(x, gx);
  });
}

Var mean_last(Var x) {
  const Tensor& X = x.value();
  require(X.rank() >= 2, "mean_last: expects rank >= 2");
  const std::size_t e = X.shape().back();
  Shape s(X.shape().begin(), X.shape().end() - 1);
  Tensor out(s);
  const std::size_t rows = out.numel();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < e; ++j) acc += X[r * e + j];
    out[r] = acc / double(e);
  }
  Tape& t = *x.tape;
  return t.record(std::move(out), t.requires_grad(x), [x, e, rows](Tape& t, const Tensor& g) {
    Tensor gx(x.value().shape());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < e; ++j) gx[r * e + j] = g[r] / double(e);
    t.accumulate(x, gx);
  });
}

Var mean_axis1(Var x) {
  const Tensor& X = x.value();
  require(X.rank() == 3, "mean_axis1: expects rank 3");
  const std::size_t B = X.dim(0), d = X.dim(1), e = X.dim(2);
  Tensor out({B, e});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < e; ++j) out[n * e + j] += X[(n * d + i) * e + j];
  for (auto& v : out.data()) v /= double(d);
  Tape& t = *x.tape;
  return t.record(std::move(out), t.requires_grad(x), [x, B, d, e](Tape& t, const Tensor& g) {
    Tensor gx({B, d, e});
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < e; ++j) gx[(n * d + i) * e + j] = g[n * e + j] / double(d);
    t.accumulate(x, gx);
  });
}

Var featurewise_matmul(Var x, Var w) {
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  require(X.rank() == 3 && W.rank() == 3 && X.dim(1) == W.dim(0) && X.dim(2) == W.dim(1),
          "featurewise_matmul: incompatible shapes " + shape_str(X.shape()) + " and " + shape_str(W.shape()));
  const std::size_t B = X.dim(0), d = X.dim(1), p = X.dim(2), q = W.dim(2);
  Tensor out({B, d, q});
  for (std::size_t i = 0; i < d; ++i) {
    Strided(out.data().data() + i * q, B, q, Eigen::OuterStride<>(d * q)).noalias() =
        StridedC(X.data().data() + i * p, B, p, Eigen::OuterStride<>(d * p)) * MapC(W.data().data() + i * p * q, p, q);
  }
  Tape& t = *x.tape;
  return t.record(std::move(out), any_grad(t, {x, w}), [x, w, B, d, p, q](Tape& t, const Tensor& g) {
    const double* gp = g.data().data();
    if (t.requires_grad(x)) {
      Tensor gx({B, d, p});
      for (std::size_t i = 0; i < d; ++i)
        Strided(gx.data().data() + i * p, B, p, Eigen::OuterStride<>(d * p)).noalias() =
            StridedC(gp + i * q, B, q, Eigen::OuterStride<>(d * q)) *
            MapC(w.value().data().data() + i * p * q, p, q).transpose();
      t.accumulate(x, gx);
    }
    if (t.requires_grad(w)) {
      Tensor gw({d, p, q});
      for (std::size_t i = 0; i < d; ++i)
        Map(gw.data().data() + i * p * q, p, q).noalias() =
            StridedC(x.value().data().data() + i * p, B, p, Eigen::OuterStride<>(d * p)).transpose() *
            StridedC(gp + i * q, B, q, Eigen::OuterStride<>(d * q));
      t.accumulate(w, gw);
    }
  });
}

Var mse_loss(Var pred, const Tensor& target) {
  const Tensor& P = pred.value();
  require(P.numel() == target.numel(), "mse_loss: prediction/target size mismatch");
  const std::size_t n = P.numel();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (P[i] - target[i]) * (P[i] - target[i]);
  Tape& t = *pred.tape;
  return t.record(Tensor::scalar(acc / double(n)), t.requires_grad(pred), [pred, target, n](Tape& t, const Tensor& g) {
    Tensor gp(pred.value().shape());
    const double s = 2.0 * g[0] / double(n);
    for (std::size_t i = 0; i < n; ++i) gp[i] = s * (pred.value()[i] - target[i]);
    t.accumulate(pred, gp);
  });
}

Var softmax_xent(Var logits, const std::vector<int>& labels) {
  const Tensor& L = logits.value();
  require(L.rank() == 2 && L.dim(0) == labels.size(), "softmax_xent: logits/labels mismatch");
  const std::size_t n = L.dim(0), c = L.dim(1);
  Tensor prob({n, c});
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || std::size_t(labels[i]) >= c) throw DimensionError("softmax_xent: label out of range");
    double mx = L.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, L.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(L.at(i, j) - mx);
    for (std::size_t j = 0; j < c; ++j) prob.at(i, j) = std::exp(L.at(i, j) - mx) / z;
    acc += -(L.at(i, labels[i]) - mx - std::log(z));
  }
  Tape& t = *logits.tape;
  return t.record(Tensor::scalar(acc / double(n)), t.requires_grad(logits),
                  [logits, labels, n, c, prob = std::move(prob)](Tape& t, const Tensor& g) {
                    Tensor gl = prob;
                    for (std::size_t i = 0; i < n; ++i) gl.at(i, labels[i]) -= 1.0;
                    for (auto& v : gl.data()) v *= g[0] / double(n);
                    t.accumulate(logits, gl);
                  });
}

Var sum_all(Var x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  Tape& t = *x.tape;
  return t.record(Tensor::scalar(acc), t.requires_grad(x), [x](Tape& t, const Tensor& g) {
    Tensor gx(x.value().shape(), g[0]);
    t.accumulate(x, gx);
  });
}

}  // namespace lfn::nd
