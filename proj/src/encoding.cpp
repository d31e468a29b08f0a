#include "lassoflex/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lassoflex/errors.hpp"

namespace lfn::enc {

using nd::Tensor;

std::size_t PleSpec::max_width() const {
  std::size_t w = 0;
  for (const auto& f : features) w = std::max(w, f.width());
  return w;
}

nlohmann::ordered_json PleSpec::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : features) {
    nlohmann::ordered_json e;
    e["kind"] = f.kind == Kind::Ple ? "ple" : "onehot";
    e["edges"] = f.edges;
    e["cardinality"] = f.kind == Kind::Ple ? f.bins() : f.cardinality;
    if (f.degenerate) e["degenerate"] = true;
    if (j.contains(f.name)) throw EncodingError("duplicate feature name in spec: " + f.name);
    j[f.name] = std::move(e);
  }
  return j;
}

PleSpec PleSpec::from_json(const nlohmann::ordered_json& j) {
  PleSpec spec;
  for (const auto& [name, e] : j.items()) {
    FeatureEncoding f;
    f.name = name;
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "ple") {
      f.kind = Kind::Ple;
      f.edges = e.at("edges").get<std::vector<double>>();
      f.degenerate = e.value("degenerate", false);
      if (!f.degenerate) f = ple_from_edges(f.edges, name);
      f.cardinality = f.bins();
    } else if (kind == "onehot") {
      f = onehot(e.at("cardinality").get<std::size_t>(), name);
    } else {
      throw EncodingError("unknown encoding kind '" + kind + "' for feature " + name);
    }
    spec.features.push_back(std::move(f));
  }
  return spec;
}

FeatureEncoding ple_from_edges(std::vector<double> edges, std::string name) {
  if (edges.size() < 2) throw EncodingError("PLE needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw EncodingError("PLE edges must be strictly increasing");
  FeatureEncoding f;
  f.name = std::move(name);
  f.kind = Kind::Ple;
  f.edges = std::move(edges);
  f.cardinality = f.bins();
  return f;
}

FeatureEncoding onehot(std::size_t cardinality, std::string name) {
  FeatureEncoding f;
  f.name = std::move(name);
  f.kind = Kind::OneHot;
  f.cardinality = cardinality;
  return f;
}

namespace {

FeatureEncoding degenerate_encoding(double c, std::string name) {
  FeatureEncoding f;
  f.name = std::move(name);
  f.kind = Kind::Ple;
  f.edges = {c};
  f.degenerate = true;
  f.cardinality = 1;
  return f;
}

std::vector<double> quantile_edges(std::vector<double> sorted, std::size_t k) {
  std::vector<double> edges;
  const double n1 = double(sorted.size() - 1);
  for (std::size_t i = 0; i <= k; ++i) {
    const double pos = n1 * double(i) / double(k);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - double(lo);
    edges.push_back(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
  }
  return edges;
}

struct Leaf {
  std::size_t lo, hi;  // half-open range into the sorted rows
  std::size_t depth;
};

struct Split {
  double gain = 0.0;
  std::size_t at = 0;  // first index of the right child
};

class TreeSplitter {
 public:
  TreeSplitter(std::vector<double> x, std::vector<double> y, bool classification)
      : x_(std::move(x)), y_(std::move(y)), cls_(classification) {
    if (cls_) {
      std::set<double> labels(y_.begin(), y_.end());
      for (double l : labels) class_of_.emplace(l, class_of_.size());
    }
  }

  double impurity(std::size_t lo, std::size_t hi) const {
    const double n = double(hi - lo);
    if (n == 0) return 0.0;
    if (!cls_) {
      double s = 0, s2 = 0;
      for (std::size_t i = lo; i < hi; ++i) {
        s += y_[i];
        s2 += y_[i] * y_[i];
      }
      return s2 - s * s / n;
    }
    std::vector<double> counts(class_of_.size(), 0.0);
    for (std::size_t i = lo; i < hi; ++i) counts[class_of_.at(y_[i])] += 1.0;
    double g = 1.0;
    for (double c : counts) g -= (c / n) * (c / n);
    return n * g;
  }

  Split best(const Leaf& leaf) const {
    Split out;
    const double parent = impurity(leaf.lo, leaf.hi);
    for (std::size_t at = leaf.lo + 1; at < leaf.hi; ++at) {
      if (x_[at] == x_[at - 1]) continue;
      const double gain = parent - impurity(leaf.lo, at) - impurity(at, leaf.hi);
      if (gain > out.gain + 1e-12) out = {gain, at};
    }
    return out;
  }

  double threshold(std::size_t at) const { return 0.5 * (x_[at - 1] + x_[at]); }

 private:
  std::vector<double> x_, y_;
  bool cls_;
  std::map<double, std::size_t> class_of_;
};

std::vector<double> tree_edges(const std::vector<double>& column, const TreeTarget& target, std::size_t k) {
  std::vector<std::size_t> order(column.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return column[a] < column[b]; });
  std::vector<double> xs, ys;
  for (auto i : order) {
    xs.push_back(column[i]);
    ys.push_back(target.y[i]);
  }
  TreeSplitter sp(xs, ys, target.classification);
  const std::size_t max_depth = std::size_t(std::ceil(std::log2(double(std::max<std::size_t>(k, 2)))));
  std::vector<Leaf> leaves = {{0, xs.size(), 0}};
  std::vector<double> thresholds;
  while (leaves.size() < k) {
    Split best;
    std::size_t which = leaves.size();
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      if (leaves[li].depth >= max_depth) continue;
      Split s = sp.best(leaves[li]);
      if (s.gain > best.gain) {
        best = s;
        which = li;
      }
    }
    if (which == leaves.size()) break;
    const Leaf parent = leaves[which];
    thresholds.push_back(sp.threshold(best.at));
    leaves[which] = {parent.lo, best.at, parent.depth + 1};
    leaves.push_back({best.at, parent.hi, parent.depth + 1});
  }
  std::sort(thresholds.begin(), thresholds.end());
  std::vector<double> edges = {xs.front()};
  edges.insert(edges.end(), thresholds.begin(), thresholds.end());
  edges.push_back(xs.back());
  return edges;
}

}  // namespace

FitResult fit_breakpoints(const std::vector<double>& column, std::size_t k, BreakpointMode mode,
                          const std::optional<TreeTarget>& target, std::string name) {
  if (column.empty()) throw EncodingError("cannot fit breakpoints on an empty column");
  if (k == 0) throw ConfigError("bin count must be >= 1");
  for (double v : column)
    if (!std::isfinite(v)) throw EncodingError("non-finite value in column " + name);
  FitResult res;
  std::vector<double> sorted = column;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t distinct = std::size_t(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  if (distinct == 1) {
    res.encoding = degenerate_encoding(sorted.front(), name);
    res.warnings.push_back("column " + name + " is constant; encoded as a single degenerate bin");
    return res;
  }
  sorted.assign(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> edges;
  if (mode == BreakpointMode::Quantile) {
    if (distinct < k + 1) {
      res.warnings.push_back("column " + name + " has " + std::to_string(distinct) + " distinct values; bins reduced from " +
                             std::to_string(k) + " to " + std::to_string(distinct - 1));
      k = distinct - 1;
    }
    edges = quantile_edges(sorted, k);
  } else {
    if (!target) throw ConfigError("tree breakpoint mode needs a target");
    if (target->y.size() != column.size()) throw DimensionError("tree target length does not match column");
    edges = tree_edges(column, *target, k);
  }
  const std::size_t before = edges.size();
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (edges.size() < before)
    res.warnings.push_back("column " + name + ": merged " + std::to_string(before - edges.size()) + " duplicate edges");
  res.encoding = ple_from_edges(std::move(edges), std::move(name));
  return res;
}

BinPosition locate(double x, const FeatureEncoding& f) {
  const std::size_t K = f.bins();
  const auto it = std::upper_bound(f.edges.begin(), f.edges.end(), x);
  std::size_t s = std::size_t(it - f.edges.begin());
  s = std::clamp<std::size_t>(s, 1, K);
  const double a = std::clamp((x - f.edges[s - 1]) / f.delta(s), 0.0, 1.0);
  return {s, a};
}

std::vector<double> encode_ple(double x, const FeatureEncoding& f) {
  if (f.degenerate) return {0.0};
  const std::size_t K = f.bins();
  std::vector<double> e(K);
  for (std::size_t t = 1; t <= K; ++t) e[t - 1] = std::clamp((x - f.edges[t - 1]) / f.delta(t), 0.0, 1.0);
  return e;
}

std::vector<double> encode_onehot(int id, std::size_t cardinality) {
  std::vector<double> e(cardinality, 0.0);
  if (id == kUnknownCategory) return e;
  if (id < 0 || std::size_t(id) >= cardinality)
    throw EncodingError("category id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(cardinality));
  e[std::size_t(id)] = 1.0;
  return e;
}

double ple_gram(double x, double x2, const FeatureEncoding& f) {
  if (f.degenerate) return 0.0;
  const auto [s, a] = locate(x, f);
  const auto [t, b] = locate(x2, f);
  const double base = double(std::min(s, t)) - 1.0;
  if (s < t) return base + a;
  if (s > t) return base + b;
  return base + a * b;
}

Tensor encode_padded(const Tensor& x, const PleSpec& spec) {
  if (x.rank() != 2 || x.dim(1) != spec.size())
    throw DimensionError("encode: expected [n x " + std::to_string(spec.size()) + "], got " + nd::shape_str(x.shape()));
  const std::size_t n = x.dim(0), d = spec.size(), K = spec.max_width();
  Tensor out({n, d, K});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const auto& f = spec.features[j];
      const double v = x.at(r, j);
      const auto e = f.kind == Kind::Ple ? encode_ple(v, f) : encode_onehot(int(std::lround(v)), f.cardinality);
      std::copy(e.begin(), e.end(), out.data().begin() + std::ptrdiff_t((r * d + j) * K));
    }
  return out;
}

}  // namespace lfn::enc
