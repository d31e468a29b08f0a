#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lassoflex/tensor.hpp"

namespace lfn::enc {

/// Category id reserved for values never seen in the training split.
inline constexpr int kUnknownCategory = -1;

enum class Kind { Ple, OneHot };
enum class BreakpointMode { Quantile, Tree };

/// Encoder for one column. For PLE columns `edges` holds b_0 < ... < b_K;
/// for one-hot columns `cardinality` is the vocabulary size.
struct FeatureEncoding {
  std::string name;
  Kind kind = Kind::Ple;
  std::vector<double> edges;
  std::size_t cardinality = 0;
  /// Constant training column: encodes to a single zero coordinate.
  bool degenerate = false;

  std::size_t bins() const { return degenerate ? 1 : edges.size() - 1; }
  std::size_t width() const { return kind == Kind::Ple ? bins() : cardinality; }
  double delta(std::size_t t) const { return edges[t] - edges[t - 1]; }
};

struct PleSpec {
  std::vector<FeatureEncoding> features;

  std::size_t size() const { return features.size(); }
  std::size_t max_width() const;

  nlohmann::ordered_json to_json() const;
  static PleSpec from_json(const nlohmann::ordered_json& j);
};

struct FitResult {
  FeatureEncoding encoding;
  std::vector<std::string> warnings;
};

struct TreeTarget {
  std::vector<double> y;
  bool classification = false;
};

/// Estimates PLE edges for one numeric column. Duplicate edges are merged,
/// which lowers K; a constant column yields a degenerate encoding.
FitResult fit_breakpoints(const std::vector<double>& column, std::size_t k, BreakpointMode mode,
                          const std::optional<TreeTarget>& target = std::nullopt, std::string name = {});

/// Validates strictly increasing edges and builds a PLE encoding.
FeatureEncoding ple_from_edges(std::vector<double> edges, std::string name = {});
FeatureEncoding onehot(std::size_t cardinality, std::string name = {});

/// e_t = clip((x - b_{t-1}) / Delta_t, 0, 1), t = 1..K.
std::vector<double> encode_ple(double x, const FeatureEncoding& f);
std::vector<double> encode_onehot(int id, std::size_t cardinality);

/// Right-continuous bin index s(x) in 1..K and the fractional position
/// alpha(x) = clip((x - b_{s-1}) / Delta_s).
struct BinPosition {
  std::size_t bin;
  double alpha;
};
BinPosition locate(double x, const FeatureEncoding& f);

/// <phi(x), phi(x')> by the closed form (min(s,t) - 1) + case term.
double ple_gram(double x, double x2, const FeatureEncoding& f);

/// Encodes an [n x d] matrix (categorical columns carry ids as doubles)
/// into [n, d, max_width], zero-padded per feature.
nd::Tensor encode_padded(const nd::Tensor& x, const PleSpec& spec);

}  // namespace lfn::enc
