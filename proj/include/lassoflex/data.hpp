#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lassoflex/path_model.hpp"
#include "lassoflex/tensor.hpp"

namespace lfn::data {

enum class ColumnKind { Numeric, Categorical };
enum class SplitLabel : std::uint8_t { Train, Val, Test, None };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<double> numeric;    // numeric columns
  std::vector<std::string> raw;   // categorical columns, original strings
  std::vector<int> ids;           // categorical ids after build_vocabularies()
  std::vector<std::string> vocab;
  bool injected = false;
  /// Ground truth for feature-selection scoring, when known.
  std::optional<bool> relevant;
};

struct TabularDataset {
  std::vector<Column> columns;  // features only
  std::string target_name = "target";
  Task task = Task::Regression;
  std::vector<double> target;            // value, or class id for classification
  std::vector<std::string> class_names;  // classification only
  std::vector<SplitLabel> split;         // empty until split()
  std::size_t dropped_rows = 0;

  std::size_t rows() const { return target.size(); }
  std::size_t features() const { return columns.size(); }
  std::vector<std::size_t> rows_in(SplitLabel s) const;
  std::size_t classes() const { return class_names.size(); }
  void validate() const;
};

struct CsvOptions {
  /// Targets with at most this many distinct integer or string values are
  /// treated as classification.
  std::size_t class_cap = 10;
  std::optional<Task> task;
  bool drop_incomplete_rows = false;
  /// Column kind overrides by name; others are auto-typed.
  std::map<std::string, ColumnKind> kinds;
};

/// RFC-4180 CSV with a header row.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
TabularDataset load_csv(const std::string& path, const std::string& target, const CsvOptions& opt = {});
TabularDataset dataset_from_table(const std::vector<std::vector<std::string>>& table, const std::string& target,
                                  const CsvOptions& opt = {});
void write_csv(const TabularDataset& ds, const std::string& path);
std::string to_csv(const TabularDataset& ds);

struct SplitFractions {
  double train = 0.65, val = 0.15, test = 0.20;
};
enum class SplitMode { Random, Temporal };

/// Random: seeded permutation then contiguous cut. Temporal: ascending
/// `order` (row order when empty), train precedes val precedes test.
/// Val/test sizes are rounded; the remainder goes to train.
void split(TabularDataset& ds, SplitFractions f, SplitMode mode, std::uint64_t seed,
           const std::vector<double>& order = {});

/// Builds categorical vocabularies from training rows only and assigns ids;
/// unseen values get the unknown id.
void build_vocabularies(TabularDataset& ds);

struct Standardizer {
  std::vector<std::size_t> columns;  // numeric column indices
  std::vector<double> mean, std;
  bool target = false;
  double target_mean = 0.0, target_std = 1.0;

  void apply(TabularDataset& ds) const;
  void invert(TabularDataset& ds) const;
  nlohmann::ordered_json to_json() const;
};

/// Fits on the training split and standardizes numeric features (and the
/// target for regression). Std is the population std floored at 1e-12.
Standardizer standardize_fit_apply(TabularDataset& ds);

enum class NoiseKind { Random, SecondOrder };

/// Number of extra columns so that extras / (d + extras) = fraction.
std::size_t noise_extras(std::size_t d, double fraction);
void inject_noise_features(TabularDataset& ds, double fraction, NoiseKind kind, std::uint64_t seed);

/// [rows x d] with numeric values and categorical ids (as doubles).
nd::Tensor feature_matrix(const TabularDataset& ds, const std::vector<std::size_t>& rows);
/// Same, with each categorical column expanded to one-hot columns.
nd::Tensor expanded_matrix(const TabularDataset& ds, const std::vector<std::size_t>& rows);
/// Source column of every expanded column.
std::vector<std::size_t> expanded_sources(const TabularDataset& ds);
nd::Tensor target_matrix(const TabularDataset& ds, const std::vector<std::size_t>& rows);
std::vector<int> target_labels(const TabularDataset& ds, const std::vector<std::size_t>& rows);

nlohmann::ordered_json sidecar_json(const TabularDataset& ds);
/// Column kinds recorded in a sidecar, usable as CsvOptions::kinds.
std::map<std::string, ColumnKind> sidecar_kinds(const nlohmann::json& j);
/// Applies vocabularies, flags and split labels from a sidecar.
void apply_sidecar(TabularDataset& ds, const nlohmann::json& j);

std::string split_name(SplitLabel s);

}  // namespace lfn::data
