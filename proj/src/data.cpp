#include "lassoflex/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "lassoflex/encoding.hpp"
#include "lassoflex/errors.hpp"

namespace lfn::data {

using nd::Tensor;

std::vector<std::size_t> TabularDataset::rows_in(SplitLabel s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

void TabularDataset::validate() const {
  for (const auto& c : columns) {
    const std::size_t n = c.kind == ColumnKind::Numeric ? c.numeric.size() : c.raw.size();
    if (n != rows()) throw DataError("column " + c.name + " has " + std::to_string(n) + " rows, expected " +
                                     std::to_string(rows()));
    if (c.kind == ColumnKind::Numeric)
      for (double v : c.numeric)
        if (!std::isfinite(v)) throw DataError("column " + c.name + " holds a non-finite value");
  }
  if (!split.empty() && split.size() != rows()) throw DataError("split labels do not cover every row");
}

std::string split_name(SplitLabel s) {
  switch (s) {
    case SplitLabel::Train: return "train";
    case SplitLabel::Val: return "val";
    case SplitLabel::Test: return "test";
    case SplitLabel::None: return "none";
  }
  return "none";
}

namespace {

SplitLabel parse_split(const std::string& s) {
  if (s == "train") return SplitLabel::Train;
  if (s == "val") return SplitLabel::Val;
  if (s == "test") return SplitLabel::Test;
  if (s == "none") return SplitLabel::None;
  throw DataError("unknown split label '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& s) {
  const std::string t = trim(s);
  return t.empty() || t == "NA";
}

std::optional<double> parse_number(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos && trim(s) == s) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string list_rows(const std::vector<std::size_t>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < rows.size() && i < 20; ++i) os << (i ? ", " : "") << rows[i];
  if (rows.size() > 20) os << ", ... (" << rows.size() << " total)";
  return os.str();
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
      ++line;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw DataError("unterminated quoted field at line " + std::to_string(line));
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

TabularDataset dataset_from_table(const std::vector<std::vector<std::string>>& table, const std::string& target,
                                  const CsvOptions& opt) {
  if (table.empty()) throw DataError("CSV has no header row");
  const auto& header = table.front();
  std::vector<std::string> names;
  for (const auto& h : header) names.push_back(trim(h));
  const auto tit = std::find(names.begin(), names.end(), target);
  if (tit == names.end()) throw DataError("target column '" + target + "' not found in header");
  const std::size_t tcol = std::size_t(tit - names.begin());
  {
    std::set<std::string> seen;
    for (const auto& n : names)
      if (!seen.insert(n).second) throw DataError("duplicate column name '" + n + "'");
  }

  std::vector<std::size_t> ragged, incomplete;
  std::vector<const std::vector<std::string>*> body;
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& row = table[r];
    if (row.size() != names.size()) {
      ragged.push_back(r + 1);
      continue;
    }
    bool missing = false;
    for (const auto& f : row) missing = missing || is_missing(f);
    if (missing) {
      incomplete.push_back(r + 1);
      continue;
    }
    body.push_back(&row);
  }
  if (!ragged.empty())
    throw DataError("rows with the wrong number of fields (line numbers): " + list_rows(ragged));
  if (!incomplete.empty() && !opt.drop_incomplete_rows)
    throw DataError("rows with missing values (line numbers): " + list_rows(incomplete) +
                    "; pass --drop-incomplete-rows to drop them");
  if (body.empty()) throw DataError("CSV has no complete data rows");

  TabularDataset ds;
  ds.target_name = target;
  ds.dropped_rows = incomplete.size();
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c == tcol) continue;
    Column col;
    col.name = names[c];
    std::vector<double> vals;
    bool numeric = true;
    for (const auto* row : body) {
      auto v = parse_number((*row)[c]);
      if (!v) {
        numeric = false;
        break;
      }
      vals.push_back(*v);
    }
    if (auto it = opt.kinds.find(col.name); it != opt.kinds.end()) {
      if (it->second == ColumnKind::Numeric && !numeric)
        throw DataError("column " + col.name + " is declared numeric but holds non-numeric values");
      numeric = it->second == ColumnKind::Numeric;
    }
    if (numeric) {
      col.kind = ColumnKind::Numeric;
      col.numeric = std::move(vals);
    } else {
      col.kind = ColumnKind::Categorical;
      for (const auto* row : body) col.raw.push_back(trim((*row)[c]));
    }
    ds.columns.push_back(std::move(col));
  }

  std::vector<std::string> traw;
  std::vector<double> tnum;
  bool tnumeric = true, tinteger = true;
  for (const auto* row : body) {
    traw.push_back(trim((*row)[tcol]));
    auto v = parse_number(traw.back());
    if (!v) tnumeric = false;
    else {
      tnum.push_back(*v);
      tinteger = tinteger && std::floor(*v) == *v;
    }
  }
  std::set<std::string> distinct(traw.begin(), traw.end());
  Task task;
  if (opt.task) task = *opt.task;
  else if (!tnumeric) task = Task::Classification;
  else task = (tinteger && distinct.size() <= opt.class_cap) ? Task::Classification : Task::Regression;
  ds.task = task;
  if (task == Task::Regression) {
    if (!tnumeric) throw DataError("regression target '" + target + "' holds non-numeric values");
    ds.target = std::move(tnum);
  } else {
    if (!tnumeric && distinct.size() > opt.class_cap && !opt.task)
      throw DataError("target '" + target + "' has " + std::to_string(distinct.size()) +
                      " distinct labels, above the class cap");
    std::vector<std::string> classes(distinct.begin(), distinct.end());
    if (tnumeric)
      std::sort(classes.begin(), classes.end(),
                [](const auto& a, const auto& b) { return *parse_number(a) < *parse_number(b); });
    ds.class_names = classes;
    for (const auto& t : traw)
      ds.target.push_back(double(std::find(classes.begin(), classes.end(), t) - classes.begin()));
  }
  ds.validate();
  return ds;
}

TabularDataset load_csv(const std::string& path, const std::string& target, const CsvOptions& opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return dataset_from_table(parse_csv(ss.str()), target, opt);
}

std::string to_csv(const TabularDataset& ds) {
  std::ostringstream os;
  for (const auto& c : ds.columns) os << quote(c.name) << ',';
  os << quote(ds.target_name) << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (const auto& c : ds.columns)
      os << (c.kind == ColumnKind::Numeric ? format_number(c.numeric[r]) : quote(c.raw[r])) << ',';
    if (ds.task == Task::Classification) os << quote(ds.class_names.at(std::size_t(ds.target[r])));
    else os << format_number(ds.target[r]);
    os << '\n';
  }
  return os.str();
}

void write_csv(const TabularDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << to_csv(ds);
}

void split(TabularDataset& ds, SplitFractions f, SplitMode mode, std::uint64_t seed, const std::vector<double>& order) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must be non-negative and sum to 1");
  const std::size_t n = ds.rows();
  const auto n_val = std::size_t(std::llround(f.val * double(n)));
  const auto n_test = std::size_t(std::llround(f.test * double(n)));
  if (n_val + n_test > n) throw ConfigError("split fractions leave no room for training rows");
  const std::size_t n_train = n - n_val - n_test;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (mode == SplitMode::Random) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
  } else if (!order.empty()) {
    if (order.size() != n) throw DataError("order column length does not match the dataset");
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return order[a] < order[b]; });
  }
  ds.split.assign(n, SplitLabel::None);
  for (std::size_t k = 0; k < n; ++k)
    ds.split[idx[k]] = k < n_train ? SplitLabel::Train : (k < n_train + n_val ? SplitLabel::Val : SplitLabel::Test);
}

void build_vocabularies(TabularDataset& ds) {
  std::vector<std::size_t> train = ds.rows_in(SplitLabel::Train);
  if (ds.split.empty()) {
    train.resize(ds.rows());
    std::iota(train.begin(), train.end(), 0);
  }
  for (auto& c : ds.columns) {
    if (c.kind != ColumnKind::Categorical) continue;
    c.vocab.clear();
    for (auto r : train)
      if (std::find(c.vocab.begin(), c.vocab.end(), c.raw[r]) == c.vocab.end()) c.vocab.push_back(c.raw[r]);
    c.ids.assign(ds.rows(), enc::kUnknownCategory);
    for (std::size_t r = 0; r < ds.rows(); ++r) {
      auto it = std::find(c.vocab.begin(), c.vocab.end(), c.raw[r]);
      if (it != c.vocab.end()) c.ids[r] = int(it - c.vocab.begin());
    }
  }
}

void Standardizer::apply(TabularDataset& ds) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    for (auto& v : ds.columns[columns[k]].numeric) v = (v - mean[k]) / std[k];
  if (target)
    for (auto& v : ds.target) v = (v - target_mean) / target_std;
}

void Standardizer::invert(TabularDataset& ds) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    for (auto& v : ds.columns[columns[k]].numeric) v = v * std[k] + mean[k];
  if (target)
    for (auto& v : ds.target) v = v * target_std + target_mean;
}

nlohmann::ordered_json Standardizer::to_json() const {
  nlohmann::ordered_json j;
  j["columns"] = columns;
  j["mean"] = mean;
  j["std"] = std;
  j["target"] = target;
  j["target_mean"] = target_mean;
  j["target_std"] = target_std;
  return j;
}

namespace {

std::pair<double, double> moments(const std::vector<double>& v, const std::vector<std::size_t>& rows) {
  double mu = 0.0;
  for (auto r : rows) mu += v[r];
  mu /= double(rows.size());
  double var = 0.0;
  for (auto r : rows) var += (v[r] - mu) * (v[r] - mu);
  var /= double(rows.size());
  return {mu, std::max(std::sqrt(var), 1e-12)};
}

}  // namespace

Standardizer standardize_fit_apply(TabularDataset& ds) {
  const auto train = ds.rows_in(SplitLabel::Train);
  if (train.empty()) throw DataError("standardization needs a non-empty training split");
  Standardizer s;
  for (std::size_t c = 0; c < ds.columns.size(); ++c) {
    if (ds.columns[c].kind != ColumnKind::Numeric) continue;
    auto [mu, sd] = moments(ds.columns[c].numeric, train);
    s.columns.push_back(c);
    s.mean.push_back(mu);
    s.std.push_back(sd);
  }
  if (ds.task == Task::Regression) {
    s.target = true;
    std::tie(s.target_mean, s.target_std) = moments(ds.target, train);
  }
  s.apply(ds);
  return s;
}

std::size_t noise_extras(std::size_t d, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("noise fraction must lie in (0, 1)");
  return std::size_t(std::llround(fraction * double(d) / (1.0 - fraction)));
}

void inject_noise_features(TabularDataset& ds, double fraction, NoiseKind kind, std::uint64_t seed) {
  const std::size_t extras = noise_extras(ds.features(), fraction);
  std::vector<std::size_t> numeric;
  for (std::size_t c = 0; c < ds.columns.size(); ++c)
    if (ds.columns[c].kind == ColumnKind::Numeric) numeric.push_back(c);
  if (kind == NoiseKind::SecondOrder && numeric.empty())
    throw ConfigError("second-order noise needs at least one numeric column");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, numeric.empty() ? 0 : numeric.size() - 1);
  const std::size_t n = ds.rows();
  for (std::size_t k = 0; k < extras; ++k) {
    Column col;
    col.kind = ColumnKind::Numeric;
    col.injected = true;
    col.relevant = false;
    if (kind == NoiseKind::Random) {
      col.name = "noise_" + std::to_string(k);
      col.numeric.resize(n);
      for (auto& v : col.numeric) v = n01(rng);
    } else {
      const std::size_t a = numeric[pick(rng)], b = numeric[pick(rng)];
      col.name = "prod_" + ds.columns[a].name + "_" + ds.columns[b].name + "_" + std::to_string(k);
      col.numeric.resize(n);
      for (std::size_t r = 0; r < n; ++r) col.numeric[r] = ds.columns[a].numeric[r] * ds.columns[b].numeric[r];
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), 0);
      auto [mu, sd] = moments(col.numeric, all);
      for (auto& v : col.numeric) v = (v - mu) / sd;
    }
    ds.columns.push_back(std::move(col));
  }
}

Tensor feature_matrix(const TabularDataset& ds, const std::vector<std::size_t>& rows) {
  Tensor x({rows.size(), ds.features()});
  for (std::size_t c = 0; c < ds.features(); ++c) {
    const auto& col = ds.columns[c];
    if (col.kind == ColumnKind::Categorical && col.ids.size() != ds.rows())
      throw ContractError("categorical column " + col.name + " has no vocabulary yet");
    for (std::size_t i = 0; i < rows.size(); ++i)
      x.at(i, c) = col.kind == ColumnKind::Numeric ? col.numeric[rows[i]] : double(col.ids[rows[i]]);
  }
  return x;
}

std::vector<std::size_t> expanded_sources(const TabularDataset& ds) {
  std::vector<std::size_t> src;
  for (std::size_t c = 0; c < ds.features(); ++c) {
    const auto& col = ds.columns[c];
    const std::size_t w = col.kind == ColumnKind::Numeric ? 1 : col.vocab.size();
    for (std::size_t k = 0; k < w; ++k) src.push_back(c);
  }
  return src;
}

Tensor expanded_matrix(const TabularDataset& ds, const std::vector<std::size_t>& rows) {
  const auto src = expanded_sources(ds);
  Tensor x({rows.size(), src.size()});
  std::size_t off = 0;
  for (std::size_t c = 0; c < ds.features(); ++c) {
    const auto& col = ds.columns[c];
    if (col.kind == ColumnKind::Numeric) {
      for (std::size_t i = 0; i < rows.size(); ++i) x.at(i, off) = col.numeric[rows[i]];
      ++off;
    } else {
      if (col.ids.size() != ds.rows()) throw ContractError("categorical column " + col.name + " has no vocabulary yet");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto e = enc::encode_onehot(col.ids[rows[i]], col.vocab.size());
        for (std::size_t k = 0; k < e.size(); ++k) x.at(i, off + k) = e[k];
      }
      off += col.vocab.size();
    }
  }
  return x;
}

Tensor target_matrix(const TabularDataset& ds, const std::vector<std::size_t>& rows) {
  Tensor y({rows.size(), 1});
  for (std::size_t i = 0; i < rows.size(); ++i) y[i] = ds.target[rows[i]];
  return y;
}

std::vector<int> target_labels(const TabularDataset& ds, const std::vector<std::size_t>& rows) {
  std::vector<int> y;
  for (auto r : rows) y.push_back(int(ds.target[r]));
  return y;
}

nlohmann::ordered_json sidecar_json(const TabularDataset& ds) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["target"] = ds.target_name;
  j["task"] = ds.task == Task::Regression ? "regression" : "classification";
  j["class_names"] = ds.class_names;
  j["rows"] = ds.rows();
  j["dropped_rows"] = ds.dropped_rows;
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (const auto& c : ds.columns) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["kind"] = c.kind == ColumnKind::Numeric ? "numeric" : "categorical";
    if (c.kind == ColumnKind::Categorical) e["vocab"] = c.vocab;
    e["injected"] = c.injected;
    e["relevant"] = c.relevant ? nlohmann::ordered_json(*c.relevant) : nlohmann::ordered_json(nullptr);
    cols.push_back(std::move(e));
  }
  j["columns"] = std::move(cols);
  nlohmann::ordered_json sp = nlohmann::ordered_json::array();
  for (auto s : ds.split) sp.push_back(split_name(s));
  j["split"] = std::move(sp);
  return j;
}

std::map<std::string, ColumnKind> sidecar_kinds(const nlohmann::json& j) {
  std::map<std::string, ColumnKind> kinds;
  if (!j.contains("columns")) return kinds;
  for (const auto& c : j.at("columns"))
    kinds[c.at("name")] = c.at("kind") == "numeric" ? ColumnKind::Numeric : ColumnKind::Categorical;
  return kinds;
}

void apply_sidecar(TabularDataset& ds, const nlohmann::json& j) {
  if (!j.contains("columns")) return;
  for (const auto& e : j.at("columns")) {
    const std::string name = e.at("name");
    auto it = std::find_if(ds.columns.begin(), ds.columns.end(), [&](const Column& c) { return c.name == name; });
    if (it == ds.columns.end()) continue;
    it->injected = e.value("injected", false);
    if (e.contains("relevant") && !e.at("relevant").is_null()) it->relevant = e.at("relevant").get<bool>();
    if (it->kind == ColumnKind::Categorical && e.contains("vocab") && !e.at("vocab").empty()) {
      it->vocab = e.at("vocab").get<std::vector<std::string>>();
      it->ids.assign(ds.rows(), enc::kUnknownCategory);
      for (std::size_t r = 0; r < ds.rows(); ++r) {
        auto v = std::find(it->vocab.begin(), it->vocab.end(), it->raw[r]);
        if (v != it->vocab.end()) it->ids[r] = int(v - it->vocab.begin());
      }
    }
  }
  if (j.contains("split") && !j.at("split").empty()) {
    if (j.at("split").size() != ds.rows()) throw DataError("sidecar split labels do not match the row count");
    ds.split.clear();
    for (const auto& s : j.at("split")) ds.split.push_back(parse_split(s.get<std::string>()));
  }
}

}  // namespace lfn::data
