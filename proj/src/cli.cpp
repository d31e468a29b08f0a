#include "lassoflex/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "lassoflex/analysis.hpp"
#include "lassoflex/baseline.hpp"
#include "lassoflex/data.hpp"
#include "lassoflex/errors.hpp"
#include "lassoflex/model.hpp"
#include "lassoflex/oracle.hpp"
#include "lassoflex/training.hpp"

namespace lfn::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream o(path, std::ios::binary);
  if (!o) throw DataError("cannot write " + path.string());
  o << text;
  if (!o) throw DataError("failed writing " + path.string());
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON (" + e.what() + ")");
  }
}

std::vector<long long> parse_int_list(const std::string& s, const std::string& flag) {
  std::vector<long long> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoll(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(flag + ": expected a comma-separated list of integers, got '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

std::string flag_of(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

/// Converts a flag's text to the JSON type of its default.
json convert(const std::string& key, const json& like, const std::string& text) {
  const std::string flag = flag_of(key);
  try {
    std::size_t pos = 0;
    if (like.is_number_unsigned() || like.is_number_integer()) {
      const long long v = std::stoll(text, &pos);
      if (pos != text.size()) throw std::invalid_argument(text);
      if (like.is_number_unsigned() && v < 0) throw ConfigError(flag + " must be non-negative");
      return v;
    }
    if (like.is_number_float() || like.is_null()) {
      const double v = std::stod(text, &pos);
      if (pos != text.size()) throw std::invalid_argument(text);
      return v;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(flag + ": cannot parse '" + text + "'");
  }
  if (like.is_array()) return parse_int_list(text, flag);
  return text;
}

// ---- train -------------------------------------------------------------------

struct TrainFlags {
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option*> opts;
  std::string config_path, manifest_path, seed;
  bool json_out = false;
};

const char* help_of(const std::string& key) {
  static const std::map<std::string, const char*> h = {
      {"data", "input CSV with a header row"},
      {"target", "name of the target column"},
      {"sidecar", "sidecar JSON with column kinds, vocabularies and split labels"},
      {"task", "auto, regression or classification"},
      {"class_cap", "integer/string targets with at most this many values are classes"},
      {"drop_incomplete", "drop rows with missing values instead of failing"},
      {"model", "lassoflexnet or lassonet"},
      {"split_mode", "random or temporal"},
      {"time_column", "column ordering rows for a temporal split (removed from the features)"},
      {"split_seed", "seed of the train/val/test split"},
      {"bins", "PLE bins per numeric feature"},
      {"breakpoints", "quantile or tree"},
      {"prox", "hier, seq, seq-ema or convex"},
      {"optimizer", "adamw or sgd-nesterov"},
      {"prox_step_scaling", "eta, eta-mean or none"},
      {"seeds", "comma-separated run seeds, one run per seed"},
      {"threads", "worker threads (0: automatic, capped by LASSOFLEX_THREADS)"},
      {"out", "artifact directory"},
  };
  auto it = h.find(key);
  return it == h.end() ? "" : it->second;
}

void register_train(CLI::App& sub, TrainFlags& tf) {
  const auto defaults = train_defaults("lassoflexnet");
  for (const auto& [key, val] : defaults.items()) {
    if (val.is_boolean()) {
      const std::string f = flag_of(key);
      tf.flags[key] = val.get<bool>();
      tf.opts[key] = sub.add_flag(f + ",!--no-" + f.substr(2), tf.flags[key], help_of(key));
    } else {
      tf.text[key] = "";
      tf.opts[key] = sub.add_option(flag_of(key), tf.text[key], help_of(key));
    }
  }
  sub.add_option("--seed", tf.seed, "single run seed (same as --seeds with one value)");
  sub.add_option("--config", tf.config_path, "JSON config; flags override it");
  sub.add_option("--manifest", tf.manifest_path, "re-run the configuration recorded in a manifest");
  sub.add_flag("--json", tf.json_out, "print the run summaries as JSON");
}

void overlay(ordered_json& dst, const json& src, const std::string& origin) {
  for (const auto& [k, v] : src.items()) {
    if (!dst.contains(k)) throw ConfigError(origin + ": unknown key '" + k + "'");
    dst[k] = v;
  }
}

ordered_json resolve_train(const TrainFlags& tf) {
  json file = json::object();
  if (!tf.manifest_path.empty()) {
    const json m = parse_json_file(tf.manifest_path);
    if (!m.contains("config")) throw ConfigError(tf.manifest_path + ": manifest has no config");
    file = m.at("config");
  } else if (!tf.config_path.empty()) {
    file = parse_json_file(tf.config_path);
  }
  if (!file.is_object()) throw ConfigError("config must be a JSON object");

  std::string model = "lassoflexnet";
  if (file.contains("model")) model = file.at("model").get<std::string>();
  if (tf.opts.at("model")->count()) model = tf.text.at("model");
  ordered_json cfg = train_defaults(model);
  overlay(cfg, file, tf.manifest_path.empty() ? tf.config_path : tf.manifest_path);
  for (const auto& [key, opt] : tf.opts) {
    if (!opt->count()) continue;
    if (tf.flags.count(key))
      cfg[key] = tf.flags.at(key);
    else
      cfg[key] = convert(key, train_defaults(model).at(key), tf.text.at(key));
  }
  if (!tf.seed.empty()) cfg["seeds"] = json::array({convert("seed", 0, tf.seed)});
  if (cfg["data"].get<std::string>().empty()) throw ConfigError("--data is required");
  if (cfg["target"].get<std::string>().empty()) throw ConfigError("--target is required");
  return cfg;
}

train::TrainConfig train_config_of(const ordered_json& cfg, std::uint64_t seed) {
  json t = json::object();
  for (const char* k : {"pretrain_epochs", "lambda_epochs", "patience", "batch_size", "lr", "weight_decay",
                        "momentum", "optimizer", "M", "lambda_bar", "prox", "ema_clamp_live",
                        "ema_enforce_feasibility", "ema_decay", "prox_step_scaling", "lambda_start", "lambda_end",
                        "lambda_multiplier", "path_size", "path_power"})
    t[k] = cfg.at(k);
  t["seed"] = seed;
  auto c = train::TrainConfig::from_json(t);
  build_lambda_path(c.path);
  return c;
}

struct PreparedRun {
  data::TabularDataset ds;
  data::Standardizer standardizer;
  enc::PleSpec spec;
  train::TrainData td;
  train::Prepared test;
  std::vector<std::string> feature_names;
};

PreparedRun prepare_run(const ordered_json& cfg) {
  PreparedRun pr;
  data::CsvOptions opt;
  opt.class_cap = cfg.at("class_cap");
  opt.drop_incomplete_rows = cfg.at("drop_incomplete");
  const std::string task = cfg.at("task");
  if (task == "regression")
    opt.task = Task::Regression;
  else if (task == "classification")
    opt.task = Task::Classification;
  else if (task != "auto")
    throw ConfigError("--task must be auto, regression or classification");
  json sidecar;
  const std::string sidecar_path = cfg.at("sidecar");
  if (!sidecar_path.empty()) {
    sidecar = parse_json_file(sidecar_path);
    opt.kinds = data::sidecar_kinds(sidecar);
  }
  pr.ds = data::load_csv(cfg.at("data"), cfg.at("target"), opt);
  if (!sidecar.is_null()) data::apply_sidecar(pr.ds, sidecar);

  std::vector<double> order;
  const std::string time_col = cfg.at("time_column");
  const std::string mode = cfg.at("split_mode");
  if (!time_col.empty()) {
    auto it = std::find_if(pr.ds.columns.begin(), pr.ds.columns.end(),
                           [&](const data::Column& c) { return c.name == time_col; });
    if (it == pr.ds.columns.end()) throw DataError("time column '" + time_col + "' not found");
    if (it->kind != data::ColumnKind::Numeric) throw DataError("time column '" + time_col + "' is not numeric");
    order = it->numeric;
    pr.ds.columns.erase(it);
  }
  if (pr.ds.split.empty()) {
    data::SplitMode sm;
    if (mode == "random")
      sm = data::SplitMode::Random;
    else if (mode == "temporal")
      sm = data::SplitMode::Temporal;
    else
      throw ConfigError("--split-mode must be random or temporal");
    data::SplitFractions f{cfg.at("train_frac"), cfg.at("val_frac"), cfg.at("test_frac")};
    data::split(pr.ds, f, sm, cfg.at("split_seed"), order);
  }
  data::build_vocabularies(pr.ds);
  pr.standardizer = data::standardize_fit_apply(pr.ds);
  pr.td.task = pr.ds.task;

  const std::string model = cfg.at("model");
  if (model == "lassoflexnet") {
    const std::string bp = cfg.at("breakpoints");
    if (bp != "quantile" && bp != "tree") throw ConfigError("--breakpoints must be quantile or tree");
    pr.spec = train::fit_encoder(pr.ds, cfg.at("bins"),
                                 bp == "tree" ? enc::BreakpointMode::Tree : enc::BreakpointMode::Quantile);
    pr.td.train = train::prepare_encoded(pr.ds, pr.spec, data::SplitLabel::Train);
    pr.td.val = train::prepare_encoded(pr.ds, pr.spec, data::SplitLabel::Val);
    pr.test = train::prepare_encoded(pr.ds, pr.spec, data::SplitLabel::Test);
    for (const auto& c : pr.ds.columns) pr.feature_names.push_back(c.name);
  } else {
    pr.td.train = train::prepare_raw(pr.ds, data::SplitLabel::Train);
    pr.td.val = train::prepare_raw(pr.ds, data::SplitLabel::Val);
    pr.test = train::prepare_raw(pr.ds, data::SplitLabel::Test);
    for (const auto& c : pr.ds.columns) {
      if (c.kind == data::ColumnKind::Numeric)
        pr.feature_names.push_back(c.name);
      else
        for (const auto& v : c.vocab) pr.feature_names.push_back(c.name + "=" + v);
    }
  }
  return pr;
}

std::unique_ptr<PathModel> build_model(const ordered_json& cfg, const PreparedRun& pr, std::uint64_t seed,
                                       ordered_json& model_cfg) {
  const std::size_t outputs = pr.ds.task == Task::Classification ? pr.ds.classes() : 1;
  if (cfg.at("model") == "lassoflexnet") {
    FlexConfig fc;
    fc.features = pr.spec.size();
    fc.in_width = pr.spec.max_width();
    fc.embed = cfg.at("embed");
    fc.pfe_depth = cfg.at("pfe_depth");
    fc.mixer_blocks = cfg.at("mixer_blocks");
    fc.hidden = cfg.at("hidden");
    fc.token_hidden = cfg.at("token_hidden");
    fc.channel_hidden = cfg.at("channel_hidden");
    fc.outputs = outputs;
    fc.tau = cfg.at("tau");
    fc.M = cfg.at("M");
    fc.dropout = cfg.at("dropout");
    fc.pfe_dropout = cfg.at("pfe_dropout");
    fc.gate_pfe = cfg.at("gate_pfe");
    fc.seed = seed;
    model_cfg = fc.to_json();
    return std::make_unique<LassoFlexNet>(fc);
  }
  LassoNetConfig lc;
  lc.inputs = pr.td.train.x.dim(1);
  lc.hidden = cfg.at("hidden");
  lc.outputs = outputs;
  lc.tau = cfg.at("tau");
  lc.M = cfg.at("M");
  lc.seed = seed;
  model_cfg = lc.to_json();
  return std::make_unique<LassoNet>(lc);
}

ordered_json run_seed(const ordered_json& cfg, const PreparedRun& pr, std::uint64_t seed, const fs::path& dir) {
  ordered_json model_cfg;
  auto model = build_model(cfg, pr, seed, model_cfg);
  const auto tc = train_config_of(cfg, seed);
  train::Trainer trainer(*model, pr.td, tc);
  trainer.run();
  const auto& rep = trainer.report();

  ordered_json summary = rep.summary();
  ordered_json metrics;
  metrics["val_loss"] = train::mean_loss(*model, pr.td.val, pr.td.task);
  if (pr.td.task == Task::Regression) {
    const double rmse = train::evaluate(*model, pr.test, train::Metric::Rmse);
    metrics["test_rmse"] = rmse;
    metrics["test_rmse_original_units"] = rmse * pr.standardizer.target_std;
  } else {
    metrics["test_accuracy"] = train::evaluate(*model, pr.test, train::Metric::Accuracy);
    metrics["test_logloss"] = train::evaluate(*model, pr.test, train::Metric::LogLoss);
  }
  metrics["active_features"] = active_features(model->beta().value).k;
  summary["seed"] = seed;
  summary["metrics"] = metrics;

  std::ostringstream imp;
  imp << "rank,feature,gate_norm,dropped_at_stage\n";
  for (std::size_t r = 0; r < rep.importance.size(); ++r) {
    const std::size_t j = rep.importance[r];
    imp << r + 1 << ',' << pr.feature_names.at(j) << ',' << std::setprecision(17) << gate_norm(model->beta().value, j)
        << ',' << rep.dropped_at[j] << '\n';
  }

  auto ck = make_checkpoint(*model, model_cfg, pr.spec);
  ck.ema = trainer.ema().values;
  ck.meta["standardizer"] = pr.standardizer.to_json();
  ck.meta["sidecar"] = data::sidecar_json(pr.ds);
  ck.meta["train_config"] = tc.to_json();

  write_file(dir / "report.jsonl", rep.jsonl());
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "importance.csv", imp.str());
  save_checkpoint((dir / "checkpoint.json").string(), ck);
  return summary;
}

std::size_t worker_count(const ordered_json& cfg, std::size_t jobs) {
  std::size_t n = cfg.at("threads").get<std::size_t>();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LASSOFLEX_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap > 0) n = std::min(n, std::size_t(cap));
    } catch (const std::exception&) {
      throw ConfigError("LASSOFLEX_THREADS must be a positive integer");
    }
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

int cmd_train(const TrainFlags& tf, std::ostream& out, std::ostream& err) {
  const std::string started = utc_now();
  const ordered_json cfg = resolve_train(tf);
  std::vector<std::uint64_t> seeds;
  for (const auto& s : cfg.at("seeds")) seeds.push_back(s.get<std::uint64_t>());
  if (seeds.empty()) throw ConfigError("--seeds is empty");
  for (const auto& s : seeds) train_config_of(cfg, s);

  const PreparedRun pr = prepare_run(cfg);
  const fs::path out_dir = cfg.at("out").get<std::string>();
  fs::create_directories(out_dir);

  std::vector<ordered_json> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= seeds.size()) return;
        i = next++;
      }
      try {
        results[i] = run_seed(cfg, pr, seeds[i], out_dir / ("seed-" + std::to_string(seeds[i])));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = worker_count(cfg, seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["tool"] = kToolName;
  manifest["version"] = kToolVersion;
  manifest["config"] = cfg;
  manifest["seeds"] = seeds;
  ordered_json art = ordered_json::object();
  for (auto s : seeds) {
    const fs::path d = out_dir / ("seed-" + std::to_string(s));
    art[std::to_string(s)] = {{"report", (d / "report.jsonl").string()},
                              {"summary", (d / "summary.json").string()},
                              {"importance", (d / "importance.csv").string()},
                              {"checkpoint", (d / "checkpoint.json").string()}};
  }
  manifest["artifacts"] = art;
  manifest["started_at"] = started;
  manifest["finished_at"] = utc_now();
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  if (tf.json_out) {
    out << ordered_json(results).dump(2) << "\n";
  } else {
    for (const auto& r : results) {
      out << "seed " << r["seed"] << ": best_val " << r["best_val"] << " (" << r["best_id"].get<std::string>()
          << "), active " << r["metrics"]["active_features"];
      if (r["metrics"].contains("test_rmse")) out << ", test_rmse " << r["metrics"]["test_rmse"];
      if (r["metrics"].contains("test_accuracy")) out << ", test_accuracy " << r["metrics"]["test_accuracy"];
      out << "\n";
    }
    out << "manifest: " << (out_dir / "manifest.json").string() << "\n";
  }
  err << "trained " << seeds.size() << " run(s) on " << nthreads << " thread(s)\n";
  return kOk;
}

// ---- synth -------------------------------------------------------------------

struct SynthTargetedFlags {
  std::size_t d = 20, support = 5, n = 5000;
  std::string indices;
  double alpha = 0.0, gamma = 0.1;
  std::uint64_t seed = 0;
  std::string out = "targeted";
};

int cmd_synth_targeted(const SynthTargetedFlags& f, std::ostream& out) {
  std::vector<std::size_t> support;
  if (!f.indices.empty()) {
    for (auto v : parse_int_list(f.indices, "--support-indices")) {
      if (v < 0) throw ConfigError("--support-indices must be non-negative");
      support.push_back(std::size_t(v));
    }
  } else {
    if (f.support > f.d) throw ConfigError("--support exceeds --d");
    std::vector<std::size_t> all(f.d);
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(f.seed ^ 0x5eed5eedULL);
    std::shuffle(all.begin(), all.end(), rng);
    support.assign(all.begin(), all.begin() + std::ptrdiff_t(f.support));
    std::sort(support.begin(), support.end());
  }
  auto s = train::synth_targeted(f.d, support, f.alpha, f.gamma, f.n, f.seed);
  const std::string csv = f.out + ".csv", truth = f.out + ".truth.json";
  write_file(csv, data::to_csv(s.dataset));
  ordered_json t = s.truth.to_json();
  t["d"] = f.d;
  t["n"] = f.n;
  t["target"] = s.dataset.target_name;
  write_file(truth, t.dump(2) + "\n");
  out << csv << "\n" << truth << "\n";
  return kOk;
}

struct SynthNoiseFlags {
  std::string data, target, kind = "random", out = "noisy";
  double fraction = 0.5;
  std::uint64_t seed = 0;
};

int cmd_synth_noise(const SynthNoiseFlags& f, std::ostream& out) {
  if (!(f.fraction >= 0.0 && f.fraction < 1.0)) throw ConfigError("--fraction must lie in [0, 1)");
  data::NoiseKind kind;
  if (f.kind == "random")
    kind = data::NoiseKind::Random;
  else if (f.kind == "second-order")
    kind = data::NoiseKind::SecondOrder;
  else
    throw ConfigError("--kind must be random or second-order");
  auto ds = data::load_csv(f.data, f.target);
  data::inject_noise_features(ds, f.fraction, kind, f.seed);
  const std::string csv = f.out + ".csv", side = f.out + ".sidecar.json";
  write_file(csv, data::to_csv(ds));
  write_file(side, data::sidecar_json(ds).dump(2) + "\n");
  out << csv << "\n" << side << "\n";
  return kOk;
}

// ---- prox-check, ntk-demo, path -----------------------------------------------

struct ProxCheckFlags {
  std::string op = "hier";
  std::size_t n = 200;
  std::uint64_t seed = 0;
  double tol = 1e-5;
};

int cmd_prox_check(const ProxCheckFlags& f, std::ostream& out, std::ostream& err) {
  const auto& ops = oracle::suite_ops();
  if (f.op != "all" && std::find(ops.begin(), ops.end(), f.op) == ops.end())
    throw ConfigError("--op must be one of all, soft, hier, seq, seq-ema, convex, adam");
  std::vector<std::string> run = f.op == "all" ? ops : std::vector<std::string>{f.op};
  ordered_json reports = ordered_json::array();
  bool ok = true;
  for (const auto& op : run) {
    const auto r = oracle::run_suite(op, f.n, f.seed);
    auto j = r.to_json();
    const bool pass = r.max_objective_gap <= f.tol && r.feasibility_violations == 0 && r.nonexpansive_violations == 0;
    j["tolerance"] = f.tol;
    j["pass"] = pass;
    ok = ok && pass;
    reports.push_back(j);
    if (!pass) err << op << ": oracle check failed\n";
  }
  out << (run.size() == 1 ? reports[0] : reports).dump(2) << "\n";
  return ok ? kOk : kNumeric;
}

int cmd_ntk_demo(bool as_json, bool sweep, std::ostream& out) {
  const auto w = analysis::rotation_witness();
  std::optional<analysis::SlopeSweep> s;
  if (sweep) s = analysis::slope_sweep(enc::ple_from_edges({0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0}), 4);
  if (as_json) {
    ordered_json j = w.to_json();
    if (s) j["slope_sweep"] = s->to_json();
    out << j.dump(2) << "\n";
    return kOk;
  }
  auto row = [&](const Eigen::Matrix2d& m, int r) {
    out << "  [" << std::fixed << std::setprecision(4) << m(r, 0) << ", " << m(r, 1) << "]\n";
  };
  out << "Gram (original inputs):\n";
  row(w.gram, 0);
  row(w.gram, 1);
  out << "Gram (inputs rotated by 45 degrees):\n";
  row(w.gram_rotated, 0);
  row(w.gram_rotated, 1);
  out << "prediction f(x1)      = " << std::setprecision(4) << w.prediction << "\n";
  out << "prediction f'(M x1)   = " << w.prediction_rotated << "\n";
  if (s) {
    out << "slope kernel sweep: " << s->bins << " bins, " << s->pairs << " pairs, " << s->cross_bin_nonzero
        << " nonzero of " << s->cross_bin_pairs << " cross-bin pairs, same-bin max error "
        << std::setprecision(3) << std::scientific << s->same_bin_max_error << "\n";
  }
  return kOk;
}

struct PathFlags {
  double start = 1e-2, multiplier = 1e3, power = 0.95;
  std::optional<double> end;
  std::size_t size = 20;
  bool json_out = false;
};

int cmd_path(const PathFlags& f, std::ostream& out) {
  train::LambdaPathConfig c;
  c.lambda_start = f.start;
  c.lambda_end = f.end;
  c.multiplier = f.multiplier;
  c.size = f.size;
  c.power = f.power;
  const auto p = train::build_lambda_path(c);
  if (f.json_out) {
    ordered_json j;
    j["schema_version"] = 1;
    j["lambda_start"] = p.lambda_start;
    j["lambda_end"] = p.lambda_end;
    j["power"] = p.power;
    j["values"] = p.values;
    out << j.dump() << "\n";
  } else {
    out << std::setprecision(17);
    for (double v : p.values) out << v << "\n";
  }
  return kOk;
}

}  // namespace

ordered_json train_defaults(const std::string& model) {
  if (model != "lassoflexnet" && model != "lassonet")
    throw ConfigError("--model must be lassoflexnet or lassonet");
  const FlexConfig fc;
  train::TrainConfig tc = model == "lassonet" ? lassonet_defaults() : train::TrainConfig{};
  ordered_json j;
  j["data"] = "";
  j["target"] = "";
  j["sidecar"] = "";
  j["task"] = "auto";
  j["class_cap"] = std::size_t(10);
  j["drop_incomplete"] = false;
  j["model"] = model;
  j["split_mode"] = "random";
  j["time_column"] = "";
  j["train_frac"] = 0.65;
  j["val_frac"] = 0.15;
  j["test_frac"] = 0.20;
  j["split_seed"] = std::size_t(0);
  j["bins"] = std::size_t(8);
  j["breakpoints"] = "quantile";
  j["embed"] = fc.embed;
  j["pfe_depth"] = fc.pfe_depth;
  j["mixer_blocks"] = fc.mixer_blocks;
  j["hidden"] = fc.hidden;
  j["token_hidden"] = fc.token_hidden;
  j["channel_hidden"] = fc.channel_hidden;
  j["dropout"] = fc.dropout;
  j["pfe_dropout"] = fc.pfe_dropout;
  j["gate_pfe"] = fc.gate_pfe;
  j["tau"] = fc.tau;
  auto t = tc.to_json();
  t.erase("seed");
  for (auto& [k, v] : t.items()) j[k] = v;
  j["seeds"] = ordered_json::array({0});
  j["threads"] = std::size_t(0);
  j["out"] = "runs";
  return j;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature-selecting tabular networks: training, synthetic data, prox verification and kernel demos",
               kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "pretrain then walk the lambda path; writes artifacts");
  register_train(*train_cmd, tf);

  auto* synth = app.add_subcommand("synth", "write synthetic datasets");
  synth->require_subcommand(1);
  SynthTargetedFlags stf;
  auto* targeted = synth->add_subcommand("targeted", "y = beta*^T x + alpha NN(x) + gamma eps");
  targeted->add_option("--d", stf.d, "number of features");
  targeted->add_option("--support", stf.support, "number of relevant features (chosen by the seed)");
  targeted->add_option("--support-indices", stf.indices, "explicit comma-separated relevant feature indices");
  targeted->add_option("--alpha", stf.alpha, "weight of the random network term");
  targeted->add_option("--gamma", stf.gamma, "noise standard deviation");
  targeted->add_option("--n", stf.n, "rows");
  targeted->add_option("--seed", stf.seed, "seed");
  targeted->add_option("--out", stf.out, "output prefix (writes <out>.csv and <out>.truth.json)");
  SynthNoiseFlags snf;
  auto* noise = synth->add_subcommand("noise", "append extraneous feature columns to a CSV");
  noise->add_option("--data", snf.data, "input CSV")->required();
  noise->add_option("--target", snf.target, "target column")->required();
  noise->add_option("--fraction", snf.fraction, "fraction of extraneous columns in the output");
  noise->add_option("--kind", snf.kind, "random or second-order");
  noise->add_option("--seed", snf.seed, "seed");
  noise->add_option("--out", snf.out, "output prefix (writes <out>.csv and <out>.sidecar.json)");

  ProxCheckFlags pcf;
  auto* pc = app.add_subcommand("prox-check", "compare proximal operators against brute-force oracles");
  pc->add_option("--op", pcf.op, "all, soft, hier, seq, seq-ema, convex or adam");
  pc->add_option("--n", pcf.n, "random instances");
  pc->add_option("--seed", pcf.seed, "seed");
  pc->add_option("--tol", pcf.tol, "largest accepted objective gap");
  pc->add_flag("--json", "reports are always JSON; accepted for symmetry");

  bool ntk_json = false, ntk_sweep = false;
  auto* ntk = app.add_subcommand("ntk-demo", "rotation example for kernel ridge on PLE features");
  ntk->add_flag("--json", ntk_json, "print JSON instead of text");
  ntk->add_flag("--slope-sweep", ntk_sweep, "add the bin-pair slope kernel sweep");

  PathFlags pf;
  double path_end = 0.0;
  auto* path = app.add_subcommand("path", "print the lambda schedule");
  path->add_option("--lambda-start", pf.start, "first lambda");
  auto* end_opt = path->add_option("--lambda-end", path_end, "last lambda (default: start * multiplier)");
  path->add_option("--multiplier", pf.multiplier, "last / first when --lambda-end is absent");
  path->add_option("--size", pf.size, "number of values");
  path->add_option("--power", pf.power, "exponent p in (0, 1]");
  path->add_flag("--json", pf.json_out, "print JSON");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::Success& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      app.exit(e, out, err);
      return kConfig;
    }
    if (*train_cmd) return cmd_train(tf, out, err);
    if (*targeted) return cmd_synth_targeted(stf, out);
    if (*noise) return cmd_synth_noise(snf, out);
    if (*pc) return cmd_prox_check(pcf, out, err);
    if (*ntk) return cmd_ntk_demo(ntk_json, ntk_sweep, out);
    if (*path) {
      if (end_opt->count()) pf.end = path_end;
      return cmd_path(pf, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const EncodingError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed configuration value (" << e.what() << ")\n";
    return kConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv = {kToolName};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(int(argv.size()), argv.data(), out, err);
}

}  // namespace lfn::cli
