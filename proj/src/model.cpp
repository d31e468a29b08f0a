#include "lassoflex/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "lassoflex/errors.hpp"

namespace lfn {

using nd::Parameter;
using nd::Shape;
using nd::Tape;
using nd::Tensor;
using nd::Var;

nlohmann::ordered_json FlexConfig::to_json() const {
  nlohmann::ordered_json j;
  j["features"] = features;
  j["in_width"] = in_width;
  j["embed"] = embed;
  j["pfe_depth"] = pfe_depth;
  j["mixer_blocks"] = mixer_blocks;
  j["hidden"] = hidden;
  j["token_hidden"] = token_hidden;
  j["channel_hidden"] = channel_hidden;
  j["outputs"] = outputs;
  j["tau"] = tau;
  j["M"] = M;
  j["dropout"] = dropout;
  j["pfe_dropout"] = pfe_dropout;
  j["gate_pfe"] = gate_pfe;
  j["seed"] = seed;
  return j;
}

FlexConfig FlexConfig::from_json(const nlohmann::json& j) {
  FlexConfig c;
  c.features = j.at("features");
  c.in_width = j.at("in_width");
  c.embed = j.at("embed");
  c.pfe_depth = j.at("pfe_depth");
  c.mixer_blocks = j.at("mixer_blocks");
  c.hidden = j.at("hidden");
  c.token_hidden = j.at("token_hidden");
  c.channel_hidden = j.at("channel_hidden");
  c.outputs = j.at("outputs");
  c.tau = j.at("tau");
  c.M = j.at("M");
  c.dropout = j.at("dropout");
  c.pfe_dropout = j.at("pfe_dropout");
  c.gate_pfe = j.value("gate_pfe", false);
  c.seed = j.at("seed");
  return c;
}

namespace {

Parameter uniform(std::string name, Shape s, double fan_in, std::mt19937_64& rng) {
  const double a = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t(std::move(s));
  for (auto& v : t.data()) v = u(rng);
  return Parameter(std::move(name), std::move(t));
}

Parameter filled(std::string name, Shape s, double v) { return Parameter(std::move(name), Tensor(std::move(s), v)); }

/// x [R, p] -> gelu(x W1 + b1) -> dropout -> W2 + b2
Var mlp2(Tape& t, Var x, Parameter& w1, Parameter& b1, Parameter& w2, Parameter& b2, double p, bool training,
         std::mt19937_64& rng) {
  Var h = nd::gelu(nd::add_trailing(nd::matmul(x, t.param(w1)), t.param(b1)));
  h = nd::dropout(h, p, training, rng);
  return nd::add_trailing(nd::matmul(h, t.param(w2)), t.param(b2));
}

}  // namespace

LassoFlexNet::LassoFlexNet(FlexConfig cfg) : cfg_(cfg) {
  if (cfg_.features == 0 || cfg_.in_width == 0 || cfg_.embed == 0 || cfg_.outputs == 0 || cfg_.hidden == 0)
    throw ConfigError("LassoFlexNet: features, widths and outputs must be positive");
  if (cfg_.mixer_blocks == 0) throw ConfigError("LassoFlexNet: at least the bottleneck block is required");
  if (!(cfg_.M > 0.0)) throw ConfigError("LassoFlexNet: M must be > 0");
  if (cfg_.dropout < 0.0 || cfg_.dropout >= 1.0 || cfg_.pfe_dropout < 0.0 || cfg_.pfe_dropout >= 1.0)
    throw ConfigError("LassoFlexNet: dropout must lie in [0, 1)");
  std::mt19937_64 rng(cfg_.seed);
  const std::size_t d = cfg_.features, K = cfg_.in_width, e = cfg_.embed, de = d * e;
  in_w_ = uniform("pfe.in.w", {d, K, e}, double(K), rng);
  in_b_ = uniform("pfe.in.b", {d, e}, double(K), rng);
  for (std::size_t l = 0; l < cfg_.pfe_depth; ++l) {
    const std::string p = "pfe." + std::to_string(l) + ".";
    PfeLayer L;
    L.w = uniform(p + "w", {d, e, e}, double(e), rng);
    L.b = uniform(p + "b", {d, e}, double(e), rng);
    L.ln_g = filled(p + "ln.g", {d, e}, 1.0);
    L.ln_b = filled(p + "ln.b", {d, e}, 0.0);
    pfe_.push_back(std::move(L));
  }
  bn_ = nd::BatchNormState(de);
  {
    std::normal_distribution<double> n(0.0, 1e-2);
    Tensor b({d, cfg_.outputs});
    for (auto& v : b.data()) v = n(rng);
    beta_ = Parameter("beta", std::move(b));
  }
  w1_ = uniform("mix.0.w1", {de, cfg_.hidden}, double(de), rng);
  b1_ = uniform("mix.0.b1", {cfg_.hidden}, double(de), rng);
  w2_ = uniform("mix.0.w2", {cfg_.hidden, de}, double(cfg_.hidden), rng);
  b2_ = uniform("mix.0.b2", {de}, double(cfg_.hidden), rng);
  for (std::size_t k = 1; k < cfg_.mixer_blocks; ++k) {
    const std::string p = "mix." + std::to_string(k) + ".";
    const std::size_t th = cfg_.token_hidden, ch = cfg_.channel_hidden;
    MixerBlock B;
    B.tok_ln_g = filled(p + "tok.ln.g", {e}, 1.0);
    B.tok_ln_b = filled(p + "tok.ln.b", {e}, 0.0);
    B.tok_w1 = uniform(p + "tok.w1", {d, th}, double(d), rng);
    B.tok_b1 = uniform(p + "tok.b1", {th}, double(d), rng);
    B.tok_w2 = uniform(p + "tok.w2", {th, d}, double(th), rng);
    B.tok_b2 = uniform(p + "tok.b2", {d}, double(th), rng);
    B.ch_ln_g = filled(p + "ch.ln.g", {e}, 1.0);
    B.ch_ln_b = filled(p + "ch.ln.b", {e}, 0.0);
    B.ch_w1 = uniform(p + "ch.w1", {e, ch}, double(e), rng);
    B.ch_b1 = uniform(p + "ch.b1", {ch}, double(e), rng);
    B.ch_w2 = uniform(p + "ch.w2", {ch, e}, double(ch), rng);
    B.ch_b2 = uniform(p + "ch.b2", {e}, double(ch), rng);
    blocks_.push_back(std::move(B));
  }
  head_w_ = uniform("head.w", {e, cfg_.outputs}, double(e), rng);
  head_b_ = uniform("head.b", {cfg_.outputs}, double(e), rng);
}

EmbeddingOut LassoFlexNet::pfe_forward(Tape& t, const Tensor& encoded, bool training, std::mt19937_64& rng) {
  const std::size_t d = cfg_.features, e = cfg_.embed;
  if (encoded.rank() != 3 || encoded.dim(1) != d || encoded.dim(2) != cfg_.in_width)
    throw ContractError("LassoFlexNet: expected encoded input [B, " + std::to_string(d) + ", " +
                        std::to_string(cfg_.in_width) + "], got " + nd::shape_str(encoded.shape()));
  const std::size_t B = encoded.dim(0);
  Var h = nd::add_trailing(nd::featurewise_matmul(t.constant(encoded), t.param(in_w_)), t.param(in_b_));
  for (auto& L : pfe_) {
    Var r = nd::relu(nd::add_trailing(nd::featurewise_matmul(h, t.param(L.w)), t.param(L.b)));
    r = nd::layernorm(r, t.param(L.ln_g), t.param(L.ln_b));
    r = nd::dropout(r, cfg_.pfe_dropout, training, rng);
    h = nd::add(h, r);
  }
  Var z = nd::reshape(nd::batchnorm_fixed(nd::reshape(h, {B, d * e}), bn_, training), {B, d, e});
  return {z, nd::mean_last(z)};
}

Var LassoFlexNet::mixer_forward(Tape& t, Var z, bool training, std::mt19937_64& rng) {
  const std::size_t d = cfg_.features, e = cfg_.embed;
  const std::size_t B = z.value().dim(0);
  // Gated bottleneck over the flattened embeddings: no LayerNorm, no residual.
  Var v = mlp2(t, nd::reshape(z, {B, d * e}), w1_, b1_, w2_, b2_, cfg_.dropout, training, rng);
  v = nd::reshape(v, {B, d, e});
  for (auto& blk : blocks_) {
    Var y = nd::layernorm(v, t.param(blk.tok_ln_g), t.param(blk.tok_ln_b));
    y = nd::reshape(nd::transpose12(y), {B * e, d});
    y = mlp2(t, y, blk.tok_w1, blk.tok_b1, blk.tok_w2, blk.tok_b2, cfg_.dropout, training, rng);
    v = nd::add(v, nd::transpose12(nd::reshape(y, {B, e, d})));

    Var c = nd::reshape(nd::layernorm(v, t.param(blk.ch_ln_g), t.param(blk.ch_ln_b)), {B * d, e});
    c = mlp2(t, c, blk.ch_w1, blk.ch_b1, blk.ch_w2, blk.ch_b2, cfg_.dropout, training, rng);
    v = nd::add(v, nd::reshape(c, {B, d, e}));
  }
  Var pooled = nd::mean_axis1(v);
  return nd::add_trailing(nd::matmul(pooled, t.param(head_w_)), t.param(head_b_));
}

Var LassoFlexNet::forward(Tape& t, const Tensor& encoded, bool training, std::mt19937_64& rng) {
  EmbeddingOut emb = pfe_forward(t, encoded, training, rng);
  Var skip = nd::matmul(emb.z_bar, t.param(beta_));
  Var deep = mixer_forward(t, emb.z, training, rng);
  return nd::add(skip, nd::scale(deep, cfg_.tau));
}

std::vector<Parameter*> LassoFlexNet::parameters() {
  std::vector<Parameter*> ps = {&in_w_, &in_b_};
  for (auto& L : pfe_) ps.insert(ps.end(), {&L.w, &L.b, &L.ln_g, &L.ln_b});
  ps.insert(ps.end(), {&beta_, &w1_, &b1_, &w2_, &b2_});
  for (auto& B : blocks_)
    ps.insert(ps.end(), {&B.tok_ln_g, &B.tok_ln_b, &B.tok_w1, &B.tok_b1, &B.tok_w2, &B.tok_b2, &B.ch_ln_g,
                         &B.ch_ln_b, &B.ch_w1, &B.ch_b1, &B.ch_w2, &B.ch_b2});
  ps.insert(ps.end(), {&head_w_, &head_b_});
  return ps;
}

std::vector<Parameter*> LassoFlexNet::gate_tensors() {
  std::vector<Parameter*> ts = {&beta_, &w1_};
  if (cfg_.gate_pfe) {
    ts.insert(ts.end(), {&in_w_, &in_b_});
    for (auto& L : pfe_) ts.insert(ts.end(), {&L.w, &L.b});
  }
  return ts;
}

std::vector<prox::GateGroup> LassoFlexNet::gate_groups() const {
  const std::size_t d = cfg_.features, e = cfg_.embed, H = cfg_.hidden, C = cfg_.outputs, K = cfg_.in_width;
  std::vector<prox::GateGroup> groups(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto& g = groups[j];
    for (std::size_t c = 0; c < C; ++c) g.theta.push_back({0, j * C + c});
    for (std::size_t r = j * e; r < (j + 1) * e; ++r)
      for (std::size_t h = 0; h < H; ++h) g.w.push_back({1, r * H + h});
    if (cfg_.gate_pfe) {
      for (std::size_t i = 0; i < K * e; ++i) g.w.push_back({2, j * K * e + i});
      for (std::size_t i = 0; i < e; ++i) g.w.push_back({3, j * e + i});
      for (std::size_t l = 0; l < pfe_.size(); ++l) {
        for (std::size_t i = 0; i < e * e; ++i) g.w.push_back({4 + 2 * l, j * e * e + i});
        for (std::size_t i = 0; i < e; ++i) g.w.push_back({5 + 2 * l, j * e + i});
      }
    }
  }
  return groups;
}

nlohmann::json LassoFlexNet::extra_state() const {
  nlohmann::json j;
  j["bn_mean"] = bn_.running_mean.vec();
  j["bn_var"] = bn_.running_var.vec();
  j["bn_initialized"] = bn_.initialized;
  return j;
}

void LassoFlexNet::set_extra_state(const nlohmann::json& j) {
  if (j.is_null()) return;
  const auto m = j.at("bn_mean").get<std::vector<double>>();
  const auto v = j.at("bn_var").get<std::vector<double>>();
  if (m.size() != bn_.running_mean.numel() || v.size() != m.size())
    throw ContractError("batchnorm state size does not match model");
  bn_.running_mean = Tensor({m.size()}, m);
  bn_.running_var = Tensor({v.size()}, v);
  bn_.initialized = j.at("bn_initialized").get<bool>();
}

// ---------------------------------------------------------------------------

Checkpoint make_checkpoint(PathModel& m, const nlohmann::ordered_json& config, const enc::PleSpec& spec) {
  Checkpoint c;
  c.model_kind = m.kind();
  c.config = config;
  c.spec = spec;
  for (auto* p : m.parameters()) c.params.emplace_back(p->name, p->value);
  c.extra = m.extra_state();
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  nlohmann::ordered_json j;
  j["magic"] = kCheckpointMagic;
  j["format_version"] = kCheckpointVersion;
  j["model"] = c.model_kind;
  j["config"] = c.config;
  j["spec"] = c.spec.to_json();
  nlohmann::ordered_json ps = nlohmann::ordered_json::array();
  for (const auto& [name, t] : c.params) {
    auto e = tensor_to_json(t);
    e["name"] = name;
    ps.push_back(std::move(e));
  }
  j["params"] = std::move(ps);
  j["extra"] = c.extra;
  nlohmann::ordered_json ema = nlohmann::ordered_json::array();
  for (const auto& t : c.ema) ema.push_back(tensor_to_json(t));
  j["ema"] = std::move(ema);
  j["meta"] = c.meta;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  if (j.value("magic", "") != std::string(kCheckpointMagic)) throw DataError(path + " is not a checkpoint");
  if (j.value("format_version", 0) != kCheckpointVersion)
    throw DataError("unsupported checkpoint version in " + path);
  Checkpoint c;
  c.model_kind = j.at("model");
  c.config = j.at("config");
  c.spec = enc::PleSpec::from_json(j.at("spec"));
  for (const auto& e : j.at("params")) c.params.emplace_back(e.at("name"), tensor_from_json(e));
  c.extra = j.at("extra");
  for (const auto& e : j.at("ema")) c.ema.push_back(tensor_from_json(e));
  c.meta = j.at("meta");
  return c;
}

void apply_checkpoint(PathModel& m, const Checkpoint& c) {
  if (c.model_kind != m.kind()) throw ContractError("checkpoint holds a " + c.model_kind + " model");
  auto ps = m.parameters();
  if (ps.size() != c.params.size()) throw ContractError("checkpoint parameter count does not match model");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i]->name != c.params[i].first || ps[i]->value.shape() != c.params[i].second.shape())
      throw ContractError("checkpoint parameter " + c.params[i].first + " does not match model");
    ps[i]->value = c.params[i].second;
  }
  m.set_extra_state(c.extra);
}

}  // namespace lfn
