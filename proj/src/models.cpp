#include "zrnmt/models.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "zrnmt/rng.hpp"

namespace zrnmt {

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1 || attention_dim < 1)
    throw std::invalid_argument("ModelConfig: dims must be >= 1");
  if (src_vocab_size < 1 || tgt_vocab_size < 1)
    throw std::invalid_argument("ModelConfig: vocab sizes must be >= 1");
  if (t_max < 1) throw std::invalid_argument("ModelConfig: t_max must be >= 1");
  if (grid_locations < 1 || grid_dim < 1)
    throw std::invalid_argument("ModelConfig: grid dims must be >= 1");
  const int vmin = std::min(src_vocab_size, tgt_vocab_size);
  if (eos_id < 0 || eos_id >= vmin || bos_id < 0 || bos_id >= vmin)
    throw std::invalid_argument("ModelConfig: bos/eos out of vocab range");
}

Var ParamBinding::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Var v = tape_->leaf(store_->at(name));
  bound_.emplace(name, v);
  return v;
}

GradMap ParamBinding::grads() const {
  GradMap g;
  for (const auto& [name, var] : bound_) g.emplace(name, tape_->grad(var));
  return g;
}

namespace detail {

namespace {

Tensor uniform_init(int rows, int cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& x : t.v) x = rng.uniform(-0.08, 0.08);
  return t;
}

void init_gru(ParamStore& store, const std::string& pre, int in_dim, int hidden, Rng& rng) {
  const char* gates[] = {"z", "r", "n"};
  for (const char* g : gates) {
    store.create(pre + "w" + g, uniform_init(in_dim, hidden, rng));
    store.create(pre + "u" + g, uniform_init(hidden, hidden, rng));
    store.create(pre + "b" + g, Tensor(1, hidden));
  }
}

// y = x * w + b for a single row x.
Tensor row_affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  for (int j = 0; j < y.cols; ++j) y.v[j] += b.v[j];
  return y;
}

Tensor gru_apply(const GruRefs& g, const Tensor& u, const Tensor& h) {
  Tensor z = matmul(u, *g.wz);
  matmul_acc(z, h, *g.uz);
  Tensor r = matmul(u, *g.wr);
  matmul_acc(r, h, *g.ur);
  for (int j = 0; j < z.cols; ++j) {
    z.v[j] = 1.0 / (1.0 + std::exp(-(z.v[j] + g.bz->v[j])));
    r.v[j] = 1.0 / (1.0 + std::exp(-(r.v[j] + g.br->v[j])));
    r.v[j] *= h.v[j];  // r now holds r (.) h
  }
  Tensor n = matmul(u, *g.wn);
  matmul_acc(n, r, *g.un);
  Tensor out(1, z.cols);
  for (int j = 0; j < z.cols; ++j) {
    const double nj = std::tanh(n.v[j] + g.bn->v[j]);
    out.v[j] = (1.0 - z.v[j]) * h.v[j] + z.v[j] * nj;
  }
  return out;
}

void softmax_inplace(std::vector<double>& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double s = 0.0;
  for (double& v : x) {
    v = std::exp(v - mx);
    s += v;
  }
  const double inv = 1.0 / s;
  for (double& v : x) v *= inv;
}

Var gru_graph(Tape& t, ParamBinding& p, const std::string& pre, Var u, Var h) {
  Var z = t.sigmoid(t.add(t.add(t.matmul(u, p(pre + "wz")), t.matmul(h, p(pre + "uz"))), p(pre + "bz")));
  Var r = t.sigmoid(t.add(t.add(t.matmul(u, p(pre + "wr")), t.matmul(h, p(pre + "ur"))), p(pre + "br")));
  Var n = t.tanh(t.add(t.add(t.matmul(u, p(pre + "wn")), t.matmul(t.mul(r, h), p(pre + "un"))), p(pre + "bn")));
  return t.add(t.sub(h, t.mul(z, h)), t.mul(z, n));
}

}  // namespace

void init_decoder_params(ParamStore& store, const DecoderDims& d, Rng& rng) {
  const std::string& p = d.prefix;
  store.create(p + "emb", uniform_init(d.vocab, d.embed, rng));
  store.create(p + "init_w", uniform_init(d.memory, d.hidden, rng));
  store.create(p + "init_b", Tensor(1, d.hidden));
  store.create(p + "att_wm", uniform_init(d.memory, d.attn, rng));
  store.create(p + "att_wh", uniform_init(d.hidden, d.attn, rng));
  store.create(p + "att_b", Tensor(1, d.attn));
  store.create(p + "att_v", uniform_init(d.attn, 1, rng));
  init_gru(store, p + "gru_", d.embed + d.memory, d.hidden, rng);
  store.create(p + "out_w", uniform_init(d.hidden + d.memory + d.embed, d.vocab, rng));
  store.create(p + "out_b", Tensor(1, d.vocab));
}

std::size_t decoder_param_count(const DecoderDims& d) {
  const std::size_t e = d.embed, h = d.hidden, a = d.attn, m = d.memory, v = d.vocab;
  std::size_t n = v * e;                    // emb
  n += m * h + h;                           // init
  n += m * a + h * a + a + a;               // attention
  n += 3 * ((e + m) * h + h * h + h);       // gru gates
  n += (h + m + e) * v + v;                 // output layer
  return n;
}

GruRefs resolve_gru(const ParamStore& store, const std::string& pre) {
  return GruRefs{&store.at(pre + "wz"), &store.at(pre + "uz"), &store.at(pre + "bz"),
                 &store.at(pre + "wr"), &store.at(pre + "ur"), &store.at(pre + "br"),
                 &store.at(pre + "wn"), &store.at(pre + "un"), &store.at(pre + "bn")};
}

DecRefs resolve_decoder(const ParamStore& store, const std::string& p) {
  DecRefs r{&store.at(p + "emb"),    &store.at(p + "init_w"), &store.at(p + "init_b"),
            &store.at(p + "att_wm"), &store.at(p + "att_wh"), &store.at(p + "att_b"),
            &store.at(p + "att_v"),  &store.at(p + "out_w"),  &store.at(p + "out_b"),
            resolve_gru(store, p + "gru_")};
  return r;
}

DecodeSession make_session(const ParamStore& store, const DecoderDims& d, Tensor memory) {
  if (memory.cols != d.memory)
    throw std::invalid_argument("make_session: memory width " + std::to_string(memory.cols) +
                                " != " + std::to_string(d.memory));
  DecodeSession s;
  s.dims = d;
  s.refs = resolve_decoder(store, d.prefix);
  s.mproj = matmul(memory, *s.refs.att_wm);
  Tensor mean(1, memory.cols);
  for (int i = 0; i < memory.rows; ++i)
    for (int j = 0; j < memory.cols; ++j) mean.v[j] += memory(i, j);
  for (double& x : mean.v) x /= memory.rows;
  s.h0 = row_affine(mean, *s.refs.init_w, *s.refs.init_b);
  for (double& x : s.h0.v) x = std::tanh(x);
  s.memory = std::move(memory);
  return s;
}

std::vector<double> session_step(const DecodeSession& s, Tensor& h, int prev_token) {
  const DecRefs& p = s.refs;
  if (prev_token < 0 || prev_token >= s.dims.vocab)
    throw std::invalid_argument("session_step: token out of range");

  Tensor q = row_affine(h, *p.att_wh, *p.att_b);
  const int L = s.memory.rows;
  std::vector<double> scores(L);
  for (int i = 0; i < L; ++i) {
    double acc = 0.0;
    for (int a = 0; a < s.dims.attn; ++a)
      acc += std::tanh(s.mproj(i, a) + q.v[a]) * p.att_v->v[a];
    scores[i] = acc;
  }
  softmax_inplace(scores);
  Tensor c(1, s.memory.cols);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < c.cols; ++j) c.v[j] += scores[i] * s.memory(i, j);

  Tensor u(1, s.dims.embed + s.dims.memory);
  for (int j = 0; j < s.dims.embed; ++j) u.v[j] = (*p.emb)(prev_token, j);
  for (int j = 0; j < s.dims.memory; ++j) u.v[s.dims.embed + j] = c.v[j];

  h = gru_apply(p.gru, u, h);

  Tensor deep(1, s.dims.hidden + s.dims.memory + s.dims.embed);
  int k = 0;
  for (int j = 0; j < s.dims.hidden; ++j) deep.v[k++] = h.v[j];
  for (int j = 0; j < s.dims.memory; ++j) deep.v[k++] = c.v[j];
  for (int j = 0; j < s.dims.embed; ++j) deep.v[k++] = (*p.emb)(prev_token, j);
  Tensor logits = row_affine(deep, *p.out_w, *p.out_b);

  std::vector<double> probs(logits.v.begin(), logits.v.end());
  softmax_inplace(probs);
  return probs;
}

Var decoder_logprob_graph(Tape& t, ParamBinding& p, const DecoderDims& d, Var memory,
                          const std::vector<int>& ids, int bos_id, AttnTrace* attn) {
  const std::string& pre = d.prefix;
  Var mproj = t.matmul(memory, p(pre + "att_wm"));
  Var h = t.tanh(t.add(t.matmul(t.mean_rows(memory), p(pre + "init_w")), p(pre + "init_b")));

  Var total{};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int prev = i == 0 ? bos_id : ids[i - 1];
    Var q = t.add(t.matmul(h, p(pre + "att_wh")), p(pre + "att_b"));
    Var scores = t.transpose(t.matmul(t.tanh(t.add_row(mproj, q)), p(pre + "att_v")));
    Var alpha = t.softmax_rows(scores);
    if (attn) attn->push_back(t.value(alpha));
    Var c = t.matmul(alpha, memory);
    Var eprev = t.pick_row(p(pre + "emb"), prev);
    Var u = t.concat_cols(eprev, c);
    h = gru_graph(t, p, pre + "gru_", u, h);
    Var deep = t.concat_cols(t.concat_cols(h, c), eprev);
    Var logits = t.add(t.matmul(deep, p(pre + "out_w")), p(pre + "out_b"));
    Var lp = t.pick(t.log_softmax_rows(logits), 0, ids[i]);
    total = i == 0 ? lp : t.add(total, lp);
  }
  return total;
}

}  // namespace detail

namespace {

void check_ids(const std::vector<int>& ids, int vocab, int bos, int eos, int t_max,
               const char* what) {
  if (ids.empty()) throw std::invalid_argument(std::string(what) + ": empty sentence");
  if (static_cast<int>(ids.size()) > t_max)
    throw std::invalid_argument(std::string(what) + ": sentence longer than t_max");
  if (ids.back() != eos) throw std::invalid_argument(std::string(what) + ": missing final eos");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab)
      throw std::invalid_argument(std::string(what) + ": token id out of range");
    if (i + 1 < ids.size() && (ids[i] == eos || ids[i] == bos))
      throw std::invalid_argument(std::string(what) + ": reserved token inside sentence");
  }
}

void check_prefix(const std::vector<int>& prefix, int vocab, int bos, int eos, int t_max) {
  if (static_cast<int>(prefix.size()) >= t_max)
    throw std::invalid_argument("step_distribution: prefix must be shorter than t_max");
  for (int id : prefix) {
    if (id < 0 || id >= vocab) throw std::invalid_argument("step_distribution: token out of range");
    if (id == eos || id == bos)
      throw std::invalid_argument("step_distribution: reserved token in prefix");
  }
}

std::vector<double> run_prefix(const detail::DecodeSession& session, int bos,
                               const std::vector<int>& prefix) {
  Tensor h = session.h0;
  int prev = bos;
  std::vector<double> probs;
  for (std::size_t i = 0; i <= prefix.size(); ++i) {
    probs = detail::session_step(session, h, prev);
    if (i < prefix.size()) prev = prefix[i];
  }
  return probs;
}

}  // namespace

Captioner::Captioner(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  dims_ = detail::DecoderDims{cfg_.embed_dim, cfg_.hidden_dim, cfg_.attention_dim,
                              cfg_.grid_dim,  cfg_.src_vocab_size, "cap."};
}

ParamStore Captioner::init_params(std::uint64_t seed) const {
  ParamStore store(seed);
  Rng rng(seed);
  detail::init_decoder_params(store, dims_, rng);
  return store;
}

std::size_t Captioner::expected_param_count() const { return detail::decoder_param_count(dims_); }

void Captioner::check_sentence(const Sentence& x) const {
  check_ids(x.ids, cfg_.src_vocab_size, cfg_.bos_id, cfg_.eos_id, cfg_.t_max, "caption");
}

double Captioner::logprob(const ParamStore& store, const FeatureGrid& z, const Sentence& x,
                          AttnTrace* attn) const {
  Tape tape;
  ParamBinding p(tape, store);
  Var root = logprob_graph(tape, p, z, x, attn);
  return tape.value(root).item();
}

Var Captioner::logprob_graph(Tape& tape, ParamBinding& p, const FeatureGrid& z, const Sentence& x,
                             AttnTrace* attn) const {
  if (z.dim() != cfg_.grid_dim)
    throw std::invalid_argument("caption: grid depth != configured grid_dim");
  check_sentence(x);
  Var memory = tape.leaf(z.values);
  return detail::decoder_logprob_graph(tape, p, dims_, memory, x.ids, cfg_.bos_id, attn);
}

std::vector<double> Captioner::step_distribution(const ParamStore& store, const FeatureGrid& z,
                                                 const std::vector<int>& prefix) const {
  check_prefix(prefix, cfg_.src_vocab_size, cfg_.bos_id, cfg_.eos_id, cfg_.t_max);
  return run_prefix(detail::make_session(store, dims_, z.values), cfg_.bos_id, prefix);
}

SessionStepper Captioner::stepper(const ParamStore& store, const FeatureGrid& z) const {
  return SessionStepper(detail::make_session(store, dims_, z.values), cfg_.bos_id, cfg_.eos_id);
}

Translator::Translator(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  dims_ = detail::DecoderDims{cfg_.embed_dim,     cfg_.hidden_dim, cfg_.attention_dim,
                              2 * cfg_.hidden_dim, cfg_.tgt_vocab_size, "dec."};
}

ParamStore Translator::init_params(std::uint64_t seed) const {
  ParamStore store(seed);
  Rng rng(seed);
  store.create("enc.emb", detail::uniform_init(cfg_.src_vocab_size, cfg_.embed_dim, rng));
  detail::init_gru(store, "enc.fw.", cfg_.embed_dim, cfg_.hidden_dim, rng);
  detail::init_gru(store, "enc.bw.", cfg_.embed_dim, cfg_.hidden_dim, rng);
  detail::init_decoder_params(store, dims_, rng);
  return store;
}

std::size_t Translator::expected_param_count() const {
  const std::size_t e = cfg_.embed_dim, h = cfg_.hidden_dim;
  std::size_t n = static_cast<std::size_t>(cfg_.src_vocab_size) * e;
  n += 2 * 3 * (e * h + h * h + h);
  return n + detail::decoder_param_count(dims_);
}

void Translator::check_source(const Sentence& x) const {
  check_ids(x.ids, cfg_.src_vocab_size, cfg_.bos_id, cfg_.eos_id, cfg_.t_max, "translate source");
}

void Translator::check_target(const Sentence& y) const {
  check_ids(y.ids, cfg_.tgt_vocab_size, cfg_.bos_id, cfg_.eos_id, cfg_.t_max, "translate target");
}

Tensor Translator::encode(const ParamStore& store, const Sentence& x) const {
  const int m = static_cast<int>(x.ids.size());
  const int e = cfg_.embed_dim, hd = cfg_.hidden_dim;
  const Tensor& emb = store.at("enc.emb");
  const detail::GruRefs fw = detail::resolve_gru(store, "enc.fw.");
  const detail::GruRefs bw = detail::resolve_gru(store, "enc.bw.");

  std::vector<Tensor> inputs(m);
  for (int t = 0; t < m; ++t) {
    inputs[t] = Tensor(1, e);
    for (int j = 0; j < e; ++j) inputs[t].v[j] = emb(x.ids[t], j);
  }

  Tensor memory(m, 2 * hd);
  Tensor h(1, hd);
  for (int t = 0; t < m; ++t) {
    h = detail::gru_apply(fw, inputs[t], h);
    for (int j = 0; j < hd; ++j) memory(t, j) = h.v[j];
  }
  h = Tensor(1, hd);
  for (int t = m - 1; t >= 0; --t) {
    h = detail::gru_apply(bw, inputs[t], h);
    for (int j = 0; j < hd; ++j) memory(t, hd + j) = h.v[j];
  }
  return memory;
}

Var Translator::encode_graph(Tape& tape, ParamBinding& p, const Sentence& x) const {
  const int m = static_cast<int>(x.ids.size());
  std::vector<Var> inputs(m);
  for (int t = 0; t < m; ++t) inputs[t] = tape.pick_row(p("enc.emb"), x.ids[t]);

  std::vector<Var> fw(m), bw(m);
  Var h = tape.leaf(Tensor(1, cfg_.hidden_dim));
  for (int t = 0; t < m; ++t) {
    h = detail::gru_graph(tape, p, "enc.fw.", inputs[t], h);
    fw[t] = h;
  }
  h = tape.leaf(Tensor(1, cfg_.hidden_dim));
  for (int t = m - 1; t >= 0; --t) {
    h = detail::gru_graph(tape, p, "enc.bw.", inputs[t], h);
    bw[t] = h;
  }

  std::vector<Var> rows(m);
  for (int t = 0; t < m; ++t) rows[t] = tape.concat_cols(fw[t], bw[t]);
  return m == 1 ? rows[0] : tape.concat_rows(rows);
}

double Translator::logprob(const ParamStore& store, const Sentence& x, const Sentence& y,
                           AttnTrace* attn) const {
  Tape tape;
  ParamBinding p(tape, store);
  Var root = logprob_graph(tape, p, x, y, attn);
  return tape.value(root).item();
}

Var Translator::logprob_graph(Tape& tape, ParamBinding& p, const Sentence& x, const Sentence& y,
                              AttnTrace* attn) const {
  check_source(x);
  check_target(y);
  Var memory = encode_graph(tape, p, x);
  return detail::decoder_logprob_graph(tape, p, dims_, memory, y.ids, cfg_.bos_id, attn);
}

std::vector<double> Translator::step_distribution(const ParamStore& store, const Sentence& x,
                                                  const std::vector<int>& prefix) const {
  check_source(x);
  check_prefix(prefix, cfg_.tgt_vocab_size, cfg_.bos_id, cfg_.eos_id, cfg_.t_max);
  return run_prefix(detail::make_session(store, dims_, encode(store, x)), cfg_.bos_id, prefix);
}

SessionStepper Translator::stepper(const ParamStore& store, const Sentence& x) const {
  check_source(x);
  return SessionStepper(detail::make_session(store, dims_, encode(store, x)), cfg_.bos_id,
                        cfg_.eos_id);
}

}  // namespace zrnmt
