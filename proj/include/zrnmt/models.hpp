#ifndef ZRNMT_MODELS_HPP
#define ZRNMT_MODELS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "zrnmt/params.hpp"
#include "zrnmt/tape.hpp"
#include "zrnmt/tensor.hpp"
#include "zrnmt/vocab.hpp"

namespace zrnmt {

// L x D feature map standing in for an image.
struct FeatureGrid {
  Tensor values;
  int locations() const { return values.rows; }
  int dim() const { return values.cols; }
};

struct ModelConfig {
  int embed_dim = 32;
  int hidden_dim = 64;
  int attention_dim = 32;
  int src_vocab_size = 3;
  int tgt_vocab_size = 3;
  int t_max = 20;
  int grid_locations = 16;  // L
  int grid_dim = 16;        // D
  int bos_id = kBosId;
  int eos_id = kEosId;

  void validate() const;
};

// Per-step attention weights, one 1 x L row per generated token.
using AttnTrace = std::vector<Tensor>;

// Binds ParamStore entries to tape leaves on demand; after backward() the
// bound leaves' gradients come back keyed by parameter name.
class ParamBinding {
public:
  ParamBinding(Tape& tape, const ParamStore& store) : tape_(&tape), store_(&store) {}

  Var operator()(const std::string& name);
  GradMap grads() const;
  const std::map<std::string, Var>& bound() const { return bound_; }

private:
  Tape* tape_;
  const ParamStore* store_;
  std::map<std::string, Var> bound_;
};

class Rng;

namespace detail {

// One attention decoder: additive attention over a memory matrix, single
// GRU layer, deep output. Shared by the captioner (memory = feature grid)
// and the translator (memory = bidirectional encoder states).
struct DecoderDims {
  int embed = 0;
  int hidden = 0;
  int attn = 0;
  int memory = 0;  // width of one memory row
  int vocab = 0;
  std::string prefix;
};

void init_decoder_params(ParamStore& store, const DecoderDims& d, Rng& rng);
std::size_t decoder_param_count(const DecoderDims& d);

struct GruRefs {
  const Tensor *wz, *uz, *bz, *wr, *ur, *br, *wn, *un, *bn;
};
struct DecRefs {
  const Tensor *emb, *init_w, *init_b, *att_wm, *att_wh, *att_b, *att_v, *out_w, *out_b;
  GruRefs gru;
};
GruRefs resolve_gru(const ParamStore& store, const std::string& prefix);
DecRefs resolve_decoder(const ParamStore& store, const std::string& prefix);

// No-grad decode state: resolved parameter pointers plus per-context
// precomputations. The tape path and this path must agree; the chain
// consistency tests pin them together.
struct DecodeSession {
  DecoderDims dims;
  DecRefs refs;
  Tensor memory;  // L x dm
  Tensor mproj;   // L x A, memory * att_wm
  Tensor h0;      // 1 x H
};

DecodeSession make_session(const ParamStore& store, const DecoderDims& d, Tensor memory);
// Returns the distribution over the next token and advances h in place.
std::vector<double> session_step(const DecodeSession& s, Tensor& h, int prev_token);

Var decoder_logprob_graph(Tape& tape, ParamBinding& p, const DecoderDims& d, Var memory,
                          const std::vector<int>& ids, int bos_id, AttnTrace* attn);

}  // namespace detail

// Beam-search adapter over a DecodeSession.
class SessionStepper {
public:
  using State = Tensor;

  SessionStepper(detail::DecodeSession session, int bos, int eos)
      : session_(std::move(session)), bos_(bos), eos_(eos) {}

  State initial() const { return session_.h0; }
  std::vector<double> step_probs(const State& h, int prev_token, State& next) const {
    next = h;
    return detail::session_step(session_, next, prev_token);
  }
  int vocab_size() const { return session_.dims.vocab; }
  int bos_id() const { return bos_; }
  int eos_id() const { return eos_; }

private:
  detail::DecodeSession session_;
  int bos_;
  int eos_;
};

// P(x | z): describes a feature grid in the source language.
class Captioner {
public:
  explicit Captioner(const ModelConfig& cfg);

  ParamStore init_params(std::uint64_t seed) const;
  std::size_t expected_param_count() const;

  double logprob(const ParamStore& store, const FeatureGrid& z, const Sentence& x,
                 AttnTrace* attn = nullptr) const;
  Var logprob_graph(Tape& tape, ParamBinding& p, const FeatureGrid& z, const Sentence& x,
                    AttnTrace* attn = nullptr) const;

  std::vector<double> step_distribution(const ParamStore& store, const FeatureGrid& z,
                                        const std::vector<int>& prefix) const;
  SessionStepper stepper(const ParamStore& store, const FeatureGrid& z) const;

  const ModelConfig& config() const { return cfg_; }

private:
  void check_sentence(const Sentence& x) const;
  ModelConfig cfg_;
  detail::DecoderDims dims_;
};

// P(y | x): translates a source sentence into the target language via a
// bidirectional GRU encoder and the shared attention decoder.
class Translator {
public:
  explicit Translator(const ModelConfig& cfg);

  ParamStore init_params(std::uint64_t seed) const;
  std::size_t expected_param_count() const;

  double logprob(const ParamStore& store, const Sentence& x, const Sentence& y,
                 AttnTrace* attn = nullptr) const;
  Var logprob_graph(Tape& tape, ParamBinding& p, const Sentence& x, const Sentence& y,
                    AttnTrace* attn = nullptr) const;

  std::vector<double> step_distribution(const ParamStore& store, const Sentence& x,
                                        const std::vector<int>& prefix) const;
  SessionStepper stepper(const ParamStore& store, const Sentence& x) const;

  const ModelConfig& config() const { return cfg_; }

private:
  void check_source(const Sentence& x) const;
  void check_target(const Sentence& y) const;
  Tensor encode(const ParamStore& store, const Sentence& x) const;
  Var encode_graph(Tape& tape, ParamBinding& p, const Sentence& x) const;

  ModelConfig cfg_;
  detail::DecoderDims dims_;
};

}  // namespace zrnmt

#endif
