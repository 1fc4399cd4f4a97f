#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "zrnmt/beam.hpp"
#include "zrnmt/models.hpp"
#include "zrnmt/rng.hpp"
#include "test_util.hpp"

using namespace zrnmt;

namespace {

// Position-indexed stepper that puts almost all mass on one forced token per
// step, so the best hypothesis is a known chain.
struct ForcedStepper {
  using State = int;

  std::vector<int> forced;  // body tokens; EOS is forced once they run out
  int vocab = 4;

  State initial() const { return 0; }
  std::vector<double> step_probs(const State& s, int /*prev*/, State& next) const {
    next = s + 1;
    const int target = s < static_cast<int>(forced.size()) ? forced[s] : kEosId;
    std::vector<double> p(vocab, 0.01 / (vocab - 1));
    p[target] = 0.99 + 0.01 / (vocab - 1);
    double sum = 0.0;
    for (double v : p) sum += v;
    for (double& v : p) v /= sum;
    return p;
  }
  int vocab_size() const { return vocab; }
  int bos_id() const { return kBosId; }
  int eos_id() const { return kEosId; }
};

ModelConfig beam_config(int vocab, int t_max) {
  ModelConfig m;
  m.embed_dim = 2;
  m.hidden_dim = 3;
  m.attention_dim = 2;
  m.src_vocab_size = vocab;
  m.tgt_vocab_size = vocab;
  m.t_max = t_max;
  m.grid_locations = 3;
  m.grid_dim = 2;
  return m;
}

FeatureGrid random_grid(const ModelConfig& cfg, Rng& rng) {
  Tensor t(cfg.grid_locations, cfg.grid_dim);
  for (double& x : t.v) x = rng.uniform(-1.0, 1.0);
  return FeatureGrid{std::move(t)};
}

bool same_hypotheses(const std::vector<Hypothesis>& a, const std::vector<Hypothesis>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].sentence == b[i].sentence)) return false;
    if (std::fabs(a[i].score - b[i].score) > 1e-12) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("a near-deterministic chain is decoded at beam width one") {
  ForcedStepper model;
  model.forced = {2, 3, 3, 2};

  BeamConfig cfg;
  cfg.beam_size = 1;
  cfg.t_max = 8;
  const auto hyps = beam_search(model, cfg);

  REQUIRE(hyps.size() == 1);
  CHECK(hyps[0].sentence == Sentence{{2, 3, 3, 2, kEosId}});
  CHECK(std::fabs(hyps[0].score - testutil::chain_logprob(model, hyps[0].sentence)) < 1e-12);
}

TEST_CASE("three-token vocabulary at K=3 returns the exact top three") {
  // vocab {EOS, a, b} with BOS as input-only: ids 0=BOS, 1=EOS, 2, 3.
  const ModelConfig cfg = beam_config(4, 3);
  const Captioner cap(cfg);
  Rng grid_rng(100);
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const ParamStore s = cap.init_params(seed);
    const auto stepper = cap.stepper(s, random_grid(cfg, grid_rng));

    BeamConfig bc;
    bc.beam_size = 3;
    bc.t_max = cfg.t_max;
    const auto beam = beam_search(stepper, bc);
    const auto oracle = testutil::oracle_top_k(stepper, 3, cfg.t_max);

    REQUIRE(beam.size() == 3);
    CHECK(same_hypotheses(beam, oracle));
  }
}

TEST_CASE("K at or above the sentence count returns the full enumeration") {
  const ModelConfig cfg = beam_config(4, 4);
  const Captioner cap(cfg);
  const Translator trans(cfg);
  Rng grid_rng(200);
  const Sentence src{{2, 3, kEosId}};

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ParamStore cs = cap.init_params(seed);
    const auto cap_stepper = cap.stepper(cs, random_grid(cfg, grid_rng));
    const std::size_t n = testutil::sentence_count(cap_stepper, cfg.t_max);  // 15

    for (int k : {static_cast<int>(n), static_cast<int>(n) + 5}) {
      BeamConfig bc;
      bc.beam_size = k;
      bc.t_max = cfg.t_max;
      const auto beam = beam_search(cap_stepper, bc);
      const auto oracle = testutil::oracle_top_k(cap_stepper, k, cfg.t_max);
      REQUIRE(beam.size() == n);
      CHECK(same_hypotheses(beam, oracle));
    }

    const ParamStore ts = trans.init_params(seed + 70);
    const auto t_stepper = trans.stepper(ts, src);
    BeamConfig bc;
    bc.beam_size = 20;
    bc.t_max = cfg.t_max;
    CHECK(same_hypotheses(beam_search(t_stepper, bc),
                          testutil::oracle_top_k(t_stepper, 20, cfg.t_max)));
  }
}

TEST_CASE("growing K preserves the top of an admissible result") {
  const ModelConfig cfg = beam_config(4, 4);
  const Captioner cap(cfg);
  Rng grid_rng(300);
  int admissible = 0;
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const ParamStore s = cap.init_params(seed);
    const auto stepper = cap.stepper(s, random_grid(cfg, grid_rng));
    for (int k = 1; k <= 6; ++k) {
      BeamConfig bc;
      bc.t_max = cfg.t_max;
      bc.beam_size = k;
      const auto beam_k = beam_search(stepper, bc);
      if (!same_hypotheses(beam_k, testutil::oracle_top_k(stepper, k, cfg.t_max))) continue;
      ++admissible;
      bc.beam_size = k + 1;
      const auto beam_k1 = beam_search(stepper, bc);
      REQUIRE(beam_k1.size() >= beam_k.size());
      for (std::size_t j = 0; j < beam_k.size(); ++j) {
        CHECK(beam_k1[j].sentence == beam_k[j].sentence);
        CHECK(std::fabs(beam_k1[j].score - beam_k[j].score) < 1e-12);
      }
    }
  }
  CHECK(admissible > 0);  // the property must not pass vacuously
}

TEST_CASE("hypotheses are well-formed, distinct, and sorted by score") {
  const ModelConfig cfg = beam_config(6, 5);
  const Captioner cap(cfg);
  Rng grid_rng(400);
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const ParamStore s = cap.init_params(seed);
    const FeatureGrid z = random_grid(cfg, grid_rng);
    BeamConfig bc;
    bc.beam_size = 4;
    bc.t_max = cfg.t_max;
    const auto hyps = beam_search(cap.stepper(s, z), bc);

    REQUIRE(hyps.size() == 4);
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      CHECK(hyps[i].score <= 0.0);
      CHECK(well_formed(hyps[i].sentence, cfg.t_max, cfg.src_vocab_size));
      if (i > 0) CHECK(hyps[i - 1].score >= hyps[i].score);
      for (std::size_t j = i + 1; j < hyps.size(); ++j)
        CHECK_FALSE(hyps[i].sentence == hyps[j].sentence);
      // Returned score is the model's own logprob of the returned sentence.
      CHECK(std::fabs(hyps[i].score - cap.logprob(s, z, hyps[i].sentence)) < 1e-10);
    }
  }
}

TEST_CASE("translator beam scores match translate logprob") {
  const ModelConfig cfg = beam_config(5, 5);
  const Translator trans(cfg);
  const Sentence x{{2, 4, 3, kEosId}};
  for (std::uint64_t seed = 3; seed <= 6; ++seed) {
    const ParamStore s = trans.init_params(seed);
    BeamConfig bc;
    bc.beam_size = 5;
    bc.t_max = cfg.t_max;
    for (const Hypothesis& h : beam_search(trans.stepper(s, x), bc))
      CHECK(std::fabs(h.score - trans.logprob(s, x, h.sentence)) < 1e-10);
  }
}

TEST_CASE("degenerate searches still return the EOS-only sentence") {
  {
    // No emittable content tokens: the only reachable sentence is [EOS].
    const ModelConfig cfg = beam_config(2, 4);
    const Captioner cap(cfg);
    Rng rng(7);
    const auto hyps =
        beam_search(cap.stepper(cap.init_params(1), random_grid(cfg, rng)),
                    BeamConfig{.beam_size = 3, .t_max = cfg.t_max});
    REQUIRE(hyps.size() == 1);
    CHECK(hyps[0].sentence == Sentence{{kEosId}});
  }
  {
    // t_max = 1 forces EOS at the first step.
    const ModelConfig cfg = beam_config(6, 4);
    const Captioner cap(cfg);
    Rng rng(8);
    const auto hyps = beam_search(cap.stepper(cap.init_params(2), random_grid(cfg, rng)),
                                  BeamConfig{.beam_size = 4, .t_max = 1});
    REQUIRE(hyps.size() == 1);
    CHECK(hyps[0].sentence == Sentence{{kEosId}});
  }
}

TEST_CASE("invalid beam configurations are rejected") {
  ForcedStepper model;
  CHECK_THROWS_AS(beam_search(model, BeamConfig{.beam_size = 0, .t_max = 3}),
                  std::invalid_argument);
  CHECK_THROWS_AS(beam_search(model, BeamConfig{.beam_size = 2, .t_max = 0}),
                  std::invalid_argument);
}

TEST_CASE("length normalization reranks but keeps raw scores") {
  const ModelConfig cfg = beam_config(5, 5);
  const Captioner cap(cfg);
  Rng rng(11);
  const ParamStore s = cap.init_params(4);
  const FeatureGrid z = random_grid(cfg, rng);

  BeamConfig bc;
  bc.beam_size = 6;
  bc.t_max = cfg.t_max;
  bc.length_norm = true;
  const auto hyps = beam_search(cap.stepper(s, z), bc);
  REQUIRE(hyps.size() > 1);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    CHECK(std::fabs(hyps[i].score - cap.logprob(s, z, hyps[i].sentence)) < 1e-10);
    if (i > 0) {
      const double prev = hyps[i - 1].score / hyps[i - 1].sentence.length();
      const double cur = hyps[i].score / hyps[i].sentence.length();
      CHECK(prev >= cur);
    }
  }
}
