#ifndef ZRNMT_BEAM_HPP
#define ZRNMT_BEAM_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "zrnmt/vocab.hpp"

namespace zrnmt {

struct BeamConfig {
  int beam_size = 1;
  int t_max = 1;
  // When set, hypotheses are ranked by score / length instead of raw score.
  // Hypothesis::score itself always stays the raw total log-probability.
  bool length_norm = false;
};

struct Hypothesis {
  Sentence sentence;
  double score = 0.0;  // total log-probability including the final EOS step
};

// Beam search over a stepper with:
//   State initial() const;
//   std::vector<double> step_probs(const State&, int prev_token, State& next) const;
//   int vocab_size() / bos_id() / eos_id() const;
//
// Retire-and-continue: every prefix's EOS extension retires to the finished
// pool at every depth, and the frontier keeps the best beam_size unfinished
// prefixes. Adding a step never raises a score, so a prefix's score bounds
// all of its completions; the search stops once beam_size finished
// hypotheses all beat the best unfinished prefix, the frontier empties, or
// depth reaches t_max (where EOS is forced, scored like any other step).
// Every returned hypothesis is therefore a well-formed sentence of length
// <= t_max. BOS is never emitted. Returned list is sorted by rank score
// descending, ties by lexicographic token ids.
template <class Stepper>
std::vector<Hypothesis> beam_search(const Stepper& model, const BeamConfig& cfg) {
  if (cfg.beam_size < 1) throw std::invalid_argument("beam_search: beam_size must be >= 1");
  if (cfg.t_max < 1) throw std::invalid_argument("beam_search: t_max must be >= 1");
  const int vocab = model.vocab_size();
  const int eos = model.eos_id();
  const int bos = model.bos_id();

  struct Item {
    typename Stepper::State state;
    std::vector<int> body;
    double score = 0.0;
  };

  const auto hyp_less = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.sentence.ids < b.sentence.ids;
  };

  std::vector<Item> frontier;
  frontier.push_back(Item{model.initial(), {}, 0.0});
  std::vector<Hypothesis> finished;

  for (int depth = 1; depth <= cfg.t_max && !frontier.empty(); ++depth) {
    if (static_cast<int>(finished.size()) >= cfg.beam_size) {
      double best_unfinished = frontier.front().score;
      for (const Item& it : frontier) best_unfinished = std::max(best_unfinished, it.score);
      if (best_unfinished < finished[cfg.beam_size - 1].score) break;
    }

    std::vector<Item> next;
    for (Item& it : frontier) {
      const int prev = it.body.empty() ? bos : it.body.back();
      typename Stepper::State advanced = it.state;
      const std::vector<double> probs = model.step_probs(it.state, prev, advanced);

      Hypothesis done;
      done.sentence.ids = it.body;
      done.sentence.ids.push_back(eos);
      done.score = it.score + std::log(probs[eos]);
      finished.push_back(std::move(done));

      if (depth == cfg.t_max) continue;  // last step: only the forced EOS
      for (int tok = 0; tok < vocab; ++tok) {
        if (tok == eos || tok == bos) continue;
        Item cand;
        cand.state = advanced;
        cand.body = it.body;
        cand.body.push_back(tok);
        cand.score = it.score + std::log(probs[tok]);
        next.push_back(std::move(cand));
      }
    }
    std::sort(finished.begin(), finished.end(), hyp_less);
    if (static_cast<int>(finished.size()) > cfg.beam_size) finished.resize(cfg.beam_size);

    std::sort(next.begin(), next.end(), [](const Item& a, const Item& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.body < b.body;
    });
    if (static_cast<int>(next.size()) > cfg.beam_size) next.resize(cfg.beam_size);
    frontier = std::move(next);
  }

  if (cfg.length_norm) {
    std::sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
      const double ra = a.score / static_cast<double>(a.sentence.ids.size());
      const double rb = b.score / static_cast<double>(b.sentence.ids.size());
      if (ra != rb) return ra > rb;
      return a.sentence.ids < b.sentence.ids;
    });
  }
  if (static_cast<int>(finished.size()) > cfg.beam_size) finished.resize(cfg.beam_size);
  return finished;
}

}  // namespace zrnmt

#endif
