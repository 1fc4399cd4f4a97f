#include "zrnmt/game.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "zrnmt/beam.hpp"
#include "zrnmt/eval.hpp"
#include "zrnmt/rng.hpp"

namespace zrnmt {

void GameConfig::validate() const {
  if (beam_k < 1) throw std::invalid_argument("GameConfig: beam_k must be >= 1");
  if (lr_captioner < 0.0 || lr_translator < 0.0)
    throw std::invalid_argument("GameConfig: learning rates must be >= 0");
  if (freeze_captioner_epochs < 0)
    throw std::invalid_argument("GameConfig: freeze_captioner_epochs must be >= 0");
  if (lambda < 0.0) throw std::invalid_argument("GameConfig: lambda must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("GameConfig: batch_size must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("GameConfig: max_epochs must be >= 0");
  if (clip_norm <= 0.0) throw std::invalid_argument("GameConfig: clip_norm must be > 0");
  if (val_beam < 1) throw std::invalid_argument("GameConfig: val_beam must be >= 1");
}

double reward(const Translator& model, const ParamStore& translator, const Sentence& y,
              const Sentence& x_mid, bool normalize) {
  const double lp = model.logprob(translator, x_mid, y);
  return normalize ? lp / static_cast<double>(y.ids.size()) : lp;
}

namespace {

std::pair<double, GradMap> caption_grad(const Captioner& model, const ParamStore& store,
                                        const FeatureGrid& z, const Sentence& x) {
  Tape tape;
  ParamBinding p(tape, store);
  Var root = model.logprob_graph(tape, p, z, x);
  tape.backward(root);
  return {tape.value(root).item(), p.grads()};
}

std::pair<double, GradMap> translate_grad(const Translator& model, const ParamStore& store,
                                          const Sentence& x, const Sentence& y) {
  Tape tape;
  ParamBinding p(tape, store);
  Var root = model.logprob_graph(tape, p, x, y);
  tape.backward(root);
  return {tape.value(root).item(), p.grads()};
}

}  // namespace

GameGradients estimate_gradients(const Captioner& cap_model, const ParamStore& captioner,
                                 const Translator& trans_model, const ParamStore& translator,
                                 const FeatureGrid& z, const Sentence& y, int k,
                                 bool need_captioner, std::vector<HypothesisTerm>* terms,
                                 bool normalize_reward) {
  if (k < 1) throw std::invalid_argument("estimate_gradients: k must be >= 1");
  BeamConfig bc;
  bc.beam_size = k;
  bc.t_max = cap_model.config().t_max;
  const std::vector<Hypothesis> hyps = beam_search(cap_model.stepper(captioner, z), bc);

  GameGradients out;
  const double inv = 1.0 / static_cast<double>(hyps.size());
  for (const Hypothesis& h : hyps) {
    auto [lp_y, trans_term] = translate_grad(trans_model, translator, h.sentence, y);
    const double r = normalize_reward ? lp_y / static_cast<double>(y.ids.size()) : lp_y;
    out.mean_reward += r * inv;
    out.samples.push_back(RewardedSample{h.sentence, r});
    grad_axpy(out.translator, inv, trans_term);

    GradMap cap_term;
    if (need_captioner) {
      cap_term = caption_grad(cap_model, captioner, z, h.sentence).second;
      grad_axpy(out.captioner, r * inv, cap_term);
    }
    if (terms)
      terms->push_back(HypothesisTerm{h.sentence, r, std::move(cap_term), std::move(trans_term)});
  }
  return out;
}

namespace {

// Shared update: batch_size target documents drive the game estimator;
// joint training adds lambda-weighted caption-MLE terms from source
// documents. game_step and both trainers funnel through here so their
// step arithmetic cannot drift apart.
void apply_update(TrainState& state, const Captioner& cap_model, const Translator& trans_model,
                  const std::vector<const Document*>& ys, const std::vector<const Document*>& xs,
                  const GameConfig& cfg, bool freeze_captioner) {
  GradMap cap_acc, trans_acc;
  double reward_sum = 0.0;
  for (const Document* doc : ys) {
    if (doc->language != Language::kTarget)
      throw std::invalid_argument("game update: documents must be target-language");
    GameGradients g = estimate_gradients(cap_model, state.captioner, trans_model,
                                         state.translator, doc->features, doc->text, cfg.beam_k,
                                         !freeze_captioner, nullptr, cfg.normalize_reward);
    reward_sum += g.mean_reward;
    grad_axpy(trans_acc, 1.0 / static_cast<double>(ys.size()), g.translator);
    if (!freeze_captioner)
      grad_axpy(cap_acc, 1.0 / static_cast<double>(ys.size()), g.captioner);
  }
  if (!freeze_captioner && cfg.lambda > 0.0) {
    for (const Document* doc : xs) {
      if (doc->language != Language::kSource)
        throw std::invalid_argument("game update: captioning documents must be source-language");
      GradMap g = caption_grad(cap_model, state.captioner, doc->features, doc->text).second;
      grad_axpy(cap_acc, cfg.lambda / static_cast<double>(xs.size()), g);
    }
  }

  clip_global_norm(trans_acc, cfg.clip_norm);
  apply_ascent(state.translator, trans_acc, cfg.lr_translator);
  if (!freeze_captioner) {
    clip_global_norm(cap_acc, cfg.clip_norm);
    apply_ascent(state.captioner, cap_acc, cfg.lr_captioner);
  }

  ++state.step;
  const double mean_reward = reward_sum / static_cast<double>(ys.size());
  state.reward_history.push_back(mean_reward);
  state.step_epoch.push_back(state.epoch);

  if (!std::isfinite(mean_reward) || !state.translator.all_finite() ||
      (!freeze_captioner && !state.captioner.all_finite()))
    throw NumericError("non-finite value at step " + std::to_string(state.step));
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle(idx, rng);
  return idx;
}

void run_validation(TrainState& state, const Captioner& cap_model, const Translator& trans_model,
                    const std::vector<Document>& d_zy_val, const GameConfig& cfg) {
  double score = 0.0;
  if (!d_zy_val.empty()) {
    score = validate(cap_model, state.captioner, trans_model, state.translator, d_zy_val,
                     cfg.val_beam)
                .bleu.score;
  }
  state.val_bleu_history.push_back(score);
  if (score > state.best_val_bleu) {
    state.best_val_bleu = score;
    state.best_epoch = state.epoch;
    state.best_captioner = state.captioner;
    state.best_translator = state.translator;
  }
}

}  // namespace

TrainState& game_step(TrainState& state, const Captioner& cap_model,
                      const Translator& trans_model, const Document& doc, const GameConfig& cfg,
                      bool freeze_captioner) {
  cfg.validate();
  apply_update(state, cap_model, trans_model, {&doc}, {}, cfg, freeze_captioner);
  return state;
}

namespace {

TrainState run_game_training(const Captioner& cap_model, const ParamStore& captioner_init,
                             const Translator& trans_model, const ParamStore& translator_init,
                             const std::vector<Document>& d_zy,
                             const std::vector<Document>* d_zx,  // null: captioner frozen forever
                             const std::vector<Document>& d_zy_val, const GameConfig& cfg,
                             const EpochHook& hook) {
  cfg.validate();
  if (d_zy.empty()) throw std::invalid_argument("game training: empty target corpus");
  if (d_zx && d_zx->empty()) throw std::invalid_argument("game training: empty source corpus");

  TrainState state;
  state.captioner = captioner_init;
  state.translator = translator_init;
  state.best_captioner = captioner_init;
  state.best_translator = translator_init;

  Rng y_rng(Rng::derive(cfg.seed, 1));
  Rng x_rng(Rng::derive(cfg.seed, 2));
  std::vector<std::size_t> x_order;
  std::size_t x_pos = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    state.epoch = epoch;
    const bool freeze = d_zx == nullptr || epoch < cfg.freeze_captioner_epochs;
    const std::vector<std::size_t> y_order = shuffled_indices(d_zy.size(), y_rng);
    if (d_zx) x_order = shuffled_indices(d_zx->size(), x_rng);

    for (std::size_t start = 0; start < y_order.size(); start += cfg.batch_size) {
      std::vector<const Document*> ys;
      for (std::size_t i = start; i < std::min(start + cfg.batch_size, y_order.size()); ++i)
        ys.push_back(&d_zy[y_order[i]]);

      std::vector<const Document*> xs;
      if (d_zx) {
        while (xs.size() < ys.size()) {
          if (x_pos >= x_order.size()) {
            x_order = shuffled_indices(d_zx->size(), x_rng);
            x_pos = 0;
          }
          xs.push_back(&(*d_zx)[x_order[x_pos++]]);
        }
      }
      apply_update(state, cap_model, trans_model, ys, xs, cfg, freeze);
    }

    run_validation(state, cap_model, trans_model, d_zy_val, cfg);
    if (hook) hook(state);
  }
  return state;
}

}  // namespace

TrainState train_pre(const Captioner& cap_model, const ParamStore& captioner_fixed,
                     const Translator& trans_model, const ParamStore& translator_init,
                     const std::vector<Document>& d_zy, const std::vector<Document>& d_zy_val,
                     const GameConfig& cfg, const EpochHook& hook) {
  return run_game_training(cap_model, captioner_fixed, trans_model, translator_init, d_zy,
                           nullptr, d_zy_val, cfg, hook);
}

TrainState train_joint(const Captioner& cap_model, const ParamStore& captioner_init,
                       const Translator& trans_model, const ParamStore& translator_init,
                       const std::vector<Document>& d_zy, const std::vector<Document>& d_zx,
                       const std::vector<Document>& d_zy_val, const GameConfig& cfg,
                       const EpochHook& hook) {
  return run_game_training(cap_model, captioner_init, trans_model, translator_init, d_zy, &d_zx,
                           d_zy_val, cfg, hook);
}

namespace {

double mean_caption_logprob(const Captioner& model, const ParamStore& store,
                            const std::vector<Document>& docs) {
  double sum = 0.0;
  for (const Document& d : docs) sum += model.logprob(store, d.features, d.text);
  return sum / static_cast<double>(docs.size());
}

}  // namespace

ParamStore pretrain_captioner(const Captioner& model, const std::vector<Document>& d_zx,
                              const GameConfig& cfg, const std::vector<Document>& held_out) {
  cfg.validate();
  if (d_zx.empty()) throw std::invalid_argument("pretrain_captioner: empty corpus");
  for (const Document& d : d_zx)
    if (d.language != Language::kSource)
      throw std::invalid_argument("pretrain_captioner: documents must be source-language");

  ParamStore store = model.init_params(cfg.seed);
  const std::vector<Document>& selection_set = held_out.empty() ? d_zx : held_out;

  ParamStore best = store;
  double best_score = mean_caption_logprob(model, store, selection_set);

  Rng order_rng(Rng::derive(cfg.seed, 11));
  long step = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(d_zx.size(), order_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      GradMap acc;
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      for (std::size_t i = start; i < end; ++i) {
        const Document& d = d_zx[order[i]];
        grad_axpy(acc, 1.0 / static_cast<double>(end - start),
                  caption_grad(model, store, d.features, d.text).second);
      }
      clip_global_norm(acc, cfg.clip_norm);
      apply_ascent(store, acc, cfg.lr_captioner);
      ++step;
      if (!store.all_finite())
        throw NumericError("non-finite captioner parameter at pretraining step " +
                           std::to_string(step));
    }
    const double score = mean_caption_logprob(model, store, selection_set);
    if (score > best_score) {
      best_score = score;
      best = store;
    }
  }
  return best;
}

ParamStore train_oracle(const Translator& model,
                        const std::vector<std::pair<Sentence, Sentence>>& pairs,
                        const GameConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("train_oracle: empty corpus");

  ParamStore store = model.init_params(cfg.seed);
  Rng order_rng(Rng::derive(cfg.seed, 12));
  long step = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(pairs.size(), order_rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      GradMap acc;
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      for (std::size_t i = start; i < end; ++i) {
        const auto& [x, y] = pairs[order[i]];
        grad_axpy(acc, 1.0 / static_cast<double>(end - start),
                  translate_grad(model, store, x, y).second);
      }
      clip_global_norm(acc, cfg.clip_norm);
      apply_ascent(store, acc, cfg.lr_translator);
      ++step;
      if (!store.all_finite())
        throw NumericError("non-finite translator parameter at oracle step " +
                           std::to_string(step));
    }
  }
  return store;
}

void write_metrics_csv(const std::string& path, const TrainState& state) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  char buf[64];
  const auto fmt = [&buf](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  os << "step,epoch,mean_reward,val_bleu\n";
  const std::size_t n = state.reward_history.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int epoch = state.step_epoch[i];
    const bool epoch_final = i + 1 == n || state.step_epoch[i + 1] != epoch;
    os << (i + 1) << "," << epoch << "," << fmt(state.reward_history[i]) << ",";
    if (epoch_final && epoch < static_cast<int>(state.val_bleu_history.size()))
      os << fmt(state.val_bleu_history[epoch]);
    os << "\n";
  }
}

}  // namespace zrnmt
