#ifndef ZRNMT_GAME_HPP
#define ZRNMT_GAME_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "zrnmt/corpus.hpp"
#include "zrnmt/models.hpp"
#include "zrnmt/params.hpp"

namespace zrnmt {

// Thrown when a gradient or parameter stops being finite.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GameConfig {
  int beam_k = 2;              // middle-sentence beam width
  double lr_captioner = 0.05;  // gamma_1
  double lr_translator = 0.1;  // gamma_2
  int freeze_captioner_epochs = 2;
  double lambda = 1.0;  // weight of the captioning term in joint training
  int batch_size = 1;   // documents per update (per side, for joint training)
  int max_epochs = 10;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;  // global-norm gradient clip, per model
  bool normalize_reward = false;  // per-token reward, off for all defaults
  int val_beam = 5;

  void validate() const;
};

struct RewardedSample {
  Sentence x_mid;
  double r = 0.0;
};

struct TrainState {
  long step = 0;
  int epoch = 0;
  ParamStore captioner;
  ParamStore translator;
  std::vector<double> reward_history;  // mean reward per update step
  std::vector<int> step_epoch;         // epoch index per update step
  std::vector<double> val_bleu_history;  // per completed epoch

  ParamStore best_captioner;
  ParamStore best_translator;
  double best_val_bleu = -1.0;
  int best_epoch = -1;
};

double reward(const Translator& model, const ParamStore& translator, const Sentence& y,
              const Sentence& x_mid, bool normalize = false);

// One per-hypothesis term of the estimator, exposed for the exactness tests.
struct HypothesisTerm {
  Sentence x_mid;
  double r = 0.0;
  GradMap captioner_grad;   // d log P(x_mid | z) / d theta1
  GradMap translator_grad;  // d log P(y | x_mid) / d theta2
};

struct GameGradients {
  GradMap captioner;   // (1/K') sum_k r_k * d log P(x_mid_k | z)
  GradMap translator;  // (1/K') sum_k d log P(y | x_mid_k)
  double mean_reward = 0.0;
  std::vector<RewardedSample> samples;
};

// Beam-averaged policy-gradient estimator. K' is the actual hypothesis
// count, min(K, reachable sentences). Pass need_captioner=false to skip the
// captioner-side work under a freeze. terms, when given, receives the
// unweighted per-hypothesis gradients.
GameGradients estimate_gradients(const Captioner& cap_model, const ParamStore& captioner,
                                 const Translator& trans_model, const ParamStore& translator,
                                 const FeatureGrid& z, const Sentence& y, int k,
                                 bool need_captioner = true,
                                 std::vector<HypothesisTerm>* terms = nullptr,
                                 bool normalize_reward = false);

// One gradient-ascent update from a single target-language document.
TrainState& game_step(TrainState& state, const Captioner& cap_model,
                      const Translator& trans_model, const Document& doc, const GameConfig& cfg,
                      bool freeze_captioner);

// MLE captioner pre-training; returns the checkpoint with the best mean
// held-out caption logprob (held_out empty: selection on d_zx itself).
ParamStore pretrain_captioner(const Captioner& model, const std::vector<Document>& d_zx,
                              const GameConfig& cfg,
                              const std::vector<Document>& held_out = {});

using EpochHook =
    std::function<void(const TrainState&)>;  // called after each epoch's validation

// Game training with the captioner permanently frozen.
TrainState train_pre(const Captioner& cap_model, const ParamStore& captioner_fixed,
                     const Translator& trans_model, const ParamStore& translator_init,
                     const std::vector<Document>& d_zy, const std::vector<Document>& d_zy_val,
                     const GameConfig& cfg, const EpochHook& hook = nullptr);

// Joint training: every update takes batch_size documents from d_zy (game
// terms) and batch_size from d_zx (lambda-weighted captioning terms); the
// captioner stays frozen for the first freeze_captioner_epochs epochs.
TrainState train_joint(const Captioner& cap_model, const ParamStore& captioner_init,
                       const Translator& trans_model, const ParamStore& translator_init,
                       const std::vector<Document>& d_zy, const std::vector<Document>& d_zx,
                       const std::vector<Document>& d_zy_val, const GameConfig& cfg,
                       const EpochHook& hook = nullptr);

// Supervised MLE on parallel pairs; the upper-bound comparison model.
ParamStore train_oracle(const Translator& model,
                        const std::vector<std::pair<Sentence, Sentence>>& pairs,
                        const GameConfig& cfg);

// Metrics CSV: one row per update step (step, epoch, mean_reward, val_bleu);
// val_bleu is filled only on each epoch's last step.
void write_metrics_csv(const std::string& path, const TrainState& state);

}  // namespace zrnmt

#endif
