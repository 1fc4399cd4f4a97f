#include "zrnmt/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "zrnmt/corpus.hpp"
#include "zrnmt/eval.hpp"
#include "zrnmt/game.hpp"
#include "zrnmt/models.hpp"
#include "zrnmt/rng.hpp"

namespace zrnmt {

namespace {

ModelConfig make_model_config(int embed, int hidden, int attn) {
  ModelConfig m;
  m.embed_dim = embed;
  m.hidden_dim = hidden;
  m.attention_dim = attn;
  m.src_vocab_size = source_vocab().size();
  m.tgt_vocab_size = target_vocab().size();
  m.t_max = kTMax;
  m.grid_locations = kGridLocations;
  m.grid_dim = kGridDim;
  return m;
}

void log_kv(const std::string& key, const std::string& value) {
  std::cout << "config " << key << "=" << value << "\n";
}
void log_kv(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  log_kv(key, std::string(buf));
}
void log_kv(const std::string& key, long long value) { log_kv(key, std::to_string(value)); }

void log_game_config(const GameConfig& g, const ModelConfig& m) {
  log_kv("beam_k", static_cast<long long>(g.beam_k));
  log_kv("lr_captioner", g.lr_captioner);
  log_kv("lr_translator", g.lr_translator);
  log_kv("freeze_epochs", static_cast<long long>(g.freeze_captioner_epochs));
  log_kv("lambda", g.lambda);
  log_kv("batch_size", static_cast<long long>(g.batch_size));
  log_kv("max_epochs", static_cast<long long>(g.max_epochs));
  log_kv("seed", static_cast<long long>(g.seed));
  log_kv("clip_norm", g.clip_norm);
  log_kv("embed_dim", static_cast<long long>(m.embed_dim));
  log_kv("hidden_dim", static_cast<long long>(m.hidden_dim));
  log_kv("attention_dim", static_cast<long long>(m.attention_dim));
}

std::string checkpoint_path(const std::string& dir, const char* model, int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_epoch%03d.ckpt", model, epoch);
  return dir + "/" + buf;
}

struct CommonTrainFlags {
  std::string corpus_path;
  std::uint64_t seed = 0;
  int epochs = 10;
  int batch_size = 1;
  int embed = 32, hidden = 64, attn = 32;
};

void add_model_flags(CLI::App* sub, CommonTrainFlags& f) {
  sub->add_option("--embed-dim", f.embed, "Embedding width");
  sub->add_option("--hidden-dim", f.hidden, "GRU state width");
  sub->add_option("--attn-dim", f.attn, "Attention width");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Two-agent communication-game trainer for zero-resource translation"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  int gen_n = 500;
  std::uint64_t gen_seed = 0;
  double gen_sigma = kDefaultNoiseSigma;
  std::string gen_out;
  gen->add_option("--n", gen_n, "Documents per side");
  gen->add_option("--seed", gen_seed, "RNG seed")->required();
  gen->add_option("--noise-sigma", gen_sigma, "Feature noise scale");
  gen->add_option("--out", gen_out, "Corpus file to write")->required();

  // pretrain-captioner
  auto* pre = app.add_subcommand("pretrain-captioner", "MLE-pretrain the captioner");
  CommonTrainFlags pre_f;
  double pre_lr = 0.05;
  std::string pre_out;
  pre->add_option("--corpus", pre_f.corpus_path, "Corpus file")->required();
  pre->add_option("--seed", pre_f.seed, "RNG seed")->required();
  pre->add_option("--epochs", pre_f.epochs, "Training epochs");
  pre->add_option("--batch-size", pre_f.batch_size, "Documents per update");
  pre->add_option("--lr-captioner", pre_lr, "Captioner learning rate");
  pre->add_option("--out", pre_out, "Checkpoint file to write")->required();
  add_model_flags(pre, pre_f);

  // train
  auto* train = app.add_subcommand("train", "Play the communication game");
  CommonTrainFlags train_f;
  std::string train_mode, train_captioner, train_metrics, train_out_trans, train_out_cap,
      train_ckpt_dir;
  GameConfig train_g;
  train->add_option("--mode", train_mode, "pre or joint")
      ->required()
      ->check(CLI::IsMember({"pre", "joint"}));
  train->add_option("--corpus", train_f.corpus_path, "Corpus file")->required();
  train->add_option("--captioner", train_captioner, "Pretrained captioner checkpoint")->required();
  train->add_option("--seed", train_f.seed, "RNG seed")->required();
  train->add_option("--epochs", train_f.epochs, "Training epochs");
  train->add_option("--batch-size", train_f.batch_size, "Documents per update and per side");
  train->add_option("--beam-k", train_g.beam_k, "Middle-sentence beam width K");
  train->add_option("--lr-captioner", train_g.lr_captioner, "gamma_1");
  train->add_option("--lr-translator", train_g.lr_translator, "gamma_2");
  train->add_option("--lambda", train_g.lambda, "Caption-MLE weight (joint mode)");
  train->add_option("--freeze-epochs", train_g.freeze_captioner_epochs,
                    "Captioner freeze window (joint mode)");
  train->add_option("--metrics", train_metrics, "Metrics CSV to write")->required();
  train->add_option("--out-translator", train_out_trans, "Final translator checkpoint")
      ->required();
  train->add_option("--out-captioner", train_out_cap, "Final captioner checkpoint");
  train->add_option("--checkpoint-dir", train_ckpt_dir, "Per-epoch checkpoint directory");
  add_model_flags(train, train_f);

  // eval
  auto* ev = app.add_subcommand("eval", "Score a translator on the test pairs");
  std::string ev_corpus, ev_translator, ev_report, ev_pairs_out;
  int ev_beam = 5;
  bool ev_multi_ref = false;
  int ev_embed = 32, ev_hidden = 64, ev_attn = 32;
  ev->add_option("--corpus", ev_corpus, "Corpus file")->required();
  ev->add_option("--translator", ev_translator, "Translator checkpoint")->required();
  ev->add_option("--beam", ev_beam, "Beam width");
  ev->add_flag("--multi-ref", ev_multi_ref, "Group equal sources and score multi-reference");
  ev->add_option("--report", ev_report, "Report CSV to write");
  ev->add_option("--pairs-out", ev_pairs_out, "Decoded (source, hypothesis) dump");
  ev->add_option("--embed-dim", ev_embed, "Embedding width");
  ev->add_option("--hidden-dim", ev_hidden, "GRU state width");
  ev->add_option("--attn-dim", ev_attn, "Attention width");

  // baseline
  auto* base = app.add_subcommand("baseline", "Score a retrieval baseline on the test pairs");
  std::string base_kind, base_corpus, base_report;
  std::uint64_t base_seed = 0;
  base->add_option("--kind", base_kind, "random or tfidf")
      ->required()
      ->check(CLI::IsMember({"random", "tfidf"}));
  base->add_option("--corpus", base_corpus, "Corpus file")->required();
  base->add_option("--seed", base_seed, "RNG seed")->required();
  base->add_option("--report", base_report, "Report CSV to write");

  // oracle-train
  auto* oracle = app.add_subcommand("oracle-train", "MLE-train a translator on oracle pairs");
  CommonTrainFlags oracle_f;
  double oracle_lr = 0.1;
  std::string oracle_out;
  oracle->add_option("--corpus", oracle_f.corpus_path, "Corpus file")->required();
  oracle->add_option("--seed", oracle_f.seed, "RNG seed")->required();
  oracle->add_option("--epochs", oracle_f.epochs, "Training epochs");
  oracle->add_option("--batch-size", oracle_f.batch_size, "Pairs per update");
  oracle->add_option("--lr-translator", oracle_lr, "Translator learning rate");
  oracle->add_option("--out", oracle_out, "Checkpoint file to write")->required();
  add_model_flags(oracle, oracle_f);

  // export-metrics
  auto* exp = app.add_subcommand("export-metrics",
                                 "Validation and test BLEU per saved epoch checkpoint");
  std::string exp_corpus, exp_ckpt_dir, exp_out;
  int exp_beam = 5;
  int exp_embed = 32, exp_hidden = 64, exp_attn = 32;
  exp->add_option("--corpus", exp_corpus, "Corpus file")->required();
  exp->add_option("--checkpoint-dir", exp_ckpt_dir, "Directory written by train --checkpoint-dir")
      ->required();
  exp->add_option("--out", exp_out, "CSV to write (epoch, val_bleu, test_bleu)")->required();
  exp->add_option("--beam", exp_beam, "Beam width");
  exp->add_option("--embed-dim", exp_embed, "Embedding width");
  exp->add_option("--hidden-dim", exp_hidden, "GRU state width");
  exp->add_option("--attn-dim", exp_attn, "Attention width");

  std::vector<const char*> argv;
  argv.push_back("zrnmt");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      log_kv("command", std::string("gen-data"));
      log_kv("n", static_cast<long long>(gen_n));
      log_kv("seed", static_cast<long long>(gen_seed));
      log_kv("noise_sigma", gen_sigma);
      log_kv("out", gen_out);
      CorpusSplit c = make_splits(gen_n, gen_seed, gen_sigma);
      save_corpus(c, gen_out);
      std::cout << "wrote " << gen_out << " (" << c.d_zx.size() << "+" << c.d_zy.size()
                << " train docs, " << c.d_zx_val.size() << "+" << c.d_zy_val.size()
                << " val docs, " << c.test_pairs.size() << " test pairs)\n";
      return 0;
    }

    if (pre->parsed()) {
      log_kv("command", std::string("pretrain-captioner"));
      log_kv("corpus", pre_f.corpus_path);
      log_kv("seed", static_cast<long long>(pre_f.seed));
      log_kv("epochs", static_cast<long long>(pre_f.epochs));
      log_kv("batch_size", static_cast<long long>(pre_f.batch_size));
      log_kv("lr_captioner", pre_lr);
      log_kv("out", pre_out);
      const CorpusSplit c = load_corpus(pre_f.corpus_path);
      const ModelConfig mc = make_model_config(pre_f.embed, pre_f.hidden, pre_f.attn);
      const Captioner model(mc);
      GameConfig g;
      g.seed = pre_f.seed;
      g.max_epochs = pre_f.epochs;
      g.batch_size = pre_f.batch_size;
      g.lr_captioner = pre_lr;
      ParamStore best = pretrain_captioner(model, c.d_zx, g, c.d_zx_val);
      best.save(pre_out);
      std::cout << "wrote " << pre_out << "\n";
      return 0;
    }

    if (train->parsed()) {
      train_g.seed = train_f.seed;
      train_g.max_epochs = train_f.epochs;
      train_g.batch_size = train_f.batch_size;
      const ModelConfig mc = make_model_config(train_f.embed, train_f.hidden, train_f.attn);
      log_kv("command", std::string("train"));
      log_kv("mode", train_mode);
      log_kv("corpus", train_f.corpus_path);
      log_kv("captioner", train_captioner);
      log_game_config(train_g, mc);

      const CorpusSplit c = load_corpus(train_f.corpus_path);
      const Captioner cap_model(mc);
      const Translator trans_model(mc);
      const ParamStore cap0 = ParamStore::load(train_captioner);
      const ParamStore trans0 = trans_model.init_params(Rng::derive(train_g.seed, 4));

      EpochHook hook = nullptr;
      if (!train_ckpt_dir.empty()) {
        std::filesystem::create_directories(train_ckpt_dir);
        hook = [&train_ckpt_dir](const TrainState& s) {
          s.captioner.save(checkpoint_path(train_ckpt_dir, "cap", s.epoch));
          s.translator.save(checkpoint_path(train_ckpt_dir, "trans", s.epoch));
        };
      }

      TrainState state;
      if (train_mode == "pre") {
        state = train_pre(cap_model, cap0, trans_model, trans0, c.d_zy, c.d_zy_val, train_g, hook);
      } else {
        state = train_joint(cap_model, cap0, trans_model, trans0, c.d_zy, c.d_zx, c.d_zy_val,
                            train_g, hook);
      }
      write_metrics_csv(train_metrics, state);
      state.best_translator.save(train_out_trans);
      if (!train_out_cap.empty()) state.best_captioner.save(train_out_cap);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.4f", state.best_val_bleu);
      std::cout << "best val BLEU " << buf << " at epoch " << state.best_epoch << "\n";
      std::cout << "wrote " << train_metrics << " and " << train_out_trans << "\n";
      return 0;
    }

    if (ev->parsed()) {
      log_kv("command", std::string("eval"));
      log_kv("corpus", ev_corpus);
      log_kv("translator", ev_translator);
      log_kv("beam", static_cast<long long>(ev_beam));
      log_kv("multi_ref", static_cast<long long>(ev_multi_ref ? 1 : 0));
      const CorpusSplit c = load_corpus(ev_corpus);
      const ModelConfig mc = make_model_config(ev_embed, ev_hidden, ev_attn);
      const Translator model(mc);
      const ParamStore store = ParamStore::load(ev_translator);
      const BleuReport rep = evaluate_test(model, store, c.test_pairs, ev_beam, ev_multi_ref);
      if (!ev_report.empty()) write_report_csv(ev_report, rep);
      if (!ev_pairs_out.empty()) {
        std::vector<std::pair<Sentence, Sentence>> decoded;
        for (const auto& [src, tgt] : c.test_pairs)
          decoded.emplace_back(src, decode_translation(model, store, src, ev_beam));
        write_decoded_pairs(ev_pairs_out, decoded, source_vocab(), target_vocab());
      }
      std::cout << "test " << report_summary(rep) << "\n";
      return 0;
    }

    if (base->parsed()) {
      log_kv("command", std::string("baseline"));
      log_kv("kind", base_kind);
      log_kv("corpus", base_corpus);
      log_kv("seed", static_cast<long long>(base_seed));
      const CorpusSplit c = load_corpus(base_corpus);
      BleuReport rep;
      if (base_kind == "random") {
        Rng rng(base_seed);
        rep = evaluate_test_with(baseline_random(c.d_zy, rng), c.test_pairs);
      } else {
        rep = evaluate_test_with(
            [&c](const Sentence& x) { return baseline_tfidf(x, c.d_zx, c.d_zy); }, c.test_pairs);
      }
      if (!base_report.empty()) write_report_csv(base_report, rep);
      std::cout << "test " << report_summary(rep) << "\n";
      return 0;
    }

    if (oracle->parsed()) {
      log_kv("command", std::string("oracle-train"));
      log_kv("corpus", oracle_f.corpus_path);
      log_kv("seed", static_cast<long long>(oracle_f.seed));
      log_kv("epochs", static_cast<long long>(oracle_f.epochs));
      log_kv("batch_size", static_cast<long long>(oracle_f.batch_size));
      log_kv("lr_translator", oracle_lr);
      log_kv("out", oracle_out);
      const CorpusSplit c = load_corpus(oracle_f.corpus_path);
      std::vector<std::pair<Sentence, Sentence>> pairs;
      for (const Document& d : c.d_zy) pairs.emplace_back(render_source(d.scene), d.text);
      const ModelConfig mc = make_model_config(oracle_f.embed, oracle_f.hidden, oracle_f.attn);
      const Translator model(mc);
      GameConfig g;
      g.seed = oracle_f.seed;
      g.max_epochs = oracle_f.epochs;
      g.batch_size = oracle_f.batch_size;
      g.lr_translator = oracle_lr;
      ParamStore store = train_oracle(model, pairs, g);
      store.save(oracle_out);
      std::cout << "wrote " << oracle_out << "\n";
      return 0;
    }

    if (exp->parsed()) {
      log_kv("command", std::string("export-metrics"));
      log_kv("corpus", exp_corpus);
      log_kv("checkpoint_dir", exp_ckpt_dir);
      log_kv("beam", static_cast<long long>(exp_beam));
      log_kv("out", exp_out);
      const CorpusSplit c = load_corpus(exp_corpus);
      const ModelConfig mc = make_model_config(exp_embed, exp_hidden, exp_attn);
      const Captioner cap_model(mc);
      const Translator trans_model(mc);
      std::ofstream os(exp_out);
      if (!os) throw std::runtime_error("export-metrics: cannot open " + exp_out);
      os << "epoch,val_bleu,test_bleu\n";
      char buf[64];
      const auto fmt = [&buf](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
      };
      int epoch = 0;
      for (;; ++epoch) {
        const std::string cap_path = checkpoint_path(exp_ckpt_dir, "cap", epoch);
        const std::string trans_path = checkpoint_path(exp_ckpt_dir, "trans", epoch);
        if (!std::filesystem::exists(cap_path) || !std::filesystem::exists(trans_path)) break;
        const ParamStore cap = ParamStore::load(cap_path);
        const ParamStore trans = ParamStore::load(trans_path);
        const double val =
            validate(cap_model, cap, trans_model, trans, c.d_zy_val, exp_beam).bleu.score;
        const double test = evaluate_test(trans_model, trans, c.test_pairs, exp_beam).score;
        os << epoch << "," << fmt(val) << "," << fmt(test) << "\n";
      }
      if (epoch == 0)
        throw std::runtime_error("export-metrics: no checkpoints found in " + exp_ckpt_dir);
      std::cout << "wrote " << exp_out << " (" << epoch << " epochs)\n";
      return 0;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace zrnmt
