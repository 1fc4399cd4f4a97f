#include "zrnmt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "zrnmt/beam.hpp"
#include "zrnmt/rng.hpp"

namespace zrnmt {

namespace {

template <class Stepper>
Sentence top_hypothesis(const Stepper& stepper, int beam, int t_max) {
  BeamConfig cfg;
  cfg.beam_size = beam;
  cfg.t_max = t_max;
  std::vector<Hypothesis> hyps = beam_search(stepper, cfg);
  if (hyps.empty()) throw std::runtime_error("beam search returned no hypotheses");
  return hyps[0].sentence;
}

}  // namespace

Sentence decode_caption(const Captioner& model, const ParamStore& store, const FeatureGrid& z,
                        int beam) {
  return top_hypothesis(model.stepper(store, z), beam, model.config().t_max);
}

Sentence decode_translation(const Translator& model, const ParamStore& store, const Sentence& x,
                            int beam) {
  return top_hypothesis(model.stepper(store, x), beam, model.config().t_max);
}

ValidationResult validate_with(const CaptionFn& caption, const TranslateFn& translate,
                               const std::vector<Document>& d_zy_val) {
  ValidationResult out;
  std::vector<Sentence> hyps, refs;
  for (const Document& d : d_zy_val) {
    if (d.language != Language::kTarget)
      throw std::invalid_argument("validate: documents must be target-language");
    Sentence x_hat = caption(d.features);
    Sentence y_hat = translate(x_hat);
    hyps.push_back(y_hat);
    refs.push_back(d.text);
    out.decoded.emplace_back(std::move(x_hat), std::move(y_hat));
  }
  out.bleu = bleu(hyps, refs);
  return out;
}

ValidationResult validate(const Captioner& cap_model, const ParamStore& captioner,
                          const Translator& trans_model, const ParamStore& translator,
                          const std::vector<Document>& d_zy_val, int beam) {
  return validate_with(
      [&](const FeatureGrid& z) { return decode_caption(cap_model, captioner, z, beam); },
      [&](const Sentence& x) { return decode_translation(trans_model, translator, x, beam); },
      d_zy_val);
}

TranslateFn baseline_random(const std::vector<Document>& d_zy, Rng& rng) {
  if (d_zy.empty()) throw std::invalid_argument("baseline_random: empty corpus");
  // Capture the rng by reference: successive calls advance one stream, so a
  // fixed seed reproduces the whole output sequence.
  return [&d_zy, &rng](const Sentence&) {
    return d_zy[rng.below(d_zy.size())].text;
  };
}

namespace {

std::map<int, double> tfidf_vector(const std::vector<int>& toks, const std::map<int, int>& df,
                                   int n_docs) {
  std::map<int, int> tf;
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) ++tf[toks[i]];  // skip final EOS
  std::map<int, double> vec;
  for (const auto& [tok, count] : tf) {
    const auto it = df.find(tok);
    if (it == df.end()) continue;  // unseen in the corpus: no idf, no weight
    vec[tok] = count * std::log(static_cast<double>(n_docs) / it->second);
  }
  return vec;
}

double cosine(const std::map<int, double>& a, const std::map<int, double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : a) {
    na += v * v;
    const auto it = b.find(k);
    if (it != b.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : b) nb += v * v;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> pooled_features(const FeatureGrid& g) {
  std::vector<double> v(g.dim(), 0.0);
  for (int i = 0; i < g.locations(); ++i)
    for (int j = 0; j < g.dim(); ++j) v[j] += g.values(i, j);
  for (double& x : v) x /= g.locations();
  return v;
}

double cosine_dense(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

Sentence baseline_tfidf(const Sentence& x, const std::vector<Document>& d_zx,
                        const std::vector<Document>& d_zy) {
  if (d_zx.empty() || d_zy.empty()) throw std::invalid_argument("baseline_tfidf: empty corpus");

  std::map<int, int> df;
  for (const Document& d : d_zx) {
    std::map<int, int> seen;
    for (std::size_t i = 0; i + 1 < d.text.ids.size(); ++i) seen[d.text.ids[i]] = 1;
    for (const auto& [tok, one] : seen) df[tok] += one;
  }
  const int n = static_cast<int>(d_zx.size());
  const std::map<int, double> query = tfidf_vector(x.ids, df, n);

  const Document* best_src = nullptr;
  double best_sim = -2.0;
  for (const Document& d : d_zx) {
    const double sim = cosine(query, tfidf_vector(d.text.ids, df, n));
    if (sim > best_sim || (sim == best_sim && best_src && d.image_id < best_src->image_id)) {
      best_sim = sim;
      best_src = &d;
    }
  }

  const std::vector<double> pooled = pooled_features(best_src->features);
  const Document* best_tgt = nullptr;
  best_sim = -2.0;
  for (const Document& d : d_zy) {
    const double sim = cosine_dense(pooled, pooled_features(d.features));
    if (sim > best_sim || (sim == best_sim && best_tgt && d.image_id < best_tgt->image_id)) {
      best_sim = sim;
      best_tgt = &d;
    }
  }
  return best_tgt->text;
}

namespace {

BleuReport evaluate_grouped(const std::function<std::pair<Sentence, double>(const Sentence&)>& translate_scored,
                            const std::vector<std::pair<Sentence, Sentence>>& test_pairs,
                            bool multi_ref) {
  if (test_pairs.empty()) throw std::invalid_argument("evaluate_test: empty test set");

  if (!multi_ref) {
    std::vector<Sentence> hyps, refs;
    for (const auto& [src, tgt] : test_pairs) {
      hyps.push_back(translate_scored(src).first);
      refs.push_back(tgt);
    }
    return bleu(hyps, refs);
  }

  // Multi-reference mode: sources that compare equal form one group (the
  // corpus format carries no image grouping). Each distinct source in the
  // group is translated and the highest-probability output is kept, scored
  // against all grouped references.
  std::vector<Sentence> group_keys;
  std::map<Sentence, std::size_t> group_of;
  std::vector<std::vector<Sentence>> group_refs;
  for (const auto& [src, tgt] : test_pairs) {
    auto it = group_of.find(src);
    if (it == group_of.end()) {
      it = group_of.emplace(src, group_keys.size()).first;
      group_keys.push_back(src);
      group_refs.emplace_back();
    }
    group_refs[it->second].push_back(tgt);
  }

  std::vector<Sentence> hyps;
  std::vector<std::vector<Sentence>> refs;
  for (std::size_t g = 0; g < group_keys.size(); ++g) {
    hyps.push_back(translate_scored(group_keys[g]).first);
    refs.push_back(group_refs[g]);
  }
  return bleu(hyps, refs);
}

}  // namespace

BleuReport evaluate_test(const Translator& model, const ParamStore& translator,
                         const std::vector<std::pair<Sentence, Sentence>>& test_pairs, int beam,
                         bool multi_ref) {
  return evaluate_grouped(
      [&](const Sentence& x) {
        BeamConfig cfg;
        cfg.beam_size = beam;
        cfg.t_max = model.config().t_max;
        std::vector<Hypothesis> hyps = beam_search(model.stepper(translator, x), cfg);
        return std::make_pair(hyps[0].sentence, hyps[0].score);
      },
      test_pairs, multi_ref);
}

BleuReport evaluate_test_with(const TranslateFn& translate,
                              const std::vector<std::pair<Sentence, Sentence>>& test_pairs,
                              bool multi_ref) {
  return evaluate_grouped(
      [&](const Sentence& x) { return std::make_pair(translate(x), 0.0); },
      test_pairs, multi_ref);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length series");
  const auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&v](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;  // a constant series carries no ranking signal
  return cov / std::sqrt(va * vb);
}

void write_report_csv(const std::string& path, const BleuReport& rep) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_report_csv: cannot open " + path);
  char buf[64];
  const auto fmt = [&buf](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  os << "metric,value\n";
  os << "bleu," << fmt(rep.score) << "\n";
  for (std::size_t i = 0; i < rep.precisions.size(); ++i)
    os << "p" << (i + 1) << "," << fmt(rep.precisions[i]) << "\n";
  os << "brevity_penalty," << fmt(rep.brevity_penalty) << "\n";
  os << "hyp_len," << rep.hyp_len << "\n";
  os << "ref_len," << rep.ref_len << "\n";
}

std::string report_summary(const BleuReport& rep) {
  char buf[256];
  std::string precisions;
  for (std::size_t i = 0; i < rep.precisions.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%s%.1f", i ? "/" : "", 100.0 * rep.precisions[i]);
    precisions += buf;
  }
  std::snprintf(buf, sizeof(buf), "BLEU = %.2f (%s, BP %.3f, hyp %ld, ref %ld)", rep.score,
                precisions.c_str(), rep.brevity_penalty, rep.hyp_len, rep.ref_len);
  return buf;
}

void write_decoded_pairs(const std::string& path,
                         const std::vector<std::pair<Sentence, Sentence>>& decoded,
                         const Vocab& first_vocab, const Vocab& second_vocab) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_decoded_pairs: cannot open " + path);
  const auto join = [](const std::vector<std::string>& toks) {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) out += " ";
      out += toks[i];
    }
    return out;
  };
  for (const auto& [a, b] : decoded) {
    std::vector<int> abody(a.ids.begin(), a.ids.end() - 1);
    std::vector<int> bbody(b.ids.begin(), b.ids.end() - 1);
    os << join(first_vocab.to_tokens(abody)) << "\t" << join(second_vocab.to_tokens(bbody))
       << "\n";
  }
}

}  // namespace zrnmt
