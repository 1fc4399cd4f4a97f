#ifndef ZRNMT_EVAL_HPP
#define ZRNMT_EVAL_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "zrnmt/bleu.hpp"
#include "zrnmt/corpus.hpp"
#include "zrnmt/models.hpp"
#include "zrnmt/params.hpp"

namespace zrnmt {

class Rng;

struct ValidationResult {
  BleuReport bleu;
  // One (caption, translation) pair per validation document, in input order.
  std::vector<std::pair<Sentence, Sentence>> decoded;
};

using CaptionFn = std::function<Sentence(const FeatureGrid&)>;
using TranslateFn = std::function<Sentence(const Sentence&)>;

// Zero-resource validation: image -> caption -> translation, scored against
// the document's target text. The function-based core exists so tests can
// drive the protocol with oracle decoders.
ValidationResult validate_with(const CaptionFn& caption, const TranslateFn& translate,
                               const std::vector<Document>& d_zy_val);

ValidationResult validate(const Captioner& cap_model, const ParamStore& captioner,
                          const Translator& trans_model, const ParamStore& translator,
                          const std::vector<Document>& d_zy_val, int beam = 5);

// Top beam-search decode helpers (beam >= 1, raw-score ranking).
Sentence decode_caption(const Captioner& model, const ParamStore& store, const FeatureGrid& z,
                        int beam);
Sentence decode_translation(const Translator& model, const ParamStore& store, const Sentence& x,
                            int beam);

// Returns a translation function that ignores its input and emits the text
// of a uniformly sampled target-side document.
TranslateFn baseline_random(const std::vector<Document>& d_zy, Rng& rng);

// Retrieval baseline: nearest source document by TFIDF cosine (IDF from
// d_zx), then nearest target document by cosine of location-pooled feature
// vectors; ties go to the lowest image_id.
Sentence baseline_tfidf(const Sentence& x, const std::vector<Document>& d_zx,
                        const std::vector<Document>& d_zy);

BleuReport evaluate_test(const Translator& model, const ParamStore& translator,
                         const std::vector<std::pair<Sentence, Sentence>>& test_pairs,
                         int beam = 5, bool multi_ref = false);

// Same protocol for any translation function (used for the baselines).
BleuReport evaluate_test_with(const TranslateFn& translate,
                              const std::vector<std::pair<Sentence, Sentence>>& test_pairs,
                              bool multi_ref = false);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

void write_report_csv(const std::string& path, const BleuReport& rep);
std::string report_summary(const BleuReport& rep);
void write_decoded_pairs(const std::string& path,
                         const std::vector<std::pair<Sentence, Sentence>>& decoded,
                         const Vocab& first_vocab, const Vocab& second_vocab);

}  // namespace zrnmt

#endif
