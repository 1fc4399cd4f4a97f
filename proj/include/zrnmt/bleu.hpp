#ifndef ZRNMT_BLEU_HPP
#define ZRNMT_BLEU_HPP

#include <vector>

#include "zrnmt/vocab.hpp"

namespace zrnmt {

struct BleuReport {
  double score = 0.0;  // 0..100
  std::vector<double> precisions;  // p_1..p_max_n after smoothing
  double brevity_penalty = 1.0;
  long hyp_len = 0;
  long ref_len = 0;
};

// Corpus-level BLEU with clipped n-gram counts and geometric mean over
// n <= max_n, on a 0..100 scale. The final EOS of each sentence is not
// scored. Reference length per item is the closest reference length to the
// hypothesis (ties toward the shorter). Brevity penalty exp(1 - r/c) when
// c < r. Zero precisions for n >= 2 get add-one smoothing
// (p_n = 1/(total_n + 1)); a zero p_1 keeps the score at 0.
BleuReport bleu(const std::vector<Sentence>& hyps,
                const std::vector<std::vector<Sentence>>& refs, int max_n = 4);

// Single-reference convenience wrapper.
BleuReport bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
                int max_n = 4);

}  // namespace zrnmt

#endif
