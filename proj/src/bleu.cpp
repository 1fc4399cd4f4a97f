#include "zrnmt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>

namespace zrnmt {

namespace {

// Token body scored by BLEU: the sentence without its final EOS.
std::vector<int> body(const Sentence& s) {
  if (s.ids.empty()) return {};
  return std::vector<int>(s.ids.begin(), s.ids.end() - 1);
}

std::map<std::vector<int>, int> ngram_counts(const std::vector<int>& toks, int n) {
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i + n <= static_cast<int>(toks.size()); ++i)
    ++counts[std::vector<int>(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

}  // namespace

BleuReport bleu(const std::vector<Sentence>& hyps, const std::vector<std::vector<Sentence>>& refs,
                int max_n) {
  if (hyps.empty()) throw std::invalid_argument("bleu: empty hypothesis list");
  if (hyps.size() != refs.size())
    throw std::invalid_argument("bleu: hypothesis/reference count mismatch");
  if (max_n < 1) throw std::invalid_argument("bleu: max_n must be >= 1");

  std::vector<long> matched(max_n, 0), total(max_n, 0);
  long c = 0, r = 0;

  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (refs[i].empty()) throw std::invalid_argument("bleu: empty reference set");
    const std::vector<int> hyp = body(hyps[i]);
    std::vector<std::vector<int>> ref_bodies;
    for (const Sentence& s : refs[i]) ref_bodies.push_back(body(s));

    const long hlen = static_cast<long>(hyp.size());
    c += hlen;
    long best_ref = static_cast<long>(ref_bodies[0].size());
    for (const auto& rb : ref_bodies) {
      const long rlen = static_cast<long>(rb.size());
      const long d_new = std::labs(rlen - hlen), d_old = std::labs(best_ref - hlen);
      if (d_new < d_old || (d_new == d_old && rlen < best_ref)) best_ref = rlen;
    }
    r += best_ref;

    for (int n = 1; n <= max_n; ++n) {
      const auto hyp_counts = ngram_counts(hyp, n);
      std::map<std::vector<int>, int> ref_max;
      for (const auto& rb : ref_bodies)
        for (const auto& [gram, count] : ngram_counts(rb, n))
          ref_max[gram] = std::max(ref_max[gram], count);
      for (const auto& [gram, count] : hyp_counts) {
        total[n - 1] += count;
        const auto it = ref_max.find(gram);
        if (it != ref_max.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  BleuReport rep;
  rep.hyp_len = c;
  rep.ref_len = r;
  rep.precisions.resize(max_n);
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 1; n <= max_n; ++n) {
    double p;
    if (matched[n - 1] > 0) {
      p = static_cast<double>(matched[n - 1]) / static_cast<double>(total[n - 1]);
    } else if (n >= 2) {
      p = 1.0 / static_cast<double>(total[n - 1] + 1);  // add-one smoothing
    } else {
      p = 0.0;
      zero = true;
    }
    rep.precisions[n - 1] = p;
    if (p > 0.0) log_sum += std::log(p);
  }

  rep.brevity_penalty = (c > 0 && c < r) ? std::exp(1.0 - static_cast<double>(r) / c) : 1.0;
  if (c == 0 || zero) {
    rep.score = 0.0;
    if (c == 0) rep.brevity_penalty = 0.0;
  } else {
    rep.score = 100.0 * rep.brevity_penalty * std::exp(log_sum / max_n);
  }
  return rep;
}

BleuReport bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, int max_n) {
  std::vector<std::vector<Sentence>> grouped;
  grouped.reserve(refs.size());
  for (const Sentence& s : refs) grouped.push_back({s});
  return bleu(hyps, grouped, max_n);
}

}  // namespace zrnmt
