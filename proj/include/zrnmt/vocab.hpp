#ifndef ZRNMT_VOCAB_HPP
#define ZRNMT_VOCAB_HPP

#include <string>
#include <unordered_map>
#include <vector>

namespace zrnmt {

constexpr int kBosId = 0;
constexpr int kEosId = 1;
constexpr int kUnkId = 2;

// Token sequence ending in EOS. EOS appears exactly once, as the last id;
// BOS never appears (it is only fed as the first decoder input).
struct Sentence {
  std::vector<int> ids;

  int length() const { return static_cast<int>(ids.size()); }
  bool operator==(const Sentence& o) const { return ids == o.ids; }
  bool operator<(const Sentence& o) const { return ids < o.ids; }
};

// Builds a Sentence from body tokens (no EOS) and validates the invariants.
Sentence make_sentence(std::vector<int> body_ids, int t_max);
bool well_formed(const Sentence& s, int t_max, int vocab_size);

// Bijective id <-> token map with the three reserved tokens first.
class Vocab {
public:
  Vocab();
  explicit Vocab(const std::vector<std::string>& content_tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  int id(const std::string& token) const;  // kUnkId for unknown tokens
  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  std::vector<int> to_ids(const std::vector<std::string>& tokens) const;
  std::vector<std::string> to_tokens(const std::vector<int>& ids) const;

  // One token per line, line number = id, reserved tokens first.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace zrnmt

#endif
