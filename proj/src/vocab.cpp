#include "zrnmt/vocab.hpp"

#include <fstream>
#include <stdexcept>

namespace zrnmt {

Sentence make_sentence(std::vector<int> body_ids, int t_max) {
  Sentence s;
  s.ids = std::move(body_ids);
  s.ids.push_back(kEosId);
  if (s.length() > t_max)
    throw std::invalid_argument("make_sentence: length " + std::to_string(s.length()) +
                                " exceeds T_max " + std::to_string(t_max));
  for (std::size_t i = 0; i + 1 < s.ids.size(); ++i) {
    if (s.ids[i] == kEosId) throw std::invalid_argument("make_sentence: interior EOS");
    if (s.ids[i] == kBosId) throw std::invalid_argument("make_sentence: interior BOS");
  }
  return s;
}

bool well_formed(const Sentence& s, int t_max, int vocab_size) {
  if (s.ids.empty() || s.length() > t_max) return false;
  if (s.ids.back() != kEosId) return false;
  for (std::size_t i = 0; i + 1 < s.ids.size(); ++i) {
    if (s.ids[i] == kEosId || s.ids[i] == kBosId) return false;
    if (s.ids[i] < 0 || s.ids[i] >= vocab_size) return false;
  }
  return true;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& content_tokens) {
  tokens_ = {"<bos>", "<eos>", "<unk>"};
  for (const auto& t : content_tokens) tokens_.push_back(t);
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!index_.emplace(tokens_[i], i).second)
      throw std::invalid_argument("Vocab: duplicate token '" + tokens_[i] + "'");
  }
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("Vocab: id " + std::to_string(id));
  return tokens_[id];
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

std::vector<int> Vocab::to_ids(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocab::to_tokens(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("Vocab: cannot write " + path);
  for (const auto& t : tokens_) out << t << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Vocab: cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.size() < 3 || lines[0] != "<bos>" || lines[1] != "<eos>" || lines[2] != "<unk>")
    throw std::runtime_error("Vocab: reserved tokens missing in " + path);
  return Vocab(std::vector<std::string>(lines.begin() + 3, lines.end()));
}

}  // namespace zrnmt
