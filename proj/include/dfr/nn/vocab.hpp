#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dfr/common.hpp"

namespace dfr::nn {

// Whitespace-token vocabulary. Every whitespace-delimited chunk is one
// atomic token, so registered special markers like "[premise]" or
// "<strengthener>" tokenize to exactly one id and decoding is the exact
// inverse of encoding (single-space join).
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kCls = 4;
  static constexpr int kSep = 5;

  Vocab() {
    for (const char* s : {"<pad>", "<unk>", "<bos>", "<eos>", "<cls>", "<sep>"})
      add(s);
  }

  int add(const std::string& tok) {
    auto it = index_.find(tok);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(tok);
    index_[tok] = id;
    return id;
  }

  void add_text(const std::string& text) {
    for (const std::string& tok : whitespace_tokens(text)) add(tok);
  }

  // Ensures a marker exists as an atomic vocabulary entry.
  int register_special(const std::string& tok) { return add(tok); }

  int id_of(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& tok) const { return index_.count(tok) > 0; }

  const std::string& token(int id) const {
    return tokens_.at(static_cast<std::size_t>(id));
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const std::string& text) const {
    std::vector<int> ids;
    for (const std::string& tok : whitespace_tokens(text))
      ids.push_back(id_of(tok));
    return ids;
  }

  std::string decode(const std::vector<int>& ids) const {
    std::vector<std::string> parts;
    for (int id : ids) {
      if (id == kPad || id == kBos || id == kEos) continue;
      parts.push_back(token(id));
    }
    return join(parts, " ");
  }

  static std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    for (const std::string& p : split(normalize_ws(text), ' '))
      if (!p.empty()) out.push_back(p);
    return out;
  }

  static std::size_t count_tokens(const std::string& text) {
    return whitespace_tokens(text).size();
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace dfr::nn
