#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace dfr {

// A surface token with character offsets into the original sentence.
struct Token {
  std::string text;
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // exclusive

  bool operator==(const Token&) const = default;
};

inline bool is_word_char(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;  // treat UTF-8 continuation as word
}

// Word tokenizer: alphanumeric runs are tokens, clitics like "'s" stay
// attached to the apostrophe ("farmer's" -> "farmer", "'s"), every other
// non-space character is its own token.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (is_word_char(c)) {
      while (i < n && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
    } else if (c == '\'' && i + 1 < n &&
               is_word_char(static_cast<unsigned char>(text[i + 1]))) {
      ++i;
      while (i < n && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;
    }
    tokens.push_back(
        {std::string(text.substr(start, i - start)), start, i});
  }
  return tokens;
}

inline std::vector<std::string> token_texts(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) out.push_back(t.text);
  return out;
}

// Rebuilds a surface string for tokens[from..to) using the original
// character range, preserving exact spacing and clitic attachment.
inline std::string surface(std::string_view original,
                           const std::vector<Token>& tokens, std::size_t from,
                           std::size_t to) {
  if (from >= to || to > tokens.size()) return {};
  return std::string(
      original.substr(tokens[from].begin, tokens[to - 1].end - tokens[from].begin));
}

}  // namespace dfr
