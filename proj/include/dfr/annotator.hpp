#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "dfr/tokenize.hpp"

namespace dfr {

enum class PosTag {
  determiner,
  adjective,
  noun,
  verb,
  aux,
  preposition,
  pronoun,
  adverb,
  conjunction,
  possessive,
  number,
  punct,
};

struct TaggedToken {
  Token token;
  PosTag tag = PosTag::noun;
  bool finite = false;  // meaningful for verb/aux only
};

// A phrase over token indices [begin, end) with a head token index.
struct Phrase {
  enum class Kind { noun, verb };
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t head = 0;
  Kind kind = Kind::noun;
};

struct SubjectResult {
  std::string text;
  bool fallback = false;  // no finite clause subject found
};

// Rule-based tagger/chunker. Deterministic and dependency-free; the lexica
// are versioned data files.
class Annotator {
 public:
  Annotator(const std::string& stopwords_path, const std::string& verbs_path);
  static Annotator from_data_dir(const std::string& data_dir);

  bool is_stop(const std::string& word) const;

  std::vector<TaggedToken> tag(const std::string& sentence) const;

  // Maximal determiner/adjective/noun chunks.
  std::vector<Phrase> noun_phrases(const std::vector<TaggedToken>& tagged) const;
  // Verb groups (aux* verb+) extended with a directly following object NP.
  std::vector<Phrase> verb_phrases(const std::vector<TaggedToken>& tagged) const;

  // Subject NP of the main clause, including participial postmodifiers
  // ("A person wearing red and white"). Falls back to the first NP.
  SubjectResult subject_of(const std::string& sentence) const;

 private:
  bool is_verb_stem(const std::string& lower) const;

  std::unordered_set<std::string> stopwords_;
  std::unordered_set<std::string> verbs_;
};

}  // namespace dfr
