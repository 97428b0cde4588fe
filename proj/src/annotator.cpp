#include "dfr/annotator.hpp"

#include <cctype>
#include <functional>

#include "dfr/common.hpp"

namespace dfr {

namespace {

const std::unordered_set<std::string>& determiners() {
  static const std::unordered_set<std::string> set = {
      "a",   "an", "the",  "this", "these", "those",   "some",
      "any", "no", "every", "each", "all",  "both", "another",
  };
  return set;
}

const std::unordered_set<std::string>& auxiliaries() {
  static const std::unordered_set<std::string> set = {
      "is",  "are",   "was",  "were",  "am",   "be",   "been", "being",
      "do",  "does",  "did",  "has",   "have", "had",  "will", "would",
      "can", "could", "shall", "should", "may", "might", "must",
  };
  return set;
}

const std::unordered_set<std::string>& pronouns() {
  static const std::unordered_set<std::string> set = {
      "i",   "you",  "he", "she", "it",    "we",  "they", "him",  "her",
      "them", "us",  "me", "his", "their", "its", "our",  "your", "my",
      "someone", "something", "anyone", "everyone", "nobody",
  };
  return set;
}

const std::unordered_set<std::string>& prepositions() {
  static const std::unordered_set<std::string> set = {
      "in",    "on",     "at",     "by",      "with",    "from",   "to",
      "of",    "for",    "over",   "under",   "through", "into",   "onto",
      "near",  "during", "about",  "against", "between", "behind", "above",
      "below", "across", "around", "along",   "without", "within", "before",
      "after", "down",   "up",     "off",     "out",     "toward", "towards",
  };
  return set;
}

const std::unordered_set<std::string>& conjunctions() {
  static const std::unordered_set<std::string> set = {"and", "or", "but",
                                                      "nor"};
  return set;
}

bool all_alpha(const std::string& s) {
  for (unsigned char c : s)
    if (!std::isalpha(c)) return false;
  return !s.empty();
}

bool all_digit(const std::string& s) {
  for (unsigned char c : s)
    if (!std::isdigit(c)) return false;
  return !s.empty();
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Candidate stems for an inflected form: "carrying" -> carry, "wiping" ->
// wipe, "running" -> run, "carried" -> carry.
std::vector<std::string> stem_candidates(const std::string& w,
                                         const std::string& suffix) {
  std::vector<std::string> out;
  if (!ends_with(w, suffix)) return out;
  std::string stem = w.substr(0, w.size() - suffix.size());
  if (stem.size() < 2) return out;
  out.push_back(stem);
  out.push_back(stem + "e");
  if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2])
    out.push_back(stem.substr(0, stem.size() - 1));
  if (stem.back() == 'i') out.push_back(stem.substr(0, stem.size() - 1) + "y");
  return out;
}

struct WordTag {
  PosTag tag = PosTag::noun;
  bool finite = false;
  bool derived_s = false;    // verb reading came from an -s inflection
  bool derived_ing = false;  // verb reading came from an -ing inflection
};

}  // namespace

Annotator::Annotator(const std::string& stopwords_path,
                     const std::string& verbs_path) {
  for (const std::string& line : read_lines(stopwords_path)) {
    std::string w = normalize_ws(line);
    if (w.empty() || w[0] == '#') continue;
    stopwords_.insert(lowercase(w));
  }
  for (const std::string& line : read_lines(verbs_path)) {
    std::string w = normalize_ws(line);
    if (w.empty() || w[0] == '#') continue;
    verbs_.insert(lowercase(w));
  }
}

Annotator Annotator::from_data_dir(const std::string& data_dir) {
  return Annotator(data_dir + "/stopwords.txt", data_dir + "/verbs.txt");
}

bool Annotator::is_stop(const std::string& word) const {
  return stopwords_.count(lowercase(word)) > 0;
}

bool Annotator::is_verb_stem(const std::string& lower) const {
  return verbs_.count(lower) > 0;
}

namespace {

WordTag classify(const std::string& w,
                 const std::function<bool(const std::string&)>& is_verb) {
  WordTag t;
  if (w == "'s" || w == "'") {
    t.tag = PosTag::possessive;
    return t;
  }
  if (all_digit(w)) {
    t.tag = PosTag::number;
    return t;
  }
  if (!all_alpha(w)) {
    t.tag = PosTag::punct;
    return t;
  }
  if (determiners().count(w)) {
    t.tag = PosTag::determiner;
    return t;
  }
  if (auxiliaries().count(w)) {
    t.tag = PosTag::aux;
    t.finite = (w != "be" && w != "been" && w != "being");
    return t;
  }
  if (pronouns().count(w)) {
    t.tag = PosTag::pronoun;
    return t;
  }
  if (prepositions().count(w)) {
    t.tag = PosTag::preposition;
    return t;
  }
  if (conjunctions().count(w)) {
    t.tag = PosTag::conjunction;
    return t;
  }
  if (is_verb(w)) {
    t.tag = PosTag::verb;
    t.finite = true;  // base form: imperative or plural-agreement finite
    return t;
  }
  if (ends_with(w, "ing")) {
    for (const auto& s : stem_candidates(w, "ing"))
      if (is_verb(s)) {
        t.tag = PosTag::verb;
        t.derived_ing = true;
        return t;
      }
  }
  if (ends_with(w, "ed")) {
    for (const auto& s : stem_candidates(w, "ed"))
      if (is_verb(s)) {
        t.tag = PosTag::verb;
        t.finite = true;
        return t;
      }
  }
  if (ends_with(w, "s") && !ends_with(w, "ss")) {
    for (const auto& s : stem_candidates(w, "s"))
      if (is_verb(s)) {
        t.tag = PosTag::verb;
        t.finite = true;
        t.derived_s = true;
        return t;
      }
  }
  if (ends_with(w, "ly") && w.size() > 4) {
    t.tag = PosTag::adverb;
    return t;
  }
  t.tag = PosTag::noun;  // open-class default; adjectives chunk like nouns
  return t;
}

}  // namespace

std::vector<TaggedToken> Annotator::tag(const std::string& sentence) const {
  std::vector<Token> tokens = tokenize(sentence);
  std::vector<WordTag> raw;
  raw.reserve(tokens.size());
  auto is_verb = [this](const std::string& w) { return is_verb_stem(w); };
  for (const Token& tok : tokens) raw.push_back(classify(lowercase(tok.text), is_verb));

  // Contextual repair of noun/verb ambiguity, left to right:
  //  - "-s" verb reading in a noun-modifier slot becomes a noun once the
  //    clause already has its finite verb ("shopping bags", "wiping tears"),
  //    or directly after a determiner/adjective/possessive ("the tears").
  //  - "-ing" verb reading after another verb is a gerund/compound modifier
  //    ("carrying shopping"), not a participle.
  bool finite_seen = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    WordTag& t = raw[i];
    PosTag prev = i > 0 ? raw[i - 1].tag : PosTag::punct;
    if (t.tag == PosTag::verb && t.derived_s) {
      bool modifier_slot = prev == PosTag::determiner ||
                           prev == PosTag::adjective ||
                           prev == PosTag::possessive;
      bool post_verbal = (prev == PosTag::verb || prev == PosTag::noun) &&
                         finite_seen;
      if (modifier_slot || post_verbal) {
        t.tag = PosTag::noun;
        t.finite = false;
      }
    } else if (t.tag == PosTag::verb && t.derived_ing) {
      if (prev == PosTag::verb || prev == PosTag::determiner) {
        t.tag = PosTag::noun;
        t.finite = false;
      }
    }
    if ((t.tag == PosTag::verb || t.tag == PosTag::aux) && t.finite)
      finite_seen = true;
  }

  std::vector<TaggedToken> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    out.push_back({tokens[i], raw[i].tag, raw[i].finite});
  return out;
}

std::vector<Phrase> Annotator::noun_phrases(
    const std::vector<TaggedToken>& tagged) const {
  auto in_np = [](PosTag t) {
    return t == PosTag::determiner || t == PosTag::adjective ||
           t == PosTag::noun || t == PosTag::number ||
           t == PosTag::possessive || t == PosTag::adverb;
  };
  std::vector<Phrase> out;
  std::size_t i = 0;
  const std::size_t n = tagged.size();
  while (i < n) {
    if (!in_np(tagged[i].tag) || tagged[i].tag == PosTag::possessive ||
        tagged[i].tag == PosTag::adverb) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && in_np(tagged[j].tag)) ++j;
    while (j > i && tagged[j - 1].tag != PosTag::noun &&
           tagged[j - 1].tag != PosTag::number)
      --j;  // a chunk ends at its head
    bool has_noun = false;
    for (std::size_t k = i; k < j; ++k)
      if (tagged[k].tag == PosTag::noun) has_noun = true;
    if (has_noun) {
      Phrase p;
      p.begin = i;
      p.end = j;
      p.kind = Phrase::Kind::noun;
      p.head = j - 1;
      for (std::size_t k = j; k-- > i;)
        if (tagged[k].tag == PosTag::noun) {
          p.head = k;
          break;
        }
      out.push_back(p);
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

std::vector<Phrase> Annotator::verb_phrases(
    const std::vector<TaggedToken>& tagged) const {
  std::vector<Phrase> groups;
  std::size_t i = 0;
  const std::size_t n = tagged.size();
  while (i < n) {
    if (tagged[i].tag != PosTag::aux && tagged[i].tag != PosTag::verb) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::size_t head = i;
    bool saw_main = false;
    while (j < n &&
           (tagged[j].tag == PosTag::aux || tagged[j].tag == PosTag::verb ||
            tagged[j].tag == PosTag::adverb)) {
      if (tagged[j].tag == PosTag::verb) {
        head = j;
        saw_main = true;
      } else if (tagged[j].tag == PosTag::aux && !saw_main) {
        head = j;
      }
      ++j;
    }
    Phrase p;
    p.begin = i;
    p.end = j;
    p.head = head;
    p.kind = Phrase::Kind::verb;
    groups.push_back(p);
    i = j;
  }
  std::vector<Phrase> nps = noun_phrases(tagged);
  for (Phrase& g : groups) {
    for (const Phrase& np : nps) {
      if (np.begin == g.end) {
        g.end = np.end;  // object NP belongs to the verb phrase
        break;
      }
    }
  }
  return groups;
}

SubjectResult Annotator::subject_of(const std::string& sentence) const {
  std::vector<TaggedToken> tagged = tag(sentence);
  std::vector<Token> tokens;
  for (const auto& t : tagged) tokens.push_back(t.token);
  std::vector<Phrase> nps = noun_phrases(tagged);
  if (nps.empty()) {
    std::string text = sentence;
    while (!text.empty() &&
           !is_word_char(static_cast<unsigned char>(text.back())))
      text.pop_back();
    return {normalize_ws(text), true};
  }
  const Phrase& np = nps.front();
  std::size_t end = np.end;
  const std::size_t n = tagged.size();
  bool found_finite = false;
  // Extend through possessive chains and participial postmodifiers up to
  // the finite verb of the main clause.
  while (end < n) {
    const TaggedToken& t = tagged[end];
    if (t.tag == PosTag::possessive) {
      ++end;
      continue;
    }
    if ((t.tag == PosTag::verb || t.tag == PosTag::aux) && t.finite) {
      found_finite = true;
      break;
    }
    if (t.tag == PosTag::verb && !t.finite) {
      ++end;  // participle ("wearing")
      continue;
    }
    if (t.tag == PosTag::noun || t.tag == PosTag::adjective ||
        t.tag == PosTag::determiner || t.tag == PosTag::number ||
        t.tag == PosTag::conjunction || t.tag == PosTag::adverb) {
      bool after_participle = false;
      for (std::size_t k = np.end; k < end; ++k)
        if (tagged[k].tag == PosTag::verb && !tagged[k].finite)
          after_participle = true;
      if (!after_participle) break;
      ++end;
      continue;
    }
    break;
  }
  if (!found_finite) {
    for (std::size_t k = end; k < n; ++k)
      if ((tagged[k].tag == PosTag::verb || tagged[k].tag == PosTag::aux) &&
          tagged[k].finite)
        found_finite = true;
    if (!found_finite)
      return {surface(sentence, tokens, np.begin, np.end), true};
    end = np.end;
  }
  while (end > np.begin && tagged[end - 1].tag == PosTag::possessive) --end;
  return {surface(sentence, tokens, np.begin, end), false};
}

}  // namespace dfr
