#include "dfr/saliency.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "dfr/nn/vocab.hpp"

namespace dfr {

std::string to_string(SpanOrigin o) {
  return o == SpanOrigin::hypothesis ? "hypothesis" : "update";
}

std::string to_string(SpanCategory c) {
  switch (c) {
    case SpanCategory::noun_phrase: return "noun_phrase";
    case SpanCategory::verb_phrase: return "verb_phrase";
    case SpanCategory::head_noun: return "head_noun";
    default: return "head_verb";
  }
}

std::string SalientSpan::text() const { return join(tokens, " "); }

std::string serialize_for_classifier(const DefeasibleInstance& inst) {
  return inst.premise + " <sep> " + inst.hypothesis + " <sep> " + inst.update;
}

nn::AttentionClassifier train_type_classifier(
    const std::vector<DefeasibleInstance>& train,
    const nn::ClassifierConfig& config, nn::ClassifierTrainReport* report) {
  if (train.empty())
    throw ContractError("update-type classifier needs a non-empty training set");
  std::vector<std::string> texts;
  std::vector<int> labels;
  for (const DefeasibleInstance& inst : train) {
    texts.push_back(serialize_for_classifier(inst));
    labels.push_back(inst.update_type == UpdateType::strengthener ? 1 : 0);
  }
  return nn::AttentionClassifier::train(texts, labels, config, report);
}

TokenSaliency score_tokens(const nn::BinaryTextClassifier& clf,
                           const DefeasibleInstance& inst,
                           WarningLog* warnings) {
  nn::ClassifierOutput out = clf.run(serialize_for_classifier(inst));
  if (out.truncated && warnings)
    warnings->add("input truncated for instance " + inst.id);

  std::size_t n_p = nn::Vocab::count_tokens(inst.premise);
  std::size_t n_h = nn::Vocab::count_tokens(inst.hypothesis);
  std::size_t n_u = nn::Vocab::count_tokens(inst.update);

  TokenSaliency s;
  s.truncated = out.truncated;
  s.hyp_tokens = nn::Vocab::whitespace_tokens(inst.hypothesis);
  s.upd_tokens = nn::Vocab::whitespace_tokens(inst.update);
  s.hyp_scores.assign(n_h, 0.0);
  s.upd_scores.assign(n_u, 0.0);

  // layout: P tokens, <sep>, H tokens, <sep>, U tokens
  std::size_t h_start = n_p + 1;
  std::size_t u_start = h_start + n_h + 1;
  for (std::size_t i = 0; i < out.attention.size(); ++i) {
    if (i >= h_start && i < h_start + n_h)
      s.hyp_scores[i - h_start] = out.attention[i];
    else if (i >= u_start && i < u_start + n_u)
      s.upd_scores[i - u_start] = out.attention[i];
  }
  return s;
}

std::vector<std::size_t> select_top_tokens(const std::vector<double>& scores,
                                           double ratio) {
  if (scores.empty()) throw ContractError("select_top_tokens: empty scores");
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw ContractError("select_top_tokens: ratio must be in (0, 1]");
  std::size_t k = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(scores.size())));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];  // stable: earliest wins ties
                   });
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

namespace {

// Character offsets of whitespace chunks within the original sentence.
std::vector<std::pair<std::size_t, std::size_t>> chunk_offsets(
    const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() &&
           !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    out.emplace_back(start, i);
  }
  return out;
}

void merge_sentence_spans(const std::vector<std::string>& tokens,
                          const std::vector<double>& scores,
                          const std::vector<bool>& selected,
                          const std::string& text, SpanOrigin origin,
                          std::vector<SalientSpan>* out) {
  auto offsets = chunk_offsets(text);
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (!selected[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double sum = 0.0;
    while (j < tokens.size() && selected[j]) {
      sum += scores[j];
      ++j;
    }
    SalientSpan span;
    span.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(j));
    span.origin = origin;
    span.score = sum / static_cast<double>(j - i);
    if (i < offsets.size() && j - 1 < offsets.size()) {
      span.char_begin = offsets[i].first;
      span.char_end = offsets[j - 1].second;
    }
    out->push_back(std::move(span));
    i = j;
  }
}

}  // namespace

std::vector<SalientSpan> extract_salient_spans(const TokenSaliency& saliency,
                                               const std::string& hyp_text,
                                               const std::string& upd_text,
                                               double ratio) {
  std::vector<double> combined = saliency.hyp_scores;
  combined.insert(combined.end(), saliency.upd_scores.begin(),
                  saliency.upd_scores.end());
  std::vector<std::size_t> top = select_top_tokens(combined, ratio);

  std::vector<bool> hyp_sel(saliency.hyp_scores.size(), false);
  std::vector<bool> upd_sel(saliency.upd_scores.size(), false);
  for (std::size_t idx : top) {
    if (idx < hyp_sel.size())
      hyp_sel[idx] = true;
    else
      upd_sel[idx - hyp_sel.size()] = true;
  }

  std::vector<SalientSpan> spans;
  merge_sentence_spans(saliency.hyp_tokens, saliency.hyp_scores, hyp_sel,
                       hyp_text, SpanOrigin::hypothesis, &spans);
  merge_sentence_spans(saliency.upd_tokens, saliency.upd_scores, upd_sel,
                       upd_text, SpanOrigin::update, &spans);
  return spans;
}

namespace {

struct PhraseEntry {
  Phrase phrase;
  std::vector<TaggedToken> tagged;
};

SalientSpan make_span(const std::vector<TaggedToken>& tagged,
                      const std::string& text, std::size_t begin,
                      std::size_t end, SpanOrigin origin, double score,
                      SpanCategory category) {
  SalientSpan s;
  s.origin = origin;
  s.score = score;
  s.category = category;
  s.char_begin = tagged[begin].token.begin;
  s.char_end = tagged[end - 1].token.end;
  std::string surf = text.substr(s.char_begin, s.char_end - s.char_begin);
  s.tokens = nn::Vocab::whitespace_tokens(surf);
  return s;
}

}  // namespace

std::vector<SalientSpan> grammatical_filter(const std::vector<SalientSpan>& spans,
                                            const std::string& hyp_text,
                                            const std::string& upd_text,
                                            const Annotator& annotator,
                                            WarningLog* warnings) {
  std::vector<SalientSpan> out;
  std::vector<std::string> seen;  // (origin, category, text) dedup keys

  for (const SalientSpan& span : spans) {
    const std::string& text =
        span.origin == SpanOrigin::hypothesis ? hyp_text : upd_text;
    bool all_stop = true;
    for (const std::string& tok : span.tokens) {
      for (const Token& t : tokenize(tok))
        if (!annotator.is_stop(t.text)) all_stop = false;
    }
    if (all_stop) continue;

    std::vector<TaggedToken> tagged;
    try {
      tagged = annotator.tag(text);
    } catch (const std::exception& e) {
      if (warnings)
        warnings->add(std::string("annotator failed, span skipped: ") +
                      e.what());
      continue;
    }
    if (tagged.empty()) continue;

    auto overlaps = [&](const Phrase& p) {
      std::size_t pb = tagged[p.begin].token.begin;
      std::size_t pe = tagged[p.end - 1].token.end;
      return pb < span.char_end && span.char_begin < pe;
    };
    auto emit = [&](std::size_t begin, std::size_t end, SpanCategory cat) {
      SalientSpan s =
          make_span(tagged, text, begin, end, span.origin, span.score, cat);
      std::string key =
          to_string(s.origin) + "|" + to_string(cat) + "|" + s.text();
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) return;
      seen.push_back(key);
      out.push_back(std::move(s));
    };

    for (const Phrase& np : annotator.noun_phrases(tagged)) {
      if (!overlaps(np)) continue;
      emit(np.begin, np.end, SpanCategory::noun_phrase);
      emit(np.head, np.head + 1, SpanCategory::head_noun);
    }
    for (const Phrase& vp : annotator.verb_phrases(tagged)) {
      if (!overlaps(vp)) continue;
      emit(vp.begin, vp.end, SpanCategory::verb_phrase);
      emit(vp.head, vp.head + 1, SpanCategory::head_verb);
    }
  }
  return out;
}

std::vector<SpanPair> select_span_pairs(const std::vector<SalientSpan>& grammatical,
                                        const Embeddings& embeddings, int k,
                                        WarningLog* warnings) {
  std::vector<const SalientSpan*> from_u, from_h;
  for (const SalientSpan& s : grammatical) {
    // pair full phrases, not their duplicated heads
    if (s.category == SpanCategory::head_noun ||
        s.category == SpanCategory::head_verb)
      continue;
    (s.origin == SpanOrigin::update ? from_u : from_h).push_back(&s);
  }
  if (from_u.empty() || from_h.empty())
    throw ContractError(
        "select_span_pairs needs at least one span from each origin");

  std::vector<SpanPair> pairs;
  for (const SalientSpan* su : from_u) {
    for (const SalientSpan* sh : from_h) {
      bool oov = false;
      double sim = embeddings.span_similarity(su->tokens, sh->tokens, &oov);
      if (oov && warnings)
        warnings->add("no in-vocabulary word for pair (" + su->text() + ", " +
                      sh->text() + "); similarity 0");
      pairs.push_back({*su, *sh, sim});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const SpanPair& a, const SpanPair& b) {
                     if (a.similarity != b.similarity)
                       return a.similarity > b.similarity;
                     auto ka = a.from_update.tokens;
                     auto kb = b.from_update.tokens;
                     if (ka != kb) return ka < kb;
                     return a.from_hypothesis.tokens < b.from_hypothesis.tokens;
                   });
  if (static_cast<int>(pairs.size()) > k)
    pairs.resize(static_cast<std::size_t>(k));
  return pairs;
}

}  // namespace dfr
