#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dfr/annotator.hpp"
#include "dfr/corpus.hpp"
#include "dfr/embeddings.hpp"
#include "dfr/nn/attention_classifier.hpp"
#include "dfr/nn/interfaces.hpp"

namespace dfr {

enum class SpanOrigin { hypothesis, update };
enum class SpanCategory { noun_phrase, verb_phrase, head_noun, head_verb };

std::string to_string(SpanOrigin o);
std::string to_string(SpanCategory c);

// A high-attention token span of the hypothesis or update.
struct SalientSpan {
  std::vector<std::string> tokens;
  std::size_t char_begin = 0;
  std::size_t char_end = 0;  // exclusive, offsets into the source sentence
  SpanOrigin origin = SpanOrigin::hypothesis;
  double score = 0.0;  // mean of constituent token scores
  std::optional<SpanCategory> category;  // set by the grammatical filter

  std::string text() const;
};

struct SpanPair {
  SalientSpan from_update;
  SalientSpan from_hypothesis;
  double similarity = 0.0;
};

// Attention scores for the surface tokens of hypothesis and update.
struct TokenSaliency {
  std::vector<std::string> hyp_tokens;
  std::vector<double> hyp_scores;
  std::vector<std::string> upd_tokens;
  std::vector<double> upd_scores;
  bool truncated = false;
};

// "{P} <sep> {H} <sep> {U}" — the classifier's input serialization.
std::string serialize_for_classifier(const DefeasibleInstance& inst);

// Binary update-type classifier (weakener = 0, strengthener = 1) exposing
// per-token attention from the classification position.
nn::AttentionClassifier train_type_classifier(
    const std::vector<DefeasibleInstance>& train,
    const nn::ClassifierConfig& config,
    nn::ClassifierTrainReport* report = nullptr);

TokenSaliency score_tokens(const nn::BinaryTextClassifier& clf,
                           const DefeasibleInstance& inst,
                           WarningLog* warnings = nullptr);

// Indices of the top ceil(ratio * n) tokens by score; ties break toward
// the earliest position. Returned sorted ascending.
std::vector<std::size_t> select_top_tokens(const std::vector<double>& scores,
                                           double ratio);

// Top 20% tokens across H and U merged into maximal contiguous spans.
std::vector<SalientSpan> extract_salient_spans(const TokenSaliency& saliency,
                                               const std::string& hyp_text,
                                               const std::string& upd_text,
                                               double ratio = 0.20);

// Keeps grammatical spans: for each span overlapping a noun/verb phrase,
// the full phrase and its head; pure stop-word spans are dropped.
std::vector<SalientSpan> grammatical_filter(const std::vector<SalientSpan>& spans,
                                            const std::string& hyp_text,
                                            const std::string& upd_text,
                                            const Annotator& annotator,
                                            WarningLog* warnings = nullptr);

// Top-k (s_u, s_h) pairs by embedding similarity.
std::vector<SpanPair> select_span_pairs(const std::vector<SalientSpan>& grammatical,
                                        const Embeddings& embeddings, int k = 3,
                                        WarningLog* warnings = nullptr);

}  // namespace dfr
