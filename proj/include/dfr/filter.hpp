#pragma once

#include <map>
#include <string>
#include <vector>

#include "dfr/corpus.hpp"
#include "dfr/nn/attention_classifier.hpp"
#include "dfr/nn/interfaces.hpp"

namespace dfr {

// Entailment/contradiction confidences for one (context, rationale,
// hypothesis) triple; aligned_conf is the one matching the update type.
struct FilterScore {
  double entail_conf = 0.0;
  double contra_conf = 0.0;
  double aligned_conf = 0.0;
};

// "{context} <sep> {rationale} <sep> {hypothesis}" with exactly two
// separators.
std::string serialize_for_filter(const std::string& context,
                                 const std::string& rationale,
                                 const std::string& hypothesis);

// Binary entailment scorer (contradiction = 0, entailment = 1) trained on
// (premise, rationale, hypothesis) triples; neutral records are rejected.
nn::AttentionClassifier train_filter_classifier(
    const std::vector<EsnliInstance>& esnli, const nn::ClassifierConfig& config,
    nn::ClassifierTrainReport* report = nullptr);

// Scores a rationale against the instance; context is premise + update.
// When max_tokens > 0 and the serialized input exceeds it, the context is
// shortened from its start first (the hypothesis and rationale survive).
FilterScore score_rationale(const nn::BinaryTextClassifier& scorer,
                            const DefeasibleInstance& inst,
                            const std::string& rationale,
                            std::size_t max_tokens = 0,
                            WarningLog* warnings = nullptr);

// Keeps the max(1, floor(ratio * N)) best-scoring candidates. Ties break by
// source priority, then lexicographic text. Kept candidates carry their
// aligned confidence in the score field, ordered best first.
std::vector<RationaleCandidate> rank_and_keep(
    const std::vector<RationaleCandidate>& candidates,
    const std::vector<FilterScore>& scores, double ratio = 0.10);

// One seeded random candidate per source present; the no-filter ablation.
std::vector<RationaleCandidate> pick_random_per_source(
    const std::vector<RationaleCandidate>& candidates, Rng& rng);

struct SourceRetention {
  std::size_t candidates = 0;
  std::size_t kept = 0;
};

struct FilterReport {
  std::size_t total_candidates = 0;
  std::size_t total_kept = 0;
  std::map<std::string, SourceRetention> per_source;

  void add(const std::vector<RationaleCandidate>& candidates,
           const std::vector<RationaleCandidate>& kept);
  std::string to_text() const;
};

}  // namespace dfr
