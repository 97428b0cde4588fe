#include "dfr/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dfr/nn/vocab.hpp"

namespace dfr {

std::string serialize_for_filter(const std::string& context,
                                 const std::string& rationale,
                                 const std::string& hypothesis) {
  return context + " <sep> " + rationale + " <sep> " + hypothesis;
}

nn::AttentionClassifier train_filter_classifier(
    const std::vector<EsnliInstance>& esnli, const nn::ClassifierConfig& config,
    nn::ClassifierTrainReport* report) {
  if (esnli.empty())
    throw ContractError("filter classifier needs a non-empty training set");
  std::vector<std::string> texts;
  std::vector<int> labels;
  for (const EsnliInstance& e : esnli) {
    if (e.label == NliLabel::neutral)
      throw ContractError(
          "neutral record reached filter training; restrict to "
          "entailment/contradiction first");
    texts.push_back(
        serialize_for_filter(e.premise, e.rationale, e.hypothesis));
    labels.push_back(e.label == NliLabel::entailment ? 1 : 0);
  }
  return nn::AttentionClassifier::train(texts, labels, config, report);
}

FilterScore score_rationale(const nn::BinaryTextClassifier& scorer,
                            const DefeasibleInstance& inst,
                            const std::string& rationale,
                            std::size_t max_tokens, WarningLog* warnings) {
  if (normalize_ws(rationale).empty())
    throw ContractError("score_rationale: empty rationale");

  // the update is part of the premise-side context
  std::string context = inst.premise + " " + inst.update;
  if (max_tokens > 0) {
    std::size_t fixed = nn::Vocab::count_tokens(rationale) +
                        nn::Vocab::count_tokens(inst.hypothesis) + 2;
    std::vector<std::string> ctx = nn::Vocab::whitespace_tokens(context);
    if (fixed + ctx.size() > max_tokens) {
      std::size_t budget = max_tokens > fixed ? max_tokens - fixed : 0;
      std::size_t dropped = ctx.size() - budget;
      ctx.erase(ctx.begin(),
                ctx.begin() + static_cast<std::ptrdiff_t>(dropped));
      context = join(ctx, " ");
      if (warnings)
        warnings->add("input over length for instance " + inst.id +
                      "; dropped " + std::to_string(dropped) +
                      " leading context tokens");
    }
  }

  nn::ClassifierOutput out =
      scorer.run(serialize_for_filter(context, rationale, inst.hypothesis));
  FilterScore score;
  score.contra_conf = out.probs[0];
  score.entail_conf = out.probs[1];
  score.aligned_conf = inst.update_type == UpdateType::strengthener
                           ? score.entail_conf
                           : score.contra_conf;
  return score;
}

std::vector<RationaleCandidate> rank_and_keep(
    const std::vector<RationaleCandidate>& candidates,
    const std::vector<FilterScore>& scores, double ratio) {
  if (candidates.empty())
    throw ContractError("rank_and_keep: no candidates");
  if (candidates.size() != scores.size())
    throw ContractError("rank_and_keep: candidates and scores differ in size");
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw ContractError("rank_and_keep: ratio must be in (0, 1]");

  std::size_t n = candidates.size();
  std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n))));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].aligned_conf != scores[b].aligned_conf)
      return scores[a].aligned_conf > scores[b].aligned_conf;
    int pa = source_priority(candidates[a].source);
    int pb = source_priority(candidates[b].source);
    if (pa != pb) return pa < pb;
    if (candidates[a].text != candidates[b].text)
      return candidates[a].text < candidates[b].text;
    return a < b;
  });

  std::vector<RationaleCandidate> kept;
  kept.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    RationaleCandidate c = candidates[order[i]];
    c.score = scores[order[i]].aligned_conf;
    kept.push_back(std::move(c));
  }
  return kept;
}

std::vector<RationaleCandidate> pick_random_per_source(
    const std::vector<RationaleCandidate>& candidates, Rng& rng) {
  static const RationaleSource all_sources[] = {
      RationaleSource::vanilla_lm, RationaleSource::kg_lm,
      RationaleSource::knowledge_model, RationaleSource::nli_derived,
      RationaleSource::nli_derived_highlights};
  std::vector<RationaleCandidate> picked;
  for (RationaleSource s : all_sources) {
    std::vector<const RationaleCandidate*> pool;
    for (const RationaleCandidate& c : candidates)
      if (c.source == s) pool.push_back(&c);
    if (pool.empty()) continue;
    std::uniform_int_distribution<std::size_t> dist(0, pool.size() - 1);
    picked.push_back(*pool[dist(rng)]);
  }
  return picked;
}

void FilterReport::add(const std::vector<RationaleCandidate>& candidates,
                       const std::vector<RationaleCandidate>& kept) {
  total_candidates += candidates.size();
  total_kept += kept.size();
  for (const RationaleCandidate& c : candidates)
    ++per_source[to_string(c.source)].candidates;
  for (const RationaleCandidate& c : kept) ++per_source[to_string(c.source)].kept;
}

std::string FilterReport::to_text() const {
  std::ostringstream out;
  out << "candidates: " << total_candidates << "\n";
  out << "kept: " << total_kept << "\n";
  for (const auto& [source, r] : per_source) {
    double rate = r.candidates == 0
                      ? 0.0
                      : 100.0 * static_cast<double>(r.kept) /
                            static_cast<double>(r.candidates);
    out << source << ": " << r.kept << "/" << r.candidates << " ("
        << rate << "%)\n";
  }
  return out.str();
}

}  // namespace dfr
