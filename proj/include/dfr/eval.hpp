#pragma once

#include <map>
#include <string>
#include <vector>

#include "dfr/corpus.hpp"

namespace dfr {

// Metric tokenization: lowercase, split on whitespace and punctuation.
// Fixed; changing it changes every score.
std::vector<std::string> metric_tokens(const std::string& text);

struct BleuOptions {
  bool smooth = false;  // add-one on clipped counts for n > 1
};

// Corpus-level BLEU with n-grams up to 4, brevity penalty, and
// multi-reference clipping. Scores are in [0, 100].
double bleu4(const std::vector<std::string>& predictions,
             const std::vector<std::vector<std::string>>& references,
             const BleuOptions& options = {});

// Mean over items of the best (max over references) LCS F-measure.
double rougeL(const std::vector<std::string>& predictions,
              const std::vector<std::vector<std::string>>& references);

struct MetricRow {
  double bleu4 = 0.0;
  double rougeL = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  MetricRow overall;
  MetricRow strengthener;
  MetricRow weakener;
  bool smoothed = false;
};

EvalReport evaluate_rationales(
    const std::vector<DefeasibleInstance>& instances,
    const std::vector<std::string>& predictions,
    const std::vector<std::vector<std::string>>& references,
    const BleuOptions& options = {});

// One blinded row per (sampled item, model output).
struct HumanEvalRow {
  std::string item_id;
  std::string model_code;  // blinded; the key file maps it back
  std::string premise;
  std::string hypothesis;
  std::string update;
  UpdateType update_type = UpdateType::strengthener;
  std::string rationale;

  bool operator==(const HumanEvalRow&) const = default;
};

struct HumanEvalExport {
  std::vector<HumanEvalRow> rows;
  std::map<std::string, std::string> key;  // code -> model name
};

// Samples up to sample_size items with a seeded shuffle, pairs each with
// every model's output, and assigns shuffled model codes.
HumanEvalExport export_human_eval(
    const std::vector<DefeasibleInstance>& items,
    const std::map<std::string, std::vector<std::string>>& model_outputs,
    std::size_t sample_size, std::uint64_t seed);

void write_human_eval(const HumanEvalExport& exp, const std::string& task_path,
                      const std::string& key_path);
std::vector<HumanEvalRow> read_human_eval(const std::string& task_path);

enum class Grammaticality { grammatical, understandable, not_understandable };
std::string to_string(Grammaticality g);
Grammaticality grammaticality_from_string(const std::string& s);

struct HumanAnnotation {
  std::string item_id;
  std::string worker_id;
  Grammaticality grammatical = Grammaticality::grammatical;
  bool relevant = false;
  bool correct = false;
  bool explanatory = false;
};

struct ItemMajority {
  bool grammatical = false;  // understandable-or-better, collapsed for voting
  bool relevant = false;
  bool correct = false;
  bool explanatory = false;
};

struct QuestionPercentages {
  double grammatical = 0.0;
  double relevant = 0.0;
  double correct = 0.0;
  double explanatory = 0.0;
  std::size_t n = 0;
};

struct VoteAggregate {
  std::map<std::string, ItemMajority> per_item;
  QuestionPercentages strengthener;
  QuestionPercentages weakener;
  // raw three-level distribution, percentages over all counted annotations
  std::map<std::string, double> grammaticality_distribution;
  std::vector<std::string> excluded;  // items without exactly 3 annotations
};

// Majority vote over exactly 3 annotations per item; items missing from
// item_types or with a different annotation count are excluded and listed.
VoteAggregate aggregate_votes(const std::vector<HumanAnnotation>& annotations,
                              const std::map<std::string, UpdateType>& item_types);

struct KappaResult {
  double value = 0.0;
  bool degenerate = false;  // expected agreement is 1 with imperfect observed
};

// Fleiss' kappa over an item x category count matrix; each row must sum to
// the same rater count.
KappaResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts);

}  // namespace dfr
