#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dfr/common.hpp"

namespace dfr {

enum class UpdateType { strengthener, weakener };
enum class Split { train, dev, test };
enum class NliLabel { entailment, contradiction, neutral };

std::string to_string(UpdateType t);
std::string to_string(Split s);
std::string to_string(NliLabel l);
UpdateType update_type_from_string(const std::string& s);
Split split_from_string(const std::string& s);
NliLabel nli_label_from_string(const std::string& s);

// One premise/hypothesis/update record of the defeasible inference task.
struct DefeasibleInstance {
  std::string id;
  std::string premise;
  std::string hypothesis;
  std::string update;
  UpdateType update_type = UpdateType::strengthener;
  Split split = Split::train;

  bool operator==(const DefeasibleInstance&) const = default;
};

// Deterministic id from the normalized text fields.
std::string instance_id(const std::string& premise,
                        const std::string& hypothesis,
                        const std::string& update);

enum class RationaleSource {
  vanilla_lm,
  kg_lm,
  knowledge_model,
  nli_derived,
  nli_derived_highlights,
};
std::string to_string(RationaleSource s);
RationaleSource rationale_source_from_string(const std::string& s);

// Ranked ahead-of means kept first on score ties.
int source_priority(RationaleSource s);

enum class DecodingStrategy { nucleus, beam };

struct DecodingConfig {
  DecodingStrategy strategy = DecodingStrategy::nucleus;
  double p = 1.0;          // nucleus mass
  double temperature = 1.0;
  int max_new_tokens = 12;
  int num_return = 1;
  int beam_size = 1;       // beam strategy only
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const DecodingConfig&) const = default;
};

struct RationaleCandidate {
  std::string text;
  RationaleSource source = RationaleSource::vanilla_lm;
  std::string prompt;                      // exact conditioning text
  std::optional<DecodingConfig> decoding;  // provenance
  std::optional<double> score;             // set by the filter

  bool operator==(const RationaleCandidate&) const = default;
};

struct AugmentedInstance {
  DefeasibleInstance instance;
  std::vector<RationaleCandidate> candidates;  // pre-filter, N_R entries
  std::vector<RationaleCandidate> kept;        // post-filter, score-sorted

  bool operator==(const AugmentedInstance&) const = default;
};

struct Highlight {
  std::string origin;  // "premise" or "hypothesis"
  std::size_t token_begin = 0;
  std::size_t token_end = 0;  // exclusive

  bool operator==(const Highlight&) const = default;
};

struct EsnliInstance {
  std::string premise;
  std::string hypothesis;
  NliLabel label = NliLabel::neutral;
  std::string rationale;
  std::vector<Highlight> highlights;

  bool operator==(const EsnliInstance&) const = default;
};

// Loaders for the published column layouts. Records must carry a split tag
// unless a default split is supplied for per-split files.
std::vector<DefeasibleInstance> load_dnli(const std::string& path);
std::vector<DefeasibleInstance> load_dnli(const std::string& path,
                                          std::optional<Split> default_split);

std::vector<EsnliInstance> load_esnli(const std::string& path);

// Line-delimited JSON persistence of the augmented dataset.
std::string serialize_dataset(const std::vector<AugmentedInstance>& instances);
void write_dataset(const std::vector<AugmentedInstance>& instances,
                   const std::string& path);
std::vector<AugmentedInstance> read_dataset(const std::string& path);

// One (P, H, T, U, R) row per kept rationale.
std::size_t expanded_row_count(const std::vector<AugmentedInstance>& instances);

}  // namespace dfr
