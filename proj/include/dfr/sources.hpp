#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dfr/annotator.hpp"
#include "dfr/corpus.hpp"
#include "dfr/nn/interfaces.hpp"
#include "dfr/nn/tiny_lm.hpp"
#include "dfr/saliency.hpp"

namespace dfr {

enum class PromptKind { definition, purpose, relationship };

struct Prompt {
  std::string full;    // context + clause, the exact conditioning text
  std::string clause;  // template clause; the stored rationale starts with it
  PromptKind kind = PromptKind::definition;
};

// "[context]. The definition of {np} is" / "[context]. The purpose of {vp}
// is"; context is P+H for hypothesis spans, P+U for update spans.
Prompt build_prompt(PromptKind kind, const SalientSpan& span,
                    const DefeasibleInstance& inst);
// "{P} {U} {H}. The relationship between {s_u} and {s_h} is that".
Prompt build_prompt(const SpanPair& pair, const DefeasibleInstance& inst);

// Pinned decoding settings for the two LM sources.
DecodingConfig vanilla_decoding(std::uint64_t seed);
DecodingConfig kg_decoding(std::uint64_t seed);

// Samples continuations for each prompt, truncates to the token budget
// (cutting at the first sentence end within it), deduplicates, and stores
// clause-prefixed standalone sentences.
std::vector<RationaleCandidate> generate_from_prompts(
    const nn::TextGenerator& lm, const std::vector<Prompt>& prompts,
    const DecodingConfig& config, RationaleSource source,
    WarningLog* warnings = nullptr);

struct KnowledgeTriplet {
  std::string head;
  std::string relation;
  std::string tail;
};

std::vector<KnowledgeTriplet> load_triplets(const std::string& path);

// Relation -> sentence templates, shipped as a data file.
class RelationTemplates {
 public:
  static RelationTemplates from_file(const std::string& path);
  static RelationTemplates from_data_dir(const std::string& data_dir);

  std::string verbalize(const KnowledgeTriplet& t) const;
  bool has(const std::string& relation) const;
  std::vector<std::string> relations() const;

 private:
  std::map<std::string, std::string> templates_;
};

// Continues language-model training on the verbalized triplet corpus.
nn::TinyLm kb_pretrain(nn::TinyLm lm, const std::vector<std::string>& verbalized,
                       int epochs = 2, nn::LmTrainReport* report = nullptr);

// Relation -> rendering template for if-then model outputs.
class IfThenTemplates {
 public:
  static IfThenTemplates from_file(const std::string& path);
  static IfThenTemplates from_data_dir(const std::string& data_dir);

  std::string render(const std::string& relation, const std::string& subject,
                     const std::string& tail) const;
  bool has(const std::string& relation) const;

 private:
  std::map<std::string, std::string> templates_;
};

// Postconditions of the update and preconditions of the hypothesis.
const std::vector<std::string>& update_postcondition_relations();
const std::vector<std::string>& hypothesis_precondition_relations();

std::vector<RationaleCandidate> generate_knowledge_model(
    const nn::IfThenModel& km, const DefeasibleInstance& inst,
    const Annotator& annotator, const IfThenTemplates& templates,
    int beam_size = 5, WarningLog* warnings = nullptr);

// Lookup-table if-then model: "event<TAB>relation<TAB>tail1|tail2|...".
class TableIfThenModel : public nn::IfThenModel {
 public:
  static TableIfThenModel from_file(const std::string& path);
  void add(const std::string& event, const std::string& relation,
           std::vector<std::string> tails);
  bool has_relation(const std::string& relation) const override;
  std::vector<std::string> query(const std::string& event,
                                 const std::string& relation,
                                 int beam_size) const override;

 private:
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> table_;
  std::unordered_set<std::string> relations_;
};

// Deterministic stand-in for runs without a trained if-then model: derives
// tails from the event's content words.
class StubIfThenModel : public nn::IfThenModel {
 public:
  explicit StubIfThenModel(const Annotator* annotator) : annotator_(annotator) {}
  bool has_relation(const std::string& relation) const override;
  std::vector<std::string> query(const std::string& event,
                                 const std::string& relation,
                                 int beam_size) const override;

 private:
  const Annotator* annotator_;
};

// NLI rationalizer (text-to-text): "explain nli premise: P hypothesis: H"
// -> "label explanation: R".
std::string nli_input(const std::string& premise, const std::string& hypothesis);
std::string nli_target(NliLabel label, const std::string& rationale);

std::vector<nn::SeqExample> build_nli_training(
    const std::vector<EsnliInstance>& esnli, bool highlights_only);

nn::TinyLm train_nli_rationalizer(const std::vector<EsnliInstance>& esnli,
                                  bool highlights_only,
                                  const nn::LmConfig& config, int epochs,
                                  nn::LmTrainReport* report = nullptr);

// Beam-search adapter so a TinyLm satisfies the Seq2SeqModel surface.
class TinyLmSeq2Seq : public nn::Seq2SeqModel {
 public:
  TinyLmSeq2Seq(const nn::TinyLm* lm, int beam_size, int max_new_tokens)
      : lm_(lm), beam_size_(beam_size), max_new_tokens_(max_new_tokens) {}
  std::string generate_one(const std::string& input) const override {
    return lm_->generate_beam(input, beam_size_, max_new_tokens_);
  }

 private:
  const nn::TinyLm* lm_;
  int beam_size_;
  int max_new_tokens_;
};

struct NliGenResult {
  bool ok = false;
  std::string raw;                 // model output as generated
  std::string label_text;          // text before "explanation:"
  std::optional<NliLabel> label;   // parsed label, analysis only
  std::optional<RationaleCandidate> candidate;
};

NliGenResult generate_nli_derived(
    const nn::Seq2SeqModel& model, const DefeasibleInstance& inst,
    bool highlights_only, const std::vector<SalientSpan>* grammatical,
    std::size_t* parse_failures = nullptr,
    const std::optional<DecodingConfig>& decoding = std::nullopt);

UpdateType map_label_to_update_type(NliLabel label);

}  // namespace dfr
