#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dfr/corpus.hpp"
#include "dfr/nn/tiny_lm.hpp"

namespace dfr {

// The six input/output serializations a generator can be trained under.
enum class TrainingSetup {
  rationale,
  update_type,
  update,
  multi,
  joint_type_rationale,
  joint_update_rationale,
};

std::string to_string(TrainingSetup s);
TrainingSetup training_setup_from_string(const std::string& s);

struct TrainingExample {
  std::string input_text;
  std::string output_text;
  TrainingSetup setup = TrainingSetup::rationale;

  bool operator==(const TrainingExample&) const = default;
};

// Boundary markers and update-type tokens, registered as atomic vocabulary
// entries before training.
namespace special_tokens {
const std::vector<std::string>& markers();
const std::vector<std::string>& type_tokens();
std::vector<std::string> all();
std::string type_token(UpdateType t);
std::optional<UpdateType> parse_type_token(const std::string& token);
}  // namespace special_tokens

// The exact serialization for one setup; multi expands into the three
// single-field setups. Rationale-free setups still require a rationale when
// the template conditions on one.
std::vector<TrainingExample> serialize_example(const DefeasibleInstance& inst,
                                               const std::string& rationale,
                                               TrainingSetup setup);

// Input-side serialization only (what generation conditions on).
std::string serialize_input(const DefeasibleInstance& inst,
                            const std::string& rationale, TrainingSetup setup);

// One example per kept rationale (three per rationale under multi).
std::vector<TrainingExample> expand_training_examples(
    const std::vector<AugmentedInstance>& instances, TrainingSetup setup);

struct GeneratorModel {
  nn::TinyLm lm;
  TrainingSetup setup = TrainingSetup::rationale;
  nn::BackendFamily family = nn::BackendFamily::decoder_only;
};

// Fine-tunes a generator under the conditional log-likelihood objective.
// config.family fixes the loss mask (decoder-only: whole sequence;
// encoder-decoder: output only); a mismatch with `family` is an error.
GeneratorModel train_generator(nn::BackendFamily family,
                               const std::vector<TrainingExample>& examples,
                               TrainingSetup setup, const nn::LmConfig& config,
                               int epochs,
                               nn::LmTrainReport* report = nullptr);

int max_decode_tokens(TrainingSetup setup);

// Beam-search decoding (beam size 5, top beam) of the setup's output.
std::string generate(const GeneratorModel& model, const DefeasibleInstance& inst,
                     const std::string& rationale = "", int beam_size = 5);

struct ParsedGeneration {
  std::optional<UpdateType> update_type;
  std::optional<std::string> update;
  std::string rationale;
};

struct GenerationParseError : ValueError {
  GenerationParseError(const std::string& msg, std::string offending)
      : ValueError(msg + ": \"" + offending + "\""), text(std::move(offending)) {}
  std::string text;
};

// Inverse of the output templates; throws GenerationParseError when a
// required marker is missing.
ParsedGeneration parse_generated(const std::string& text, TrainingSetup setup);

}  // namespace dfr
