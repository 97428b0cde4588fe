#include "dfr/trainer.hpp"

#include <algorithm>

namespace dfr {

std::string to_string(TrainingSetup s) {
  switch (s) {
    case TrainingSetup::rationale: return "rationale";
    case TrainingSetup::update_type: return "update_type";
    case TrainingSetup::update: return "update";
    case TrainingSetup::multi: return "multi";
    case TrainingSetup::joint_type_rationale: return "joint_type_rationale";
    default: return "joint_update_rationale";
  }
}

TrainingSetup training_setup_from_string(const std::string& s) {
  if (s == "rationale") return TrainingSetup::rationale;
  if (s == "update_type") return TrainingSetup::update_type;
  if (s == "update") return TrainingSetup::update;
  if (s == "multi") return TrainingSetup::multi;
  if (s == "joint_type_rationale") return TrainingSetup::joint_type_rationale;
  if (s == "joint_update_rationale") return TrainingSetup::joint_update_rationale;
  throw ValueError("unknown training setup: " + s);
}

namespace special_tokens {

const std::vector<std::string>& markers() {
  static const std::vector<std::string> m = {
      "[premise]", "[hypo]", "[ut]", "[update]", "[rationale]",
      "[update_type_rationale]", "[update_rationale]"};
  return m;
}

const std::vector<std::string>& type_tokens() {
  static const std::vector<std::string> t = {"<strengthener>", "<weakener>"};
  return t;
}

std::vector<std::string> all() {
  std::vector<std::string> out = markers();
  for (const std::string& t : type_tokens()) out.push_back(t);
  return out;
}

std::string type_token(UpdateType t) {
  return t == UpdateType::strengthener ? "<strengthener>" : "<weakener>";
}

std::optional<UpdateType> parse_type_token(const std::string& token) {
  if (token == "<strengthener>") return UpdateType::strengthener;
  if (token == "<weakener>") return UpdateType::weakener;
  return std::nullopt;
}

}  // namespace special_tokens

namespace {

void require_rationale(const std::string& rationale, TrainingSetup setup) {
  if (normalize_ws(rationale).empty())
    throw ContractError("setup " + to_string(setup) + " requires a rationale");
}

}  // namespace

std::string serialize_input(const DefeasibleInstance& inst,
                            const std::string& rationale, TrainingSetup setup) {
  const std::string p = "[premise] " + inst.premise;
  const std::string h = " [hypo] " + inst.hypothesis;
  const std::string t = special_tokens::type_token(inst.update_type);
  switch (setup) {
    case TrainingSetup::rationale:
      return p + h + " [ut] " + t + " [update] " + inst.update + " [rationale]";
    case TrainingSetup::update_type:
      require_rationale(rationale, setup);
      return p + h + " [update] " + inst.update + " [rationale] " + rationale +
             " [ut]";
    case TrainingSetup::update:
      require_rationale(rationale, setup);
      return p + h + " [rationale] " + rationale + " [ut] " + t + " [update]";
    case TrainingSetup::joint_type_rationale:
      // the target value (the type) is withheld from the input
      return p + h + " [update] " + inst.update + " [update_type_rationale]";
    case TrainingSetup::joint_update_rationale:
      return p + h + " [ut] " + t + " [update_rationale]";
    default:
      throw ContractError("multi has no single input; expand it first");
  }
}

std::vector<TrainingExample> serialize_example(const DefeasibleInstance& inst,
                                               const std::string& rationale,
                                               TrainingSetup setup) {
  if (setup == TrainingSetup::multi) {
    std::vector<TrainingExample> out;
    for (TrainingSetup sub : {TrainingSetup::rationale,
                              TrainingSetup::update_type, TrainingSetup::update})
      out.push_back(serialize_example(inst, rationale, sub)[0]);
    return out;
  }

  TrainingExample ex;
  ex.setup = setup;
  ex.input_text = serialize_input(inst, rationale, setup);
  const std::string t = special_tokens::type_token(inst.update_type);
  switch (setup) {
    case TrainingSetup::rationale:
      require_rationale(rationale, setup);
      ex.output_text = rationale;
      break;
    case TrainingSetup::update_type:
      ex.output_text = t;
      break;
    case TrainingSetup::update:
      ex.output_text = inst.update;
      break;
    case TrainingSetup::joint_type_rationale:
      require_rationale(rationale, setup);
      ex.output_text = "[ut] " + t + " [rationale] " + rationale;
      break;
    default:  // joint_update_rationale
      require_rationale(rationale, setup);
      ex.output_text = "[update] " + inst.update + " [rationale] " + rationale;
      break;
  }
  return {ex};
}

std::vector<TrainingExample> expand_training_examples(
    const std::vector<AugmentedInstance>& instances, TrainingSetup setup) {
  std::vector<TrainingExample> out;
  for (const AugmentedInstance& aug : instances) {
    for (const RationaleCandidate& r : aug.kept) {
      std::vector<TrainingExample> exs =
          serialize_example(aug.instance, r.text, setup);
      out.insert(out.end(), exs.begin(), exs.end());
    }
  }
  return out;
}

GeneratorModel train_generator(nn::BackendFamily family,
                               const std::vector<TrainingExample>& examples,
                               TrainingSetup setup, const nn::LmConfig& config,
                               int epochs, nn::LmTrainReport* report) {
  if (examples.empty()) throw ContractError("train_generator: no examples");
  if (epochs < 1) throw ContractError("train_generator: epochs must be >= 1");
  if (config.family != family)
    throw ContractError(
        "backend family does not match the loss-mask configuration");

  std::vector<nn::SeqExample> seqs;
  seqs.reserve(examples.size());
  for (const TrainingExample& ex : examples)
    seqs.push_back({ex.input_text, ex.output_text});

  GeneratorModel model;
  model.setup = setup;
  model.family = family;
  model.lm = nn::TinyLm::create(seqs, config, special_tokens::all());
  for (const std::string& marker : special_tokens::all()) {
    if (!model.lm.token_is_atomic(marker))
      throw ContractError("special token is not atomic: " + marker);
  }
  nn::LmTrainReport r = model.lm.train(seqs, epochs);
  if (report) *report = std::move(r);
  return model;
}

int max_decode_tokens(TrainingSetup setup) {
  // joint setups emit markers plus two fields; leave headroom
  if (setup == TrainingSetup::joint_type_rationale ||
      setup == TrainingSetup::joint_update_rationale)
    return 96;
  return 64;
}

std::string generate(const GeneratorModel& model, const DefeasibleInstance& inst,
                     const std::string& rationale, int beam_size) {
  if (model.setup == TrainingSetup::multi)
    throw ContractError("decode multi models with a concrete sub-setup");
  std::string input = serialize_input(inst, rationale, model.setup);
  return model.lm.generate_beam(input, beam_size,
                                max_decode_tokens(model.setup));
}

namespace {

// Text between two markers (or to the end when `close` is empty).
std::string between(const std::string& text, const std::string& open,
                    const std::string& close, TrainingSetup setup) {
  std::size_t a = text.find(open);
  if (a == std::string::npos)
    throw GenerationParseError(
        "missing marker " + open + " in " + to_string(setup) + " output", text);
  a += open.size();
  std::size_t b = close.empty() ? std::string::npos : text.find(close, a);
  if (!close.empty() && b == std::string::npos)
    throw GenerationParseError(
        "missing marker " + close + " in " + to_string(setup) + " output", text);
  return normalize_ws(text.substr(a, b == std::string::npos ? b : b - a));
}

UpdateType parse_type_or_throw(const std::string& token,
                               const std::string& context) {
  std::optional<UpdateType> t = special_tokens::parse_type_token(token);
  if (!t)
    throw GenerationParseError("expected an update-type token", context);
  return *t;
}

}  // namespace

ParsedGeneration parse_generated(const std::string& text, TrainingSetup setup) {
  ParsedGeneration out;
  switch (setup) {
    case TrainingSetup::rationale:
      out.rationale = normalize_ws(text);
      break;
    case TrainingSetup::update_type:
      out.update_type = parse_type_or_throw(normalize_ws(text), text);
      break;
    case TrainingSetup::update:
      out.update = normalize_ws(text);
      break;
    case TrainingSetup::joint_type_rationale:
      out.update_type = parse_type_or_throw(
          between(text, "[ut]", "[rationale]", setup), text);
      out.rationale = between(text, "[rationale]", "", setup);
      break;
    case TrainingSetup::joint_update_rationale:
      out.update = between(text, "[update]", "[rationale]", setup);
      out.rationale = between(text, "[rationale]", "", setup);
      break;
    default:
      throw ContractError("parse multi outputs with a concrete sub-setup");
  }
  return out;
}

}  // namespace dfr
