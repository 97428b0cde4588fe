#include "dfr/sources.hpp"

#include <algorithm>
#include <cctype>

#include "dfr/nn/vocab.hpp"

namespace dfr {

namespace {

std::string trim(const std::string& s) { return normalize_ws(s); }

// Appends a period unless the sentence already ends in terminal punctuation.
std::string with_period(const std::string& s) {
  std::string t = trim(s);
  if (t.empty()) return t;
  char last = t.back();
  if (last != '.' && last != '!' && last != '?') t += '.';
  return t;
}

// Case-fold and drop punctuation; the key under which samples are
// considered duplicates.
std::string dedup_key(const std::string& s) {
  std::string out;
  for (char c : lowercase(s)) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == ' ')
      out.push_back(c);
  }
  return normalize_ws(out);
}

bool is_noun_category(SpanCategory c) {
  return c == SpanCategory::noun_phrase || c == SpanCategory::head_noun;
}
bool is_verb_category(SpanCategory c) {
  return c == SpanCategory::verb_phrase || c == SpanCategory::head_verb;
}

std::string span_context(const SalientSpan& span,
                         const DefeasibleInstance& inst) {
  if (span.origin == SpanOrigin::hypothesis)
    return with_period(inst.premise) + " " + with_period(inst.hypothesis);
  return with_period(inst.premise) + " " + with_period(inst.update);
}

}  // namespace

Prompt build_prompt(PromptKind kind, const SalientSpan& span,
                    const DefeasibleInstance& inst) {
  if (kind == PromptKind::relationship)
    throw ContractError("relationship prompts take a span pair");
  if (!span.category.has_value())
    throw ContractError("prompt spans must carry a grammatical category");
  if (kind == PromptKind::definition && !is_noun_category(*span.category))
    throw ContractError("definition prompts take a noun phrase");
  if (kind == PromptKind::purpose && !is_verb_category(*span.category))
    throw ContractError("purpose prompts take a verb phrase");

  Prompt p;
  p.kind = kind;
  const char* head =
      kind == PromptKind::definition ? "The definition of " : "The purpose of ";
  p.clause = head + span.text() + " is";
  p.full = span_context(span, inst) + " " + p.clause;
  return p;
}

Prompt build_prompt(const SpanPair& pair, const DefeasibleInstance& inst) {
  Prompt p;
  p.kind = PromptKind::relationship;
  p.clause = "The relationship between " + pair.from_update.text() + " and " +
             pair.from_hypothesis.text() + " is that";
  p.full = with_period(inst.premise) + " " + with_period(inst.update) + " " +
           with_period(inst.hypothesis) + " " + p.clause;
  return p;
}

DecodingConfig vanilla_decoding(std::uint64_t seed) {
  DecodingConfig c;
  c.strategy = DecodingStrategy::nucleus;
  c.p = 0.35;
  c.temperature = 1.0;
  c.max_new_tokens = 12;
  c.num_return = 20;
  c.seed = seed;
  return c;
}

DecodingConfig kg_decoding(std::uint64_t seed) {
  DecodingConfig c;
  c.strategy = DecodingStrategy::nucleus;
  c.p = 0.5;
  c.temperature = 0.7;
  c.max_new_tokens = 12;
  c.num_return = 5;
  c.seed = seed;
  return c;
}

std::vector<RationaleCandidate> generate_from_prompts(
    const nn::TextGenerator& lm, const std::vector<Prompt>& prompts,
    const DecodingConfig& config, RationaleSource source,
    WarningLog* warnings) {
  config.validate();
  std::vector<RationaleCandidate> out;
  for (const Prompt& prompt : prompts) {
    std::vector<std::string> samples;
    try {
      samples = lm.generate(prompt.full, config);
    } catch (const std::exception& e) {
      if (warnings)
        warnings->add("generation failed for prompt \"" + prompt.full +
                      "\": " + e.what());
      continue;
    }
    std::vector<std::string> seen;
    for (const std::string& raw : samples) {
      std::string completion = trim(raw);
      // cut at the first sentence boundary
      std::size_t cut = completion.find_first_of(".!?");
      if (cut != std::string::npos) completion = trim(completion.substr(0, cut));
      // token budget under the generator's own tokenizer
      std::vector<std::string> words = split(completion, ' ');
      while (!words.empty() &&
             lm.count_tokens(join(words, " ")) >
                 static_cast<std::size_t>(config.max_new_tokens))
        words.pop_back();
      completion = join(words, " ");
      if (completion.empty()) continue;

      std::string text =
          capitalize_first(with_period(prompt.clause + " " + completion));
      std::string key = dedup_key(text);
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
      seen.push_back(key);

      RationaleCandidate cand;
      cand.text = text;
      cand.source = source;
      cand.prompt = prompt.full;
      cand.decoding = config;
      out.push_back(std::move(cand));
      if (static_cast<int>(seen.size()) >= config.num_return) break;
    }
  }
  return out;
}

std::vector<KnowledgeTriplet> load_triplets(const std::string& path) {
  std::vector<KnowledgeTriplet> out;
  int line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> parts = split(line, '\t');
    if (parts.size() != 3)
      throw SchemaError(path + ":" + std::to_string(line_no) +
                        ": expected head<TAB>relation<TAB>tail");
    KnowledgeTriplet t{trim(parts[0]), trim(parts[1]), trim(parts[2])};
    if (t.head.empty() || t.relation.empty() || t.tail.empty())
      throw SchemaError(path + ":" + std::to_string(line_no) +
                        ": empty triplet field");
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

std::map<std::string, std::string> load_template_table(const std::string& path) {
  std::map<std::string, std::string> table;
  int line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    std::vector<std::string> parts = split(line, '\t');
    if (parts.size() != 2)
      throw SchemaError(path + ":" + std::to_string(line_no) +
                        ": expected relation<TAB>template");
    table[trim(parts[0])] = trim(parts[1]);
  }
  if (table.empty()) throw SchemaError(path + ": no templates");
  return table;
}

std::string substitute(std::string tmpl, const std::string& placeholder,
                       const std::string& value) {
  std::size_t pos = tmpl.find(placeholder);
  while (pos != std::string::npos) {
    tmpl.replace(pos, placeholder.size(), value);
    pos = tmpl.find(placeholder, pos + value.size());
  }
  return tmpl;
}

}  // namespace

RelationTemplates RelationTemplates::from_file(const std::string& path) {
  RelationTemplates t;
  t.templates_ = load_template_table(path);
  return t;
}

RelationTemplates RelationTemplates::from_data_dir(const std::string& data_dir) {
  return from_file(data_dir + "/relation_templates.tsv");
}

bool RelationTemplates::has(const std::string& relation) const {
  return templates_.count(relation) != 0;
}

std::vector<std::string> RelationTemplates::relations() const {
  std::vector<std::string> out;
  for (const auto& [rel, tmpl] : templates_) out.push_back(rel);
  return out;
}

std::string RelationTemplates::verbalize(const KnowledgeTriplet& t) const {
  if (t.head.empty() || t.relation.empty() || t.tail.empty())
    throw ContractError("triplet fields must be non-empty");
  auto it = templates_.find(t.relation);
  if (it == templates_.end())
    throw ValueError("unknown relation '" + t.relation +
                     "'; known relations: " + join(relations(), ", "));
  std::string s = substitute(it->second, "{head}", t.head);
  s = substitute(s, "{tail}", t.tail);
  return capitalize_first(s);
}

nn::TinyLm kb_pretrain(nn::TinyLm lm, const std::vector<std::string>& verbalized,
                       int epochs, nn::LmTrainReport* report) {
  if (epochs < 1) throw ContractError("kb_pretrain: epochs must be >= 1");
  if (verbalized.empty()) throw ContractError("kb_pretrain: empty corpus");
  std::vector<nn::SeqExample> examples;
  examples.reserve(verbalized.size());
  for (const std::string& s : verbalized) examples.push_back({"", s});
  nn::LmTrainReport r = lm.train(examples, epochs);
  if (report) *report = std::move(r);
  return lm;
}

IfThenTemplates IfThenTemplates::from_file(const std::string& path) {
  IfThenTemplates t;
  t.templates_ = load_template_table(path);
  return t;
}

IfThenTemplates IfThenTemplates::from_data_dir(const std::string& data_dir) {
  return from_file(data_dir + "/ifthen_templates.tsv");
}

bool IfThenTemplates::has(const std::string& relation) const {
  return templates_.count(relation) != 0;
}

std::string IfThenTemplates::render(const std::string& relation,
                                    const std::string& subject,
                                    const std::string& tail) const {
  auto it = templates_.find(relation);
  if (it == templates_.end())
    throw ValueError("unknown if-then relation '" + relation + "'");
  std::string subj = trim(subject);
  if (subj.empty()) throw ContractError("render: empty subject");
  // a sentence-initial subject keeps its capitalization; mid-sentence
  // subjects lower a leading determiner or pronoun ("The baby boy's mom"
  // -> "the ...", "He" -> "he"); proper names keep their case
  if (it->second.find("{subject}") != 0) {
    static const std::unordered_set<std::string> dets = {
        "the", "a",   "an",  "this", "that",  "these", "those", "his",
        "her", "its", "their", "my", "our", "your", "some",
        "he", "she", "it", "they", "we", "you"};
    std::string first = lowercase(split(subj, ' ')[0]);
    if (dets.count(first) && subj[0] >= 'A' && subj[0] <= 'Z')
      subj[0] = static_cast<char>(subj[0] - 'A' + 'a');
  }
  std::string s = substitute(it->second, "{subject}", subj);
  s = substitute(s, "{tail}", trim(tail));
  return capitalize_first(with_period(s));
}

const std::vector<std::string>& update_postcondition_relations() {
  static const std::vector<std::string> rels = {
      "xWant", "xEffect", "xReact", "xAttr", "oWant", "oEffect", "oReact"};
  return rels;
}

const std::vector<std::string>& hypothesis_precondition_relations() {
  static const std::vector<std::string> rels = {"xNeed", "xIntent", "xAttr"};
  return rels;
}

namespace {

void query_relations(const nn::IfThenModel& km, const std::string& sentence,
                     const std::vector<std::string>& relations,
                     const std::string& role_tag, const Annotator& annotator,
                     const IfThenTemplates& templates, int beam_size,
                     WarningLog* warnings,
                     std::vector<RationaleCandidate>* out) {
  SubjectResult subj = annotator.subject_of(sentence);
  if (subj.fallback && warnings)
    warnings->add("no clause subject in \"" + sentence +
                  "\"; using first noun phrase");
  if (subj.text.empty()) {
    if (warnings)
      warnings->add("no subject found in \"" + sentence + "\"; skipped");
    return;
  }
  DecodingConfig dec;
  dec.strategy = DecodingStrategy::beam;
  dec.beam_size = beam_size;
  dec.num_return = beam_size;

  for (const std::string& rel : relations) {
    if (!km.has_relation(rel)) {
      if (warnings) warnings->add("relation " + rel + " unavailable; skipped");
      continue;
    }
    if (!templates.has(rel)) {
      if (warnings) warnings->add("no template for relation " + rel);
      continue;
    }
    for (const std::string& tail : km.query(sentence, rel, beam_size)) {
      if (normalize_ws(tail).empty()) continue;
      RationaleCandidate cand;
      cand.text = templates.render(rel, subj.text, tail);
      cand.source = RationaleSource::knowledge_model;
      cand.prompt = role_tag + " " + rel + ": " + sentence;
      cand.decoding = dec;
      out->push_back(std::move(cand));
    }
  }
}

}  // namespace

std::vector<RationaleCandidate> generate_knowledge_model(
    const nn::IfThenModel& km, const DefeasibleInstance& inst,
    const Annotator& annotator, const IfThenTemplates& templates, int beam_size,
    WarningLog* warnings) {
  if (beam_size < 1) throw ContractError("beam_size must be >= 1");
  std::vector<RationaleCandidate> out;
  query_relations(km, inst.update, update_postcondition_relations(),
                  "update-postcondition", annotator, templates, beam_size,
                  warnings, &out);
  query_relations(km, inst.hypothesis, hypothesis_precondition_relations(),
                  "hypothesis-precondition", annotator, templates, beam_size,
                  warnings, &out);
  return out;
}

TableIfThenModel TableIfThenModel::from_file(const std::string& path) {
  TableIfThenModel m;
  int line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (normalize_ws(line).empty() || line[0] == '#') continue;
    std::vector<std::string> parts = split(line, '\t');
    if (parts.size() != 3)
      throw SchemaError(path + ":" + std::to_string(line_no) +
                        ": expected event<TAB>relation<TAB>tails");
    std::vector<std::string> tails;
    for (const std::string& t : split(parts[2], '|'))
      if (!normalize_ws(t).empty()) tails.push_back(normalize_ws(t));
    m.add(normalize_ws(parts[0]), normalize_ws(parts[1]), std::move(tails));
  }
  return m;
}

void TableIfThenModel::add(const std::string& event, const std::string& relation,
                           std::vector<std::string> tails) {
  table_[{event, relation}] = std::move(tails);
  relations_.insert(relation);
}

bool TableIfThenModel::has_relation(const std::string& relation) const {
  return relations_.count(relation) != 0;
}

std::vector<std::string> TableIfThenModel::query(const std::string& event,
                                                 const std::string& relation,
                                                 int beam_size) const {
  auto it = table_.find({normalize_ws(event), relation});
  if (it == table_.end()) return {};
  std::vector<std::string> out = it->second;
  if (static_cast<int>(out.size()) > beam_size)
    out.resize(static_cast<std::size_t>(beam_size));
  return out;
}

bool StubIfThenModel::has_relation(const std::string& relation) const {
  const auto& post = update_postcondition_relations();
  const auto& pre = hypothesis_precondition_relations();
  return std::find(post.begin(), post.end(), relation) != post.end() ||
         std::find(pre.begin(), pre.end(), relation) != pre.end();
}

std::vector<std::string> StubIfThenModel::query(const std::string& event,
                                                const std::string& relation,
                                                int beam_size) const {
  // content words of the event, in order, as surrogate tails
  std::vector<std::string> words;
  for (const Token& t : tokenize(event)) {
    std::string w = lowercase(t.text);
    if (w.empty() || !std::isalpha(static_cast<unsigned char>(w[0]))) continue;
    if (annotator_ && annotator_->is_stop(w)) continue;
    if (std::find(words.begin(), words.end(), w) == words.end())
      words.push_back(w);
  }
  bool infinitive = relation == "xWant" || relation == "oWant" ||
                    relation == "xNeed" || relation == "xIntent";
  std::vector<std::string> out;
  for (const std::string& w : words) {
    if (static_cast<int>(out.size()) >= beam_size) break;
    out.push_back(infinitive ? "to " + w : w);
  }
  return out;
}

std::string nli_input(const std::string& premise,
                      const std::string& hypothesis) {
  return "explain nli premise: " + premise + " hypothesis: " + hypothesis;
}

std::string nli_target(NliLabel label, const std::string& rationale) {
  if (label == NliLabel::neutral)
    throw ContractError("neutral records are excluded from rationalizer training");
  return to_string(label) + " explanation: " + rationale;
}

namespace {

std::string highlight_words(const EsnliInstance& e, const std::string& origin) {
  const std::string& sentence =
      origin == "premise" ? e.premise : e.hypothesis;
  std::vector<std::string> tokens = nn::Vocab::whitespace_tokens(sentence);
  std::vector<std::string> words;
  for (const Highlight& h : e.highlights) {
    if (h.origin != origin) continue;
    for (std::size_t i = h.token_begin; i < h.token_end && i < tokens.size();
         ++i)
      words.push_back(tokens[i]);
  }
  return join(words, " ");
}

}  // namespace

std::vector<nn::SeqExample> build_nli_training(
    const std::vector<EsnliInstance>& esnli, bool highlights_only) {
  std::vector<nn::SeqExample> out;
  for (const EsnliInstance& e : esnli) {
    if (e.label == NliLabel::neutral)
      throw ContractError(
          "neutral record reached rationalizer training; filter first");
    std::string p = highlights_only ? highlight_words(e, "premise") : e.premise;
    std::string h =
        highlights_only ? highlight_words(e, "hypothesis") : e.hypothesis;
    out.push_back({nli_input(p, h), nli_target(e.label, e.rationale)});
  }
  return out;
}

nn::TinyLm train_nli_rationalizer(const std::vector<EsnliInstance>& esnli,
                                  bool highlights_only,
                                  const nn::LmConfig& config, int epochs,
                                  nn::LmTrainReport* report) {
  if (esnli.empty()) throw ContractError("empty rationalizer training set");
  std::vector<nn::SeqExample> examples =
      build_nli_training(esnli, highlights_only);
  nn::TinyLm lm = nn::TinyLm::create(examples, config);
  nn::LmTrainReport r = lm.train(examples, epochs);
  if (report) *report = std::move(r);
  return lm;
}

NliGenResult generate_nli_derived(const nn::Seq2SeqModel& model,
                                  const DefeasibleInstance& inst,
                                  bool highlights_only,
                                  const std::vector<SalientSpan>* grammatical,
                                  std::size_t* parse_failures,
                                  const std::optional<DecodingConfig>& decoding) {
  // the update is folded into the premise side
  std::string premise = with_period(inst.premise) + " " + with_period(inst.update);
  std::string hypothesis = inst.hypothesis;
  if (highlights_only) {
    if (!grammatical || grammatical->empty())
      throw ContractError(
          "highlights variant needs the instance's salient spans");
    std::vector<std::string> from_u, from_h;
    for (const SalientSpan& s : *grammatical) {
      (s.origin == SpanOrigin::update ? from_u : from_h).push_back(s.text());
    }
    premise = join(from_u, " ");
    hypothesis = join(from_h, " ");
  }

  NliGenResult result;
  std::string input = nli_input(premise, hypothesis);
  result.raw = model.generate_one(input);

  static const std::string delim = "explanation:";
  std::size_t pos = result.raw.find(delim);
  if (pos == std::string::npos) {
    if (parse_failures) ++*parse_failures;
    return result;
  }
  result.label_text = normalize_ws(result.raw.substr(0, pos));
  std::string rationale = normalize_ws(result.raw.substr(pos + delim.size()));
  if (rationale.empty()) {
    if (parse_failures) ++*parse_failures;
    return result;
  }
  if (result.label_text == "entailment")
    result.label = NliLabel::entailment;
  else if (result.label_text == "contradiction")
    result.label = NliLabel::contradiction;
  else if (result.label_text == "neutral")
    result.label = NliLabel::neutral;

  RationaleCandidate cand;
  cand.text = capitalize_first(with_period(rationale));
  cand.source = highlights_only ? RationaleSource::nli_derived_highlights
                                : RationaleSource::nli_derived;
  cand.prompt = input;
  cand.decoding = decoding;
  result.candidate = std::move(cand);
  result.ok = true;
  return result;
}

UpdateType map_label_to_update_type(NliLabel label) {
  if (label == NliLabel::entailment) return UpdateType::strengthener;
  if (label == NliLabel::contradiction) return UpdateType::weakener;
  throw ContractError("neutral has no update-type mapping");
}

}  // namespace dfr
