#include "dfr/corpus.hpp"

#include <nlohmann/json.hpp>

#include "dfr/tokenize.hpp"

namespace dfr {

using json = nlohmann::ordered_json;

std::string to_string(UpdateType t) {
  return t == UpdateType::strengthener ? "strengthener" : "weakener";
}
std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    default: return "test";
  }
}
std::string to_string(NliLabel l) {
  switch (l) {
    case NliLabel::entailment: return "entailment";
    case NliLabel::contradiction: return "contradiction";
    default: return "neutral";
  }
}

UpdateType update_type_from_string(const std::string& s) {
  if (s == "strengthener") return UpdateType::strengthener;
  if (s == "weakener") return UpdateType::weakener;
  throw ValueError("unknown update_type: '" + s +
                   "' (expected strengthener or weakener)");
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw ValueError("unknown split: '" + s + "'");
}

NliLabel nli_label_from_string(const std::string& s) {
  if (s == "entailment") return NliLabel::entailment;
  if (s == "contradiction") return NliLabel::contradiction;
  if (s == "neutral") return NliLabel::neutral;
  throw ValueError("unknown NLI label: '" + s + "'");
}

std::string instance_id(const std::string& premise,
                        const std::string& hypothesis,
                        const std::string& update) {
  std::string key = normalize_ws(premise);
  key += '\x1f';
  key += normalize_ws(hypothesis);
  key += '\x1f';
  key += normalize_ws(update);
  return hex64(fnv1a64(key));
}

std::string to_string(RationaleSource s) {
  switch (s) {
    case RationaleSource::vanilla_lm: return "vanilla_lm";
    case RationaleSource::kg_lm: return "kg_lm";
    case RationaleSource::knowledge_model: return "knowledge_model";
    case RationaleSource::nli_derived: return "nli_derived";
    default: return "nli_derived_highlights";
  }
}

RationaleSource rationale_source_from_string(const std::string& s) {
  if (s == "vanilla_lm") return RationaleSource::vanilla_lm;
  if (s == "kg_lm") return RationaleSource::kg_lm;
  if (s == "knowledge_model") return RationaleSource::knowledge_model;
  if (s == "nli_derived") return RationaleSource::nli_derived;
  if (s == "nli_derived_highlights")
    return RationaleSource::nli_derived_highlights;
  throw ValueError("unknown rationale source: '" + s + "'");
}

int source_priority(RationaleSource s) {
  switch (s) {
    case RationaleSource::nli_derived: return 0;
    case RationaleSource::nli_derived_highlights: return 1;
    case RationaleSource::knowledge_model: return 2;
    case RationaleSource::kg_lm: return 3;
    default: return 4;  // vanilla_lm
  }
}

void DecodingConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw ValueError("nucleus mass p must be in (0, 1]");
  if (!(temperature > 0.0)) throw ValueError("temperature must be positive");
  if (num_return < 1) throw ValueError("num_return must be >= 1");
  if (max_new_tokens < 1) throw ValueError("max_new_tokens must be >= 1");
  if (strategy == DecodingStrategy::beam && beam_size < 1)
    throw ValueError("beam_size must be >= 1");
}

namespace {

std::string require_text_field(const json& rec, const char* lower,
                               const char* published, int line_no) {
  const json* v = nullptr;
  if (rec.contains(lower)) v = &rec[lower];
  else if (rec.contains(published)) v = &rec[published];
  if (!v || !v->is_string())
    throw SchemaError("line " + std::to_string(line_no) +
                      ": missing field '" + lower + "'");
  std::string text = normalize_ws(v->get<std::string>());
  if (text.empty())
    throw SchemaError("line " + std::to_string(line_no) + ": field '" +
                      lower + "' is empty");
  return text;
}

json parse_record(const std::string& line, int line_no) {
  json rec = json::parse(line, nullptr, false);
  if (rec.is_discarded() || !rec.is_object())
    throw SchemaError("line " + std::to_string(line_no) +
                      ": not a JSON object");
  return rec;
}

}  // namespace

std::vector<DefeasibleInstance> load_dnli(const std::string& path) {
  return load_dnli(path, std::nullopt);
}

std::vector<DefeasibleInstance> load_dnli(const std::string& path,
                                          std::optional<Split> default_split) {
  std::vector<DefeasibleInstance> out;
  int line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (normalize_ws(line).empty()) continue;
    json rec = parse_record(line, line_no);
    DefeasibleInstance inst;
    inst.premise = require_text_field(rec, "premise", "Premise", line_no);
    inst.hypothesis = require_text_field(rec, "hypothesis", "Hypothesis", line_no);
    inst.update = require_text_field(rec, "update", "Update", line_no);
    std::string type_str =
        require_text_field(rec, "update_type", "UpdateType", line_no);
    try {
      inst.update_type = update_type_from_string(type_str);
    } catch (const ValueError& e) {
      throw ValueError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (rec.contains("split") && rec["split"].is_string()) {
      inst.split = split_from_string(rec["split"].get<std::string>());
    } else if (rec.contains("Split") && rec["Split"].is_string()) {
      inst.split = split_from_string(rec["Split"].get<std::string>());
    } else if (default_split) {
      inst.split = *default_split;
    } else {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": missing field 'split'");
    }
    inst.id = rec.contains("id") && rec["id"].is_string()
                  ? rec["id"].get<std::string>()
                  : instance_id(inst.premise, inst.hypothesis, inst.update);
    out.push_back(std::move(inst));
  }
  return out;
}

namespace {

// Highlight spans from an e-SNLI marked sentence ("a *dog* *runs* fast").
std::vector<Highlight> highlights_from_marked(const std::string& marked,
                                              const std::string& origin) {
  std::vector<bool> token_marked;
  bool inside = false;
  for (const std::string& piece : split(marked, '*')) {
    std::size_t n = tokenize(piece).size();
    for (std::size_t i = 0; i < n; ++i) token_marked.push_back(inside);
    inside = !inside;
  }
  std::vector<Highlight> spans;
  std::size_t i = 0;
  while (i < token_marked.size()) {
    if (!token_marked[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < token_marked.size() && token_marked[j]) ++j;
    spans.push_back({origin, i, j});
    i = j;
  }
  return spans;
}

void validate_highlights(const EsnliInstance& inst, int line_no) {
  std::size_t np = tokenize(inst.premise).size();
  std::size_t nh = tokenize(inst.hypothesis).size();
  for (const Highlight& h : inst.highlights) {
    std::size_t limit = h.origin == "premise" ? np : nh;
    if (h.token_begin >= h.token_end || h.token_end > limit)
      throw SchemaError("line " + std::to_string(line_no) +
                        ": highlight span out of token range");
  }
}

std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else {
      field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<EsnliInstance> load_esnli_csv(const std::string& path) {
  auto rows = parse_csv(read_file(path));
  if (rows.empty()) return {};
  const auto& header = rows.front();
  auto col = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  int c_p = col("Sentence1"), c_h = col("Sentence2"), c_l = col("gold_label");
  int c_r = col("Explanation_1");
  int c_pm = col("Sentence1_marked_1"), c_hm = col("Sentence2_marked_1");
  if (c_p < 0 || c_h < 0 || c_l < 0 || c_r < 0)
    throw SchemaError("e-SNLI csv missing required columns in: " + path);

  std::vector<EsnliInstance> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto get = [&](int c) -> std::string {
      return c >= 0 && c < static_cast<int>(row.size()) ? row[c] : "";
    };
    EsnliInstance inst;
    inst.premise = normalize_ws(get(c_p));
    inst.hypothesis = normalize_ws(get(c_h));
    inst.rationale = normalize_ws(get(c_r));
    inst.label = nli_label_from_string(normalize_ws(get(c_l)));
    for (auto& h : highlights_from_marked(get(c_pm), "premise"))
      inst.highlights.push_back(h);
    for (auto& h : highlights_from_marked(get(c_hm), "hypothesis"))
      inst.highlights.push_back(h);
    validate_highlights(inst, static_cast<int>(r) + 1);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace

std::vector<EsnliInstance> load_esnli(const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".csv")
    return load_esnli_csv(path);
  std::vector<EsnliInstance> out;
  int line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (normalize_ws(line).empty()) continue;
    json rec = parse_record(line, line_no);
    EsnliInstance inst;
    inst.premise = require_text_field(rec, "premise", "Sentence1", line_no);
    inst.hypothesis = require_text_field(rec, "hypothesis", "Sentence2", line_no);
    if (!rec.contains("label"))
      throw SchemaError("line " + std::to_string(line_no) +
                        ": missing field 'label'");
    inst.label = nli_label_from_string(rec["label"].get<std::string>());
    inst.rationale = rec.value("rationale", "");
    if (rec.contains("highlights")) {
      for (const auto& h : rec["highlights"]) {
        inst.highlights.push_back({h.at("origin").get<std::string>(),
                                   h.at("begin").get<std::size_t>(),
                                   h.at("end").get<std::size_t>()});
      }
    }
    validate_highlights(inst, line_no);
    out.push_back(std::move(inst));
  }
  return out;
}

namespace {

json candidate_to_json(const RationaleCandidate& c) {
  json j;
  j["text"] = c.text;
  j["source"] = to_string(c.source);
  if (c.score) j["score"] = *c.score;
  else j["score"] = nullptr;
  j["prompt"] = c.prompt;
  if (c.decoding) {
    const DecodingConfig& d = *c.decoding;
    j["decoding"] = {
        {"strategy", d.strategy == DecodingStrategy::nucleus ? "nucleus" : "beam"},
        {"p", d.p},
        {"temperature", d.temperature},
        {"max_new_tokens", d.max_new_tokens},
        {"num_return", d.num_return},
        {"beam_size", d.beam_size},
        {"seed", d.seed},
    };
  }
  return j;
}

RationaleCandidate candidate_from_json(const json& j) {
  RationaleCandidate c;
  c.text = j.at("text").get<std::string>();
  c.source = rationale_source_from_string(j.at("source").get<std::string>());
  if (j.contains("score") && !j["score"].is_null())
    c.score = j["score"].get<double>();
  c.prompt = j.value("prompt", "");
  if (j.contains("decoding")) {
    const json& d = j["decoding"];
    DecodingConfig cfg;
    cfg.strategy = d.at("strategy").get<std::string>() == "beam"
                       ? DecodingStrategy::beam
                       : DecodingStrategy::nucleus;
    cfg.p = d.at("p").get<double>();
    cfg.temperature = d.at("temperature").get<double>();
    cfg.max_new_tokens = d.at("max_new_tokens").get<int>();
    cfg.num_return = d.at("num_return").get<int>();
    cfg.beam_size = d.at("beam_size").get<int>();
    cfg.seed = d.at("seed").get<std::uint64_t>();
    c.decoding = cfg;
  }
  return c;
}

}  // namespace

std::string serialize_dataset(const std::vector<AugmentedInstance>& instances) {
  std::string out;
  for (const AugmentedInstance& a : instances) {
    json j;
    j["id"] = a.instance.id;
    j["premise"] = a.instance.premise;
    j["hypothesis"] = a.instance.hypothesis;
    j["update"] = a.instance.update;
    j["update_type"] = to_string(a.instance.update_type);
    j["split"] = to_string(a.instance.split);
    json rats = json::array();
    for (const auto& c : a.kept) rats.push_back(candidate_to_json(c));
    j["rationales"] = rats;
    json cands = json::array();
    for (const auto& c : a.candidates) cands.push_back(candidate_to_json(c));
    j["candidates"] = cands;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const std::vector<AugmentedInstance>& instances,
                   const std::string& path) {
  try {
    write_file(path, serialize_dataset(instances));
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (writing dataset " + path + ")");
  }
}

std::vector<AugmentedInstance> read_dataset(const std::string& path) {
  std::vector<AugmentedInstance> out;
  int line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (normalize_ws(line).empty()) continue;
    json j = parse_record(line, line_no);
    AugmentedInstance a;
    a.instance.id = j.at("id").get<std::string>();
    a.instance.premise = j.at("premise").get<std::string>();
    a.instance.hypothesis = j.at("hypothesis").get<std::string>();
    a.instance.update = j.at("update").get<std::string>();
    a.instance.update_type =
        update_type_from_string(j.at("update_type").get<std::string>());
    a.instance.split = split_from_string(j.at("split").get<std::string>());
    for (const auto& c : j.at("rationales")) a.kept.push_back(candidate_from_json(c));
    for (const auto& c : j.at("candidates"))
      a.candidates.push_back(candidate_from_json(c));
    out.push_back(std::move(a));
  }
  return out;
}

std::size_t expanded_row_count(const std::vector<AugmentedInstance>& instances) {
  std::size_t n = 0;
  for (const auto& a : instances) n += a.kept.size();
  return n;
}

}  // namespace dfr
