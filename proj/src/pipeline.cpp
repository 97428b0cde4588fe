#include "dfr/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>

#include "dfr/annotator.hpp"
#include "dfr/corpus.hpp"
#include "dfr/embeddings.hpp"
#include "dfr/eval.hpp"
#include "dfr/filter.hpp"
#include "dfr/saliency.hpp"
#include "dfr/sources.hpp"
#include "dfr/trainer.hpp"

namespace dfr {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::collect: return "collect";
    case Stage::filter: return "filter";
    case Stage::build_dataset: return "build-dataset";
    case Stage::train: return "train";
    case Stage::generate: return "generate";
    default: return "evaluate";
  }
}

Stage stage_from_string(const std::string& s) {
  if (s == "collect") return Stage::collect;
  if (s == "filter") return Stage::filter;
  if (s == "build-dataset") return Stage::build_dataset;
  if (s == "train") return Stage::train;
  if (s == "generate") return Stage::generate;
  if (s == "evaluate") return Stage::evaluate;
  throw ValueError("unknown stage: " + s);
}

namespace {

std::string default_data_dir() {
#ifdef DFR_DATA_DIR
  return DFR_DATA_DIR;
#else
  return "data";
#endif
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValueError("expected a boolean, got: " + v);
}

}  // namespace

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  PipelineConfig config;
  config.data_dir = default_data_dir();
  int line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    std::string t = normalize_ws(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw SchemaError(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    std::string key = normalize_ws(t.substr(0, eq));
    std::string value = normalize_ws(t.substr(eq + 1));
    try {
      config.apply(key, value);
    } catch (const std::exception& e) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

void PipelineConfig::apply(const std::string& key, const std::string& value) {
  if (key == "train_path") train_path = value;
  else if (key == "dev_path") dev_path = value;
  else if (key == "test_path") test_path = value;
  else if (key == "esnli_path") esnli_path = value;
  else if (key == "triplets_path") triplets_path = value;
  else if (key == "ifthen_path") ifthen_path = value;
  else if (key == "embeddings_path") embeddings_path = value;
  else if (key == "data_dir") data_dir = value;
  else if (key == "work_dir") work_dir = value;
  else if (key == "sources") {
    sources.clear();
    for (const std::string& s : split(value, ',')) {
      std::string name = normalize_ws(s);
      if (name.empty()) continue;
      rationale_source_from_string(name);  // validates
      sources.push_back(name);
    }
    if (sources.empty()) throw ValueError("sources must not be empty");
  } else if (key == "saliency_ratio") saliency_ratio = std::stod(value);
  else if (key == "span_pairs") span_pairs = std::stoi(value);
  else if (key == "vanilla_p") vanilla_p = std::stod(value);
  else if (key == "vanilla_temperature") vanilla_temperature = std::stod(value);
  else if (key == "vanilla_samples") vanilla_samples = std::stoi(value);
  else if (key == "kg_p") kg_p = std::stod(value);
  else if (key == "kg_temperature") kg_temperature = std::stod(value);
  else if (key == "kg_samples") kg_samples = std::stoi(value);
  else if (key == "max_rationale_tokens") max_rationale_tokens = std::stoi(value);
  else if (key == "km_beam") km_beam = std::stoi(value);
  else if (key == "kb_epochs") kb_epochs = std::stoi(value);
  else if (key == "filter_ratio") filter_ratio = std::stod(value);
  else if (key == "no_filter") no_filter = parse_bool(value);
  else if (key == "setup") {
    training_setup_from_string(value);  // validates
    setup = value;
  } else if (key == "backend") {
    if (value != "decoder_only" && value != "encoder_decoder")
      throw ValueError("backend must be decoder_only or encoder_decoder");
    backend = value;
  } else if (key == "epochs") epochs = std::stoi(value);
  else if (key == "lm_dim") lm_dim = std::stoi(value);
  else if (key == "lm_max_len") lm_max_len = std::stoi(value);
  else if (key == "classifier_epochs") classifier_epochs = std::stoi(value);
  else if (key == "generation_beam") generation_beam = std::stoi(value);
  else if (key == "smooth_bleu") smooth_bleu = parse_bool(value);
  else if (key == "seed") seed = std::stoull(value);
  else throw SchemaError("unknown configuration key: " + key);
}

std::string PipelineConfig::to_text() const {
  std::ostringstream out;
  out << "train_path = " << train_path << "\n";
  out << "dev_path = " << dev_path << "\n";
  out << "test_path = " << test_path << "\n";
  out << "esnli_path = " << esnli_path << "\n";
  out << "triplets_path = " << triplets_path << "\n";
  out << "ifthen_path = " << ifthen_path << "\n";
  out << "embeddings_path = " << embeddings_path << "\n";
  out << "data_dir = " << data_dir << "\n";
  out << "work_dir = " << work_dir << "\n";
  out << "sources = " << join(sources, ",") << "\n";
  out << "saliency_ratio = " << saliency_ratio << "\n";
  out << "span_pairs = " << span_pairs << "\n";
  out << "vanilla_p = " << vanilla_p << "\n";
  out << "vanilla_temperature = " << vanilla_temperature << "\n";
  out << "vanilla_samples = " << vanilla_samples << "\n";
  out << "kg_p = " << kg_p << "\n";
  out << "kg_temperature = " << kg_temperature << "\n";
  out << "kg_samples = " << kg_samples << "\n";
  out << "max_rationale_tokens = " << max_rationale_tokens << "\n";
  out << "km_beam = " << km_beam << "\n";
  out << "kb_epochs = " << kb_epochs << "\n";
  out << "filter_ratio = " << filter_ratio << "\n";
  out << "no_filter = " << (no_filter ? "true" : "false") << "\n";
  out << "setup = " << setup << "\n";
  out << "backend = " << backend << "\n";
  out << "epochs = " << epochs << "\n";
  out << "lm_dim = " << lm_dim << "\n";
  out << "lm_max_len = " << lm_max_len << "\n";
  out << "classifier_epochs = " << classifier_epochs << "\n";
  out << "generation_beam = " << generation_beam << "\n";
  out << "smooth_bleu = " << (smooth_bleu ? "true" : "false") << "\n";
  out << "seed = " << seed << "\n";
  return out.str();
}

std::string PipelineConfig::cache_root() const {
  const char* env = std::getenv("DFR_CACHE_ROOT");
  if (env && *env) return env;
  return work_dir;
}

bool PipelineConfig::source_enabled(const std::string& name) const {
  return std::find(sources.begin(), sources.end(), name) != sources.end();
}

namespace {

std::string file_hash(const std::string& path) {
  return hex64(fnv1a64(read_file(path)));
}

std::string artifact(const PipelineConfig& c, const std::string& name) {
  return (fs::path(c.work_dir) / name).string();
}

void require_upstream(const std::string& path, const std::string& stage) {
  if (!fs::exists(path))
    throw ContractError("missing " + path + "; run the " + stage +
                        " stage first");
}

// Inputs hashed into a stage's cache key: raw files for collect, upstream
// artifacts afterwards.
std::vector<std::string> stage_inputs(Stage stage, const PipelineConfig& c) {
  std::vector<std::string> paths;
  auto add = [&](const std::string& p) {
    if (!p.empty()) paths.push_back(p);
  };
  switch (stage) {
    case Stage::collect:
      add(c.train_path);
      add(c.dev_path);
      add(c.test_path);
      add(c.esnli_path);
      add(c.triplets_path);
      add(c.ifthen_path);
      add(c.embeddings_path);
      add(c.data_dir + "/stopwords.txt");
      add(c.data_dir + "/verbs.txt");
      add(c.data_dir + "/relation_templates.tsv");
      add(c.data_dir + "/ifthen_templates.tsv");
      break;
    case Stage::filter:
      add(artifact(c, "candidates.jsonl"));
      add(c.esnli_path);
      break;
    case Stage::build_dataset:
      add(artifact(c, "filtered.jsonl"));
      break;
    case Stage::train:
      add(artifact(c, "dataset.jsonl"));
      break;
    case Stage::generate:
      add(artifact(c, "model.bin"));
      add(artifact(c, "model_meta.json"));
      add(artifact(c, "dataset.jsonl"));
      break;
    case Stage::evaluate:
      add(artifact(c, "generations.jsonl"));
      add(artifact(c, "dataset.jsonl"));
      break;
  }
  return paths;
}

std::vector<std::string> stage_outputs(Stage stage, const PipelineConfig& c) {
  switch (stage) {
    case Stage::collect: return {artifact(c, "candidates.jsonl")};
    case Stage::filter:
      return {artifact(c, "filtered.jsonl"), artifact(c, "filter_report.json"),
              artifact(c, "filter_report.txt")};
    case Stage::build_dataset:
      return {artifact(c, "dataset.jsonl"), artifact(c, "dataset_stats.txt")};
    case Stage::train:
      return {artifact(c, "model.bin"), artifact(c, "model_meta.json"),
              artifact(c, "train_report.json")};
    case Stage::generate: return {artifact(c, "generations.jsonl")};
    default: return {artifact(c, "eval_report.json")};
  }
}

std::string upstream_stage_name(Stage stage) {
  switch (stage) {
    case Stage::filter: return "collect";
    case Stage::build_dataset: return "filter";
    case Stage::train: return "build-dataset";
    case Stage::generate: return "train";
    case Stage::evaluate: return "generate";
    default: return "";
  }
}

std::vector<DefeasibleInstance> load_corpus(const PipelineConfig& c) {
  std::vector<DefeasibleInstance> all = load_dnli(c.train_path, Split::train);
  if (!c.dev_path.empty()) {
    auto dev = load_dnli(c.dev_path, Split::dev);
    all.insert(all.end(), dev.begin(), dev.end());
  }
  if (!c.test_path.empty()) {
    auto test = load_dnli(c.test_path, Split::test);
    all.insert(all.end(), test.begin(), test.end());
  }
  std::sort(all.begin(), all.end(),
            [](const DefeasibleInstance& a, const DefeasibleInstance& b) {
              return a.id < b.id;
            });
  return all;
}

std::vector<EsnliInstance> load_binary_esnli(const PipelineConfig& c) {
  if (c.esnli_path.empty())
    throw ContractError("esnli_path is required for this stage");
  std::vector<EsnliInstance> all = load_esnli(c.esnli_path);
  std::vector<EsnliInstance> binary;
  for (EsnliInstance& e : all)
    if (e.label != NliLabel::neutral) binary.push_back(std::move(e));
  if (binary.empty())
    throw ContractError("no entailment/contradiction records in " +
                        c.esnli_path);
  return binary;
}

// ---------------------------------------------------------------- collect

void run_collect(const PipelineConfig& c, WarningLog& warnings) {
  std::vector<DefeasibleInstance> all = load_corpus(c);
  std::vector<DefeasibleInstance> train_split;
  for (const DefeasibleInstance& i : all)
    if (i.split == Split::train) train_split.push_back(i);
  if (train_split.empty())
    throw ContractError("no training-split instances in the corpus");

  Annotator annotator = Annotator::from_data_dir(c.data_dir);
  Embeddings embeddings = c.embeddings_path.empty()
                              ? Embeddings::hashed(32, c.seed)
                              : Embeddings::from_file(c.embeddings_path);

  bool want_lm_prompts =
      c.source_enabled("vanilla_lm") || c.source_enabled("kg_lm");
  bool want_highlights = c.source_enabled("nli_derived_highlights");
  bool need_saliency = want_lm_prompts || want_highlights;

  nn::ClassifierConfig clf_cfg;
  clf_cfg.seed = c.seed;
  clf_cfg.epochs = c.classifier_epochs;
  nn::AttentionClassifier type_clf;
  if (need_saliency)
    type_clf = train_type_classifier(train_split, clf_cfg);

  // shared corpus LM; the KG variant continues training on verbalized
  // triplets
  nn::TinyLm corpus_lm;
  if (want_lm_prompts) {
    std::vector<nn::SeqExample> texts;
    for (const DefeasibleInstance& i : all) {
      texts.push_back({"", i.premise});
      texts.push_back({"", i.hypothesis});
      texts.push_back({"", i.update});
    }
    nn::LmConfig lm_cfg;
    lm_cfg.dim = c.lm_dim;
    lm_cfg.ffn = 2 * c.lm_dim;
    lm_cfg.max_len = c.lm_max_len;
    lm_cfg.seed = c.seed;
    corpus_lm = nn::TinyLm::create(texts, lm_cfg);
    corpus_lm.train(texts, 2);
  }

  bool have_kg = false;
  nn::TinyLm kg_lm;
  if (c.source_enabled("kg_lm")) {
    if (c.triplets_path.empty()) {
      warnings.add("kg_lm enabled but no triplets_path; source skipped");
    } else {
      RelationTemplates rel_templates =
          RelationTemplates::from_data_dir(c.data_dir);
      std::vector<std::string> verbalized;
      for (const KnowledgeTriplet& t : load_triplets(c.triplets_path))
        verbalized.push_back(rel_templates.verbalize(t));
      kg_lm = kb_pretrain(corpus_lm, verbalized, c.kb_epochs);
      have_kg = true;
    }
  }

  IfThenTemplates it_templates = IfThenTemplates::from_data_dir(c.data_dir);
  TableIfThenModel table_km;
  StubIfThenModel stub_km(&annotator);
  const nn::IfThenModel* km = &stub_km;
  if (!c.ifthen_path.empty()) {
    table_km = TableIfThenModel::from_file(c.ifthen_path);
    km = &table_km;
  }

  nn::TinyLm nli_lm, nli_hl_lm;
  bool have_nli = false, have_nli_hl = false;
  if (c.source_enabled("nli_derived") || want_highlights) {
    std::vector<EsnliInstance> esnli = load_binary_esnli(c);
    nn::LmConfig nli_cfg;
    nli_cfg.dim = c.lm_dim;
    nli_cfg.ffn = 2 * c.lm_dim;
    nli_cfg.max_len = c.lm_max_len;
    nli_cfg.seed = c.seed + 1;
    if (c.source_enabled("nli_derived")) {
      nli_lm = train_nli_rationalizer(esnli, false, nli_cfg,
                                      c.classifier_epochs);
      have_nli = true;
    }
    if (want_highlights) {
      nli_cfg.seed = c.seed + 2;
      nli_hl_lm = train_nli_rationalizer(esnli, true, nli_cfg,
                                         c.classifier_epochs);
      have_nli_hl = true;
    }
  }

  DecodingConfig nli_dec;
  nli_dec.strategy = DecodingStrategy::beam;
  nli_dec.beam_size = c.generation_beam;
  nli_dec.num_return = 1;
  nli_dec.max_new_tokens = 64;

  std::size_t nli_parse_failures = 0;
  std::vector<AugmentedInstance> out;
  out.reserve(all.size());

  for (const DefeasibleInstance& inst : all) {
    AugmentedInstance aug;
    aug.instance = inst;

    std::vector<SalientSpan> grammatical;
    if (need_saliency) {
      TokenSaliency saliency = score_tokens(type_clf, inst, &warnings);
      std::vector<SalientSpan> spans = extract_salient_spans(
          saliency, inst.hypothesis, inst.update, c.saliency_ratio);
      grammatical = grammatical_filter(spans, inst.hypothesis, inst.update,
                                       annotator, &warnings);
    }

    if (want_lm_prompts) {
      std::vector<Prompt> prompts;
      for (const SalientSpan& s : grammatical) {
        PromptKind kind = (s.category == SpanCategory::noun_phrase ||
                           s.category == SpanCategory::head_noun)
                              ? PromptKind::definition
                              : PromptKind::purpose;
        prompts.push_back(build_prompt(kind, s, inst));
      }
      try {
        for (const SpanPair& pair :
             select_span_pairs(grammatical, embeddings, c.span_pairs, &warnings))
          prompts.push_back(build_prompt(pair, inst));
      } catch (const ContractError& e) {
        warnings.add("no span pairs for instance " + inst.id + ": " + e.what());
      }

      if (c.source_enabled("vanilla_lm")) {
        DecodingConfig dec = vanilla_decoding(c.seed);
        dec.p = c.vanilla_p;
        dec.temperature = c.vanilla_temperature;
        dec.num_return = c.vanilla_samples;
        dec.max_new_tokens = c.max_rationale_tokens;
        auto cands = generate_from_prompts(corpus_lm, prompts, dec,
                                           RationaleSource::vanilla_lm,
                                           &warnings);
        aug.candidates.insert(aug.candidates.end(), cands.begin(), cands.end());
      }
      if (have_kg) {
        DecodingConfig dec = kg_decoding(c.seed);
        dec.p = c.kg_p;
        dec.temperature = c.kg_temperature;
        dec.num_return = c.kg_samples;
        dec.max_new_tokens = c.max_rationale_tokens;
        auto cands = generate_from_prompts(kg_lm, prompts, dec,
                                           RationaleSource::kg_lm, &warnings);
        aug.candidates.insert(aug.candidates.end(), cands.begin(), cands.end());
      }
    }

    if (c.source_enabled("knowledge_model")) {
      auto cands = generate_knowledge_model(*km, inst, annotator, it_templates,
                                            c.km_beam, &warnings);
      aug.candidates.insert(aug.candidates.end(), cands.begin(), cands.end());
    }

    if (have_nli) {
      TinyLmSeq2Seq model(&nli_lm, c.generation_beam, 64);
      NliGenResult r = generate_nli_derived(model, inst, false, nullptr,
                                            &nli_parse_failures, nli_dec);
      if (r.ok) aug.candidates.push_back(*r.candidate);
    }
    if (have_nli_hl) {
      if (grammatical.empty()) {
        warnings.add("no salient spans for instance " + inst.id +
                     "; highlights source skipped");
      } else {
        TinyLmSeq2Seq model(&nli_hl_lm, c.generation_beam, 64);
        NliGenResult r = generate_nli_derived(model, inst, true, &grammatical,
                                              &nli_parse_failures, nli_dec);
        if (r.ok) aug.candidates.push_back(*r.candidate);
      }
    }

    out.push_back(std::move(aug));
  }

  if (nli_parse_failures > 0)
    warnings.add(std::to_string(nli_parse_failures) +
                 " NLI-derived outputs failed to parse and were dropped");
  write_dataset(out, artifact(c, "candidates.jsonl"));
}

// ----------------------------------------------------------------- filter

void run_filter(const PipelineConfig& c, WarningLog& warnings) {
  require_upstream(artifact(c, "candidates.jsonl"), "collect");
  std::vector<AugmentedInstance> instances =
      read_dataset(artifact(c, "candidates.jsonl"));

  FilterReport report;
  if (c.no_filter) {
    for (AugmentedInstance& aug : instances) {
      Rng rng(c.seed ^ fnv1a64(aug.instance.id));
      aug.kept = pick_random_per_source(aug.candidates, rng);
      report.add(aug.candidates, aug.kept);
    }
  } else {
    std::vector<EsnliInstance> esnli = load_binary_esnli(c);
    nn::ClassifierConfig clf_cfg;
    clf_cfg.seed = c.seed + 3;
    clf_cfg.epochs = c.classifier_epochs;
    nn::AttentionClassifier scorer =
        train_filter_classifier(esnli, clf_cfg);
    std::size_t max_tokens = static_cast<std::size_t>(clf_cfg.max_len);

    for (AugmentedInstance& aug : instances) {
      if (aug.candidates.empty()) {
        warnings.add("no candidates for instance " + aug.instance.id);
        aug.kept.clear();
        report.add(aug.candidates, aug.kept);
        continue;
      }
      std::vector<FilterScore> scores;
      scores.reserve(aug.candidates.size());
      for (const RationaleCandidate& cand : aug.candidates)
        scores.push_back(score_rationale(scorer, aug.instance, cand.text,
                                         max_tokens, &warnings));
      aug.kept = rank_and_keep(aug.candidates, scores, c.filter_ratio);
      report.add(aug.candidates, aug.kept);
    }
  }

  write_dataset(instances, artifact(c, "filtered.jsonl"));
  write_file(artifact(c, "filter_report.txt"), report.to_text());

  json j;
  j["total_candidates"] = report.total_candidates;
  j["total_kept"] = report.total_kept;
  j["no_filter"] = c.no_filter;
  j["per_source"] = json::object();
  for (const auto& [source, r] : report.per_source) {
    j["per_source"][source] = {{"candidates", r.candidates}, {"kept", r.kept}};
  }
  write_file(artifact(c, "filter_report.json"), j.dump(2) + "\n");
}

// ---------------------------------------------------------- build-dataset

void run_build_dataset(const PipelineConfig& c, WarningLog& warnings) {
  require_upstream(artifact(c, "filtered.jsonl"), "filter");
  std::vector<AugmentedInstance> instances =
      read_dataset(artifact(c, "filtered.jsonl"));

  std::size_t with_rationales = 0;
  std::size_t per_split[3] = {0, 0, 0};
  std::size_t kept_total = 0;
  for (const AugmentedInstance& aug : instances) {
    ++per_split[static_cast<int>(aug.instance.split)];
    kept_total += aug.kept.size();
    if (!aug.kept.empty()) ++with_rationales;
  }
  if (with_rationales == 0)
    warnings.add("dataset has no rationales at all; downstream training "
                 "will fail");

  write_dataset(instances, artifact(c, "dataset.jsonl"));

  std::ostringstream stats;
  stats << "instances: " << instances.size() << "\n";
  stats << "train: " << per_split[0] << "\n";
  stats << "dev: " << per_split[1] << "\n";
  stats << "test: " << per_split[2] << "\n";
  stats << "with_rationales: " << with_rationales << "\n";
  stats << "kept_rationales: " << kept_total << "\n";
  stats << "expanded_rows: " << expanded_row_count(instances) << "\n";
  write_file(artifact(c, "dataset_stats.txt"), stats.str());
}

// ------------------------------------------------------------------ train

nn::BackendFamily backend_family(const PipelineConfig& c) {
  if (c.backend == "decoder_only") return nn::BackendFamily::decoder_only;
  if (c.backend == "encoder_decoder") return nn::BackendFamily::encoder_decoder;
  throw ContractError("unknown backend: " + c.backend);
}

void run_train(const PipelineConfig& c, WarningLog& warnings) {
  require_upstream(artifact(c, "dataset.jsonl"), "build-dataset");
  std::vector<AugmentedInstance> instances =
      read_dataset(artifact(c, "dataset.jsonl"));
  std::vector<AugmentedInstance> train_split;
  for (AugmentedInstance& aug : instances)
    if (aug.instance.split == Split::train) train_split.push_back(std::move(aug));

  TrainingSetup setup = training_setup_from_string(c.setup);
  std::vector<TrainingExample> examples =
      expand_training_examples(train_split, setup);
  if (examples.empty())
    throw ContractError("no training examples; the dataset has no kept "
                        "rationales in the train split");

  nn::BackendFamily family = backend_family(c);
  nn::LmConfig lm_cfg;
  lm_cfg.dim = c.lm_dim;
  lm_cfg.ffn = 2 * c.lm_dim;
  lm_cfg.max_len = c.lm_max_len;
  lm_cfg.seed = c.seed;
  lm_cfg.family = family;

  nn::LmTrainReport train_report;
  GeneratorModel model =
      train_generator(family, examples, setup, lm_cfg, c.epochs, &train_report);
  model.lm.save(artifact(c, "model.bin"));

  json meta;
  meta["setup"] = c.setup;
  meta["backend"] = c.backend;
  meta["seed"] = c.seed;
  meta["examples"] = examples.size();
  write_file(artifact(c, "model_meta.json"), meta.dump(2) + "\n");

  json rep;
  rep["epoch_losses"] = train_report.epoch_losses;
  rep["seed"] = train_report.seed;
  rep["config_hash"] = hex64(fnv1a64(c.to_text()));
  write_file(artifact(c, "train_report.json"), rep.dump(2) + "\n");
  if (!train_report.epoch_losses.empty() &&
      train_report.epoch_losses.back() > 1.0)
    warnings.add("final training loss above 1 nat/token; the generator is "
                 "likely undertrained");
}

// --------------------------------------------------------------- generate

// The split decoded at generation time: test when present, else dev, else
// train (toy corpora often ship a single split).
Split generation_split(const std::vector<AugmentedInstance>& instances) {
  bool has_test = false, has_dev = false;
  for (const AugmentedInstance& aug : instances) {
    if (aug.instance.split == Split::test) has_test = true;
    if (aug.instance.split == Split::dev) has_dev = true;
  }
  if (has_test) return Split::test;
  if (has_dev) return Split::dev;
  return Split::train;
}

void run_generate(const PipelineConfig& c, WarningLog& warnings) {
  require_upstream(artifact(c, "model.bin"), "train");
  require_upstream(artifact(c, "model_meta.json"), "train");
  require_upstream(artifact(c, "dataset.jsonl"), "build-dataset");

  json meta = json::parse(read_file(artifact(c, "model_meta.json")));
  GeneratorModel model;
  model.lm = nn::TinyLm::load(artifact(c, "model.bin"));
  TrainingSetup setup =
      training_setup_from_string(meta.at("setup").get<std::string>());
  // a multi model is decoded under its rationale sub-setup
  model.setup = setup == TrainingSetup::multi ? TrainingSetup::rationale : setup;
  model.family = meta.at("backend").get<std::string>() == "decoder_only"
                     ? nn::BackendFamily::decoder_only
                     : nn::BackendFamily::encoder_decoder;

  std::vector<AugmentedInstance> instances =
      read_dataset(artifact(c, "dataset.jsonl"));
  Split split = generation_split(instances);

  bool needs_rationale_input = model.setup == TrainingSetup::update_type ||
                               model.setup == TrainingSetup::update;

  std::ostringstream out;
  for (const AugmentedInstance& aug : instances) {
    if (aug.instance.split != split) continue;
    std::string rationale_in;
    if (needs_rationale_input) {
      if (aug.kept.empty()) {
        warnings.add("instance " + aug.instance.id +
                     " has no rationale to condition on; skipped");
        continue;
      }
      rationale_in = aug.kept.front().text;
    }
    std::string text =
        generate(model, aug.instance, rationale_in, c.generation_beam);

    json row;
    row["id"] = aug.instance.id;
    row["setup"] = to_string(model.setup);
    row["output"] = text;
    try {
      ParsedGeneration parsed = parse_generated(text, model.setup);
      if (parsed.update_type)
        row["update_type"] = to_string(*parsed.update_type);
      if (parsed.update) row["update"] = *parsed.update;
      row["rationale"] = parsed.rationale;
    } catch (const GenerationParseError& e) {
      row["parse_error"] = e.what();
      warnings.add("unparseable generation for instance " + aug.instance.id);
    }
    out << row.dump() << "\n";
  }
  write_file(artifact(c, "generations.jsonl"), out.str());
}

// --------------------------------------------------------------- evaluate

void run_evaluate(const PipelineConfig& c, WarningLog& warnings) {
  require_upstream(artifact(c, "generations.jsonl"), "generate");
  require_upstream(artifact(c, "dataset.jsonl"), "build-dataset");

  std::vector<AugmentedInstance> instances =
      read_dataset(artifact(c, "dataset.jsonl"));
  std::unordered_map<std::string, const AugmentedInstance*> by_id;
  for (const AugmentedInstance& aug : instances)
    by_id[aug.instance.id] = &aug;

  std::vector<DefeasibleInstance> insts;
  std::vector<std::string> predictions;
  std::vector<std::vector<std::string>> references;
  std::size_t skipped = 0;
  std::string setup_name = "rationale";

  for (const std::string& line : read_lines(artifact(c, "generations.jsonl"))) {
    if (normalize_ws(line).empty()) continue;
    json row = json::parse(line);
    auto it = by_id.find(row.at("id").get<std::string>());
    if (it == by_id.end()) {
      ++skipped;
      continue;
    }
    const AugmentedInstance& aug = *it->second;
    setup_name = row.at("setup").get<std::string>();
    TrainingSetup setup = training_setup_from_string(setup_name);

    std::string prediction;
    std::vector<std::string> refs;
    if (setup == TrainingSetup::update) {
      prediction = row.value("update", "");
      refs = {aug.instance.update};
    } else if (setup == TrainingSetup::update_type) {
      prediction = row.value("update_type", "");
      refs = {to_string(aug.instance.update_type)};
    } else {
      prediction = row.value("rationale", "");
      for (const RationaleCandidate& r : aug.kept) refs.push_back(r.text);
      if (refs.empty()) {
        ++skipped;  // nothing to compare against
        continue;
      }
    }
    insts.push_back(aug.instance);
    predictions.push_back(prediction);
    references.push_back(std::move(refs));
  }
  if (predictions.empty())
    throw ContractError("no scorable generations; nothing to evaluate");
  if (skipped > 0)
    warnings.add(std::to_string(skipped) +
                 " generations skipped (unknown id or no references)");

  BleuOptions opts;
  opts.smooth = c.smooth_bleu;
  EvalReport report = evaluate_rationales(insts, predictions, references, opts);

  auto row_json = [](const MetricRow& r) {
    return json{{"bleu4", r.bleu4}, {"rougeL", r.rougeL}, {"n", r.n}};
  };
  json j;
  j["setup"] = setup_name;
  j["smoothed"] = report.smoothed;
  j["overall"] = row_json(report.overall);
  j["strengthener"] = row_json(report.strengthener);
  j["weakener"] = row_json(report.weakener);
  j["skipped"] = skipped;
  write_file(artifact(c, "eval_report.json"), j.dump(2) + "\n");
}

void write_manifest(Stage stage, const PipelineConfig& c,
                    const std::string& cache_key,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    const std::vector<std::string>& outputs,
                    const WarningLog& warnings,
                    const std::string& manifest_path) {
  json m;
  m["stage"] = to_string(stage);
  m["cache_key"] = cache_key;
  m["config_hash"] = hex64(fnv1a64(c.to_text()));
  m["seed"] = c.seed;
  m["inputs"] = json::object();
  for (const auto& [path, hash] : inputs) m["inputs"][path] = hash;
  m["outputs"] = json::array();
  for (const std::string& path : outputs) {
    m["outputs"].push_back(
        json{{"path", path}, {"hash", file_hash(path)}});
  }
  m["warnings"] = warnings.messages();
  write_file(manifest_path, m.dump(2) + "\n");
}

}  // namespace

StageResult run_stage(Stage stage, const PipelineConfig& config,
                      WarningLog* warnings) {
  fs::create_directories(config.work_dir);
  fs::create_directories(config.cache_root());

  std::string upstream = upstream_stage_name(stage);
  std::vector<std::pair<std::string, std::string>> input_hashes;
  for (const std::string& path : stage_inputs(stage, config)) {
    if (!fs::exists(path)) {
      if (!upstream.empty() &&
          fs::path(path).parent_path() == fs::path(config.work_dir))
        throw ContractError("missing " + path + "; run the " + upstream +
                            " stage first");
      throw IoError("missing input file: " + path);
    }
    input_hashes.emplace_back(path, file_hash(path));
  }

  std::string key_material = to_string(stage) + "\n" + config.to_text();
  for (const auto& [path, hash] : input_hashes)
    key_material += path + "=" + hash + "\n";
  std::string cache_key = hex64(fnv1a64(key_material));

  StageResult result;
  result.manifest_path =
      (fs::path(config.cache_root()) / (to_string(stage) + ".manifest.json"))
          .string();
  result.outputs = stage_outputs(stage, config);

  if (!config.force && fs::exists(result.manifest_path)) {
    try {
      json m = json::parse(read_file(result.manifest_path));
      bool outputs_ok = true;
      for (const std::string& path : result.outputs)
        if (!fs::exists(path)) outputs_ok = false;
      if (outputs_ok && m.at("cache_key").get<std::string>() == cache_key) {
        result.cache_hit = true;
        return result;
      }
    } catch (const std::exception&) {
      // unreadable manifest: recompute
    }
  }

  WarningLog local;
  WarningLog& log = warnings ? *warnings : local;
  std::size_t warn_start = log.size();
  switch (stage) {
    case Stage::collect: run_collect(config, log); break;
    case Stage::filter: run_filter(config, log); break;
    case Stage::build_dataset: run_build_dataset(config, log); break;
    case Stage::train: run_train(config, log); break;
    case Stage::generate: run_generate(config, log); break;
    case Stage::evaluate: run_evaluate(config, log); break;
  }

  WarningLog stage_warnings;
  for (std::size_t i = warn_start; i < log.size(); ++i)
    stage_warnings.add(log.messages()[i]);
  write_manifest(stage, config, cache_key, input_hashes, result.outputs,
                 stage_warnings, result.manifest_path);
  return result;
}

std::string run_report(const PipelineConfig& config) {
  std::string eval_path = artifact(config, "eval_report.json");
  require_upstream(eval_path, "evaluate");
  json eval = json::parse(read_file(eval_path));

  std::ostringstream out;
  out << "run report\n";
  out << "setup: " << eval.at("setup").get<std::string>() << "\n";
  out << "backend: " << config.backend << "\n";
  out << "seed: " << config.seed << "\n";
  out << "bleu smoothing: " << (eval.at("smoothed").get<bool>() ? "on" : "off")
      << "\n\n";

  out << "metrics (BLEU-4 / ROUGE-L / n)\n";
  for (const char* row : {"overall", "strengthener", "weakener"}) {
    const json& r = eval.at(row);
    out << "  " << row << ": " << r.at("bleu4").get<double>() << " / "
        << r.at("rougeL").get<double>() << " / "
        << r.at("n").get<std::size_t>() << "\n";
  }

  std::string filter_path = artifact(config, "filter_report.json");
  if (fs::exists(filter_path)) {
    json f = json::parse(read_file(filter_path));
    std::size_t total_kept = f.at("total_kept").get<std::size_t>();
    out << "\nretention by source (share of kept)\n";
    for (const auto& [source, r] : f.at("per_source").items()) {
      double share =
          total_kept == 0
              ? 0.0
              : 100.0 * static_cast<double>(r.at("kept").get<std::size_t>()) /
                    static_cast<double>(total_kept);
      out << "  " << source << ": " << share << "%\n";
    }
  }

  std::string stats_path = artifact(config, "dataset_stats.txt");
  if (fs::exists(stats_path)) {
    out << "\ndataset\n";
    for (const std::string& line : read_lines(stats_path))
      if (!line.empty()) out << "  " << line << "\n";
  }

  std::string text = out.str();
  write_file(artifact(config, "report.txt"), text);
  return text;
}

}  // namespace dfr
