#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dfr/common.hpp"

namespace dfr {

enum class Stage { collect, filter, build_dataset, train, generate, evaluate };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

// Everything a run needs: input paths, source toggles, decoding and
// training knobs, the seed. Serializes to "key = value" text; the defaults
// are the pinned pipeline settings.
struct PipelineConfig {
  // raw inputs
  std::string train_path;
  std::string dev_path;    // optional
  std::string test_path;   // optional
  std::string esnli_path;
  std::string triplets_path;    // optional KB triplets (TSV)
  std::string ifthen_path;      // optional if-then lookup table (TSV)
  std::string embeddings_path;  // optional; hashed fallback when empty
  std::string data_dir;         // lexica and templates; compiled-in default
  std::string work_dir = "work";

  // rationale collection
  std::vector<std::string> sources = {"vanilla_lm", "kg_lm", "knowledge_model",
                                      "nli_derived", "nli_derived_highlights"};
  double saliency_ratio = 0.20;
  int span_pairs = 3;
  double vanilla_p = 0.35;
  double vanilla_temperature = 1.0;
  int vanilla_samples = 20;
  double kg_p = 0.5;
  double kg_temperature = 0.7;
  int kg_samples = 5;
  int max_rationale_tokens = 12;
  int km_beam = 5;
  int kb_epochs = 2;

  // filtering
  double filter_ratio = 0.10;
  bool no_filter = false;

  // training / generation
  std::string setup = "rationale";
  std::string backend = "decoder_only";  // or encoder_decoder
  int epochs = 2;
  int lm_dim = 48;
  int lm_max_len = 160;
  int classifier_epochs = 30;
  int generation_beam = 5;

  // evaluation
  bool smooth_bleu = false;

  std::uint64_t seed = 42;
  bool force = false;  // never part of the cache key

  static PipelineConfig from_file(const std::string& path);
  void apply(const std::string& key, const std::string& value);
  std::string to_text() const;  // canonical form; hashed for caching

  // DFR_CACHE_ROOT overrides; defaults to work_dir
  std::string cache_root() const;

  bool source_enabled(const std::string& name) const;
};

struct StageResult {
  bool cache_hit = false;
  std::string manifest_path;
  std::vector<std::string> outputs;
};

// Runs one stage: checks upstream artifacts, computes outputs, writes a
// manifest with the cache key and input hashes. A re-run with the same key
// and intact outputs is a no-op unless config.force.
StageResult run_stage(Stage stage, const PipelineConfig& config,
                      WarningLog* warnings = nullptr);

// Consolidated run report (metrics plus retention statistics); requires the
// evaluate stage. Returns the report text and writes it to the work dir.
std::string run_report(const PipelineConfig& config);

}  // namespace dfr
