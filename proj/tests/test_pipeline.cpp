#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "dfr/pipeline.hpp"
#include "dfr/corpus.hpp"
#include "test_util.hpp"

using namespace dfr;
namespace fs = std::filesystem;

namespace {

PipelineConfig toy_config(const std::string& work) {
  PipelineConfig c;
  c.train_path = fixture("toy_dnli.jsonl");
  c.esnli_path = fixture("toy_esnli.jsonl");
  c.triplets_path = fixture("toy_triplets.tsv");
  c.ifthen_path = fixture("toy_ifthen.tsv");
  c.embeddings_path = fixture("toy_embeddings.txt");
  c.data_dir = DFR_DATA_DIR;
  c.work_dir = work;
  c.lm_dim = 24;
  c.epochs = 1;
  c.kb_epochs = 1;
  c.classifier_epochs = 20;
  c.vanilla_samples = 3;
  c.kg_samples = 2;
  c.seed = 7;
  return c;
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {
      Stage::collect, Stage::filter,   Stage::build_dataset,
      Stage::train,   Stage::generate, Stage::evaluate};
  return stages;
}

void run_chain(const PipelineConfig& c) {
  for (Stage s : all_stages()) run_stage(s, c);
}

}  // namespace

TEST_CASE("stage names round trip, including the dashed one") {
  for (Stage s : all_stages()) CHECK(stage_from_string(to_string(s)) == s);
  CHECK(to_string(Stage::build_dataset) == "build-dataset");
  CHECK_THROWS_AS(stage_from_string("deploy"), ValueError);
}

TEST_CASE("configuration files parse, validate, and canonicalize") {
  std::string dir = temp_dir("pipe_config");
  std::string path = dir + "/run.conf";
  write_file(path,
             "# toy run\n"
             "train_path = corpus.jsonl\n"
             "esnli_path = esnli.jsonl\n"
             "sources = nli_derived, knowledge_model\n"
             "filter_ratio = 0.25\n"
             "no_filter = true\n"
             "setup = joint_type_rationale\n"
             "backend = encoder_decoder\n"
             "seed = 99\n");
  PipelineConfig c = PipelineConfig::from_file(path);
  CHECK(c.train_path == "corpus.jsonl");
  CHECK(c.sources ==
        std::vector<std::string>{"nli_derived", "knowledge_model"});
  CHECK(c.filter_ratio == 0.25);
  CHECK(c.no_filter);
  CHECK(c.setup == "joint_type_rationale");
  CHECK(c.backend == "encoder_decoder");
  CHECK(c.seed == 99);
  CHECK(c.source_enabled("nli_derived"));
  CHECK_FALSE(c.source_enabled("vanilla_lm"));

  // the canonical text re-parses to the same canonical text
  std::string canon = c.to_text();
  write_file(path, canon);
  CHECK(PipelineConfig::from_file(path).to_text() == canon);

  write_file(path, "not_a_key = 1\n");
  try {
    PipelineConfig::from_file(path);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    std::string msg = e.what();
    CHECK(msg.find(":1") != std::string::npos);
    CHECK(msg.find("not_a_key") != std::string::npos);
  }

  PipelineConfig d;
  CHECK_THROWS_AS(d.apply("sources", "made_up_source"), ValueError);
  CHECK_THROWS_AS(d.apply("backend", "tpu"), ValueError);
  CHECK_THROWS_AS(d.apply("setup", "everything"), ValueError);
  CHECK_THROWS_AS(d.apply("no_filter", "maybe"), ValueError);
}

TEST_CASE("the force flag never enters the cache key text") {
  PipelineConfig a = toy_config("w");
  PipelineConfig b = a;
  b.force = true;
  CHECK(a.to_text() == b.to_text());
}

TEST_CASE("the cache root honors its environment override") {
  PipelineConfig c = toy_config("somewhere");
  CHECK(c.cache_root() == "somewhere");
  setenv("DFR_CACHE_ROOT", "/tmp/dfr_cache_override", 1);
  CHECK(c.cache_root() == "/tmp/dfr_cache_override");
  unsetenv("DFR_CACHE_ROOT");
  CHECK(c.cache_root() == "somewhere");
}

TEST_CASE("downstream stages demand their upstream artifacts by name") {
  PipelineConfig c = toy_config(temp_dir("pipe_missing"));
  try {
    run_stage(Stage::filter, c);
    FAIL("expected a contract error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("collect") != std::string::npos);
  }
  CHECK_THROWS_AS(run_stage(Stage::train, c), ContractError);
  CHECK_THROWS_AS(run_report(c), ContractError);

  PipelineConfig bad = c;
  bad.train_path = c.work_dir + "/does_not_exist.jsonl";
  CHECK_THROWS_AS(run_stage(Stage::collect, bad), IoError);
}

TEST_CASE("the full stage chain runs, caches, and reruns identically") {
  PipelineConfig c = toy_config(temp_dir("pipe_chain_a"));

  for (Stage s : all_stages()) {
    StageResult r = run_stage(s, c);
    CHECK_FALSE(r.cache_hit);
    CHECK(fs::exists(r.manifest_path));
    for (const std::string& out : r.outputs) CHECK(fs::exists(out));

    nlohmann::json m = nlohmann::json::parse(read_file(r.manifest_path));
    CHECK(m.at("stage") == to_string(s));
    CHECK(m.at("cache_key").get<std::string>().size() == 16);
    CHECK_FALSE(m.at("inputs").empty());
  }

  // collected candidates cover every corpus row and every enabled source
  auto candidates = read_dataset(c.work_dir + "/candidates.jsonl");
  CHECK(candidates.size() == 50);
  std::set<RationaleSource> seen;
  std::size_t total = 0;
  for (const AugmentedInstance& a : candidates) {
    total += a.candidates.size();
    for (const RationaleCandidate& r : a.candidates) seen.insert(r.source);
  }
  CHECK(total > 50);
  CHECK(seen.size() == 5);

  // filtering kept at least one rationale somewhere, never more than the
  // candidate pool
  auto filtered = read_dataset(c.work_dir + "/filtered.jsonl");
  REQUIRE(filtered.size() == candidates.size());
  std::size_t kept = 0;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    CHECK(filtered[i].kept.size() <= filtered[i].candidates.size());
    kept += filtered[i].kept.size();
  }
  CHECK(kept > 0);

  // a second pass over every stage is a pure cache hit
  for (Stage s : all_stages()) CHECK(run_stage(s, c).cache_hit);

  // an identical configuration in a fresh work dir reproduces every
  // artifact byte for byte
  PipelineConfig c2 = toy_config(temp_dir("pipe_chain_b"));
  run_chain(c2);
  for (const char* name :
       {"candidates.jsonl", "filtered.jsonl", "filter_report.json",
        "dataset.jsonl", "dataset_stats.txt", "generations.jsonl",
        "eval_report.json"}) {
    CHECK(read_file(c.work_dir + "/" + name) ==
          read_file(c2.work_dir + "/" + name));
  }

  // force recomputes even with a valid manifest
  PipelineConfig forced = c;
  forced.force = true;
  CHECK_FALSE(run_stage(Stage::evaluate, forced).cache_hit);

  // a changed setting invalidates the key
  PipelineConfig changed = c;
  changed.smooth_bleu = true;
  CHECK_FALSE(run_stage(Stage::evaluate, changed).cache_hit);

  std::string report = run_report(c);
  CHECK(report.find("run report") != std::string::npos);
  CHECK(report.find("metrics") != std::string::npos);
  CHECK(report.find("retention by source") != std::string::npos);
  CHECK(fs::exists(c.work_dir + "/report.txt"));
}

TEST_CASE("the no-filter ablation keeps at most one rationale per source") {
  PipelineConfig c = toy_config(temp_dir("pipe_nofilter"));
  c.sources = {"knowledge_model", "nli_derived"};
  run_stage(Stage::collect, c);

  PipelineConfig ablated = c;
  ablated.no_filter = true;
  run_stage(Stage::filter, ablated);
  auto rows = read_dataset(ablated.work_dir + "/filtered.jsonl");
  REQUIRE_FALSE(rows.empty());
  for (const AugmentedInstance& a : rows) {
    std::map<RationaleSource, int> per_source;
    for (const RationaleCandidate& r : a.kept) ++per_source[r.source];
    for (const auto& [source, count] : per_source) CHECK(count == 1);
    if (!a.candidates.empty()) CHECK_FALSE(a.kept.empty());
  }

  // same seed, same picks
  std::string first = read_file(ablated.work_dir + "/filtered.jsonl");
  ablated.force = true;
  run_stage(Stage::filter, ablated);
  CHECK(read_file(ablated.work_dir + "/filtered.jsonl") == first);
}

TEST_CASE("a source subset restricts collection to those sources") {
  PipelineConfig c = toy_config(temp_dir("pipe_subset"));
  c.sources = {"knowledge_model"};
  run_stage(Stage::collect, c);
  auto rows = read_dataset(c.work_dir + "/candidates.jsonl");
  REQUIRE(rows.size() == 50);
  std::size_t total = 0;
  for (const AugmentedInstance& a : rows) {
    for (const RationaleCandidate& r : a.candidates) {
      CHECK(r.source == RationaleSource::knowledge_model);
      ++total;
    }
  }
  CHECK(total > 0);
}
