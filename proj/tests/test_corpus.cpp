#include <doctest.h>

#include <set>

#include "dfr/corpus.hpp"
#include "dfr/tokenize.hpp"
#include "test_util.hpp"

using namespace dfr;

TEST_CASE("enum string round trips") {
  CHECK(update_type_from_string("strengthener") == UpdateType::strengthener);
  CHECK(update_type_from_string("weakener") == UpdateType::weakener);
  CHECK_THROWS_AS(update_type_from_string("both"), ValueError);
  for (Split s : {Split::train, Split::dev, Split::test})
    CHECK(split_from_string(to_string(s)) == s);
  for (NliLabel l :
       {NliLabel::entailment, NliLabel::contradiction, NliLabel::neutral})
    CHECK(nli_label_from_string(to_string(l)) == l);
  for (RationaleSource s :
       {RationaleSource::vanilla_lm, RationaleSource::kg_lm,
        RationaleSource::knowledge_model, RationaleSource::nli_derived,
        RationaleSource::nli_derived_highlights})
    CHECK(rationale_source_from_string(to_string(s)) == s);
}

TEST_CASE("instance ids are stable and normalization-invariant") {
  std::string id = instance_id("A man reads.", "He reads.", "It rains.");
  CHECK(id.size() == 16);
  CHECK(id == instance_id("A  man  reads.", "He reads.", "It rains."));
  CHECK(id != instance_id("A man reads.", "He reads.", "It snows."));
  // field boundaries matter: moving a word across fields changes the id
  CHECK(instance_id("a b", "c", "d") != instance_id("a", "b c", "d"));
}

TEST_CASE("decoding config validation") {
  DecodingConfig c;
  CHECK_NOTHROW(c.validate());
  c.p = 0.0;
  CHECK_THROWS_AS(c.validate(), ValueError);
  c.p = 0.5;
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.validate(), ValueError);
  c.temperature = 1.0;
  c.num_return = 0;
  CHECK_THROWS_AS(c.validate(), ValueError);
  c.num_return = 1;
  c.max_new_tokens = 0;
  CHECK_THROWS_AS(c.validate(), ValueError);
}

TEST_CASE("source priority ranks the NLI-derived sources first") {
  CHECK(source_priority(RationaleSource::nli_derived) <
        source_priority(RationaleSource::nli_derived_highlights));
  CHECK(source_priority(RationaleSource::nli_derived_highlights) <
        source_priority(RationaleSource::knowledge_model));
  CHECK(source_priority(RationaleSource::knowledge_model) <
        source_priority(RationaleSource::kg_lm));
  CHECK(source_priority(RationaleSource::kg_lm) <
        source_priority(RationaleSource::vanilla_lm));
}

TEST_CASE("toy corpus loads with the expected split layout") {
  auto rows = load_dnli(fixture("toy_dnli.jsonl"));
  REQUIRE(rows.size() == 50);
  std::size_t train = 0, dev = 0, test = 0;
  std::set<std::string> ids;
  for (const auto& r : rows) {
    ids.insert(r.id);
    if (r.split == Split::train) ++train;
    if (r.split == Split::dev) ++dev;
    if (r.split == Split::test) ++test;
  }
  CHECK(train == 40);
  CHECK(dev == 5);
  CHECK(test == 5);
  CHECK(ids.size() == 50);
}

TEST_CASE("dnli loader reports the offending line") {
  std::string dir = temp_dir("dnli_errors");
  std::string path = dir + "/bad.jsonl";
  write_file(path,
             "{\"premise\":\"a\",\"hypothesis\":\"b\",\"update\":\"c\","
             "\"update_type\":\"strengthener\",\"split\":\"train\"}\n"
             "{\"premise\":\"a\",\"update\":\"c\","
             "\"update_type\":\"strengthener\",\"split\":\"train\"}\n");
  try {
    load_dnli(path);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  write_file(path,
             "{\"premise\":\"a\",\"hypothesis\":\"b\",\"update\":\"c\","
             "\"update_type\":\"sideways\",\"split\":\"train\"}\n");
  CHECK_THROWS_AS(load_dnli(path), ValueError);
}

TEST_CASE("records without a split need a default split") {
  std::string dir = temp_dir("dnli_default_split");
  std::string path = dir + "/nosplit.jsonl";
  write_file(path,
             "{\"premise\":\"a\",\"hypothesis\":\"b\",\"update\":\"c\","
             "\"update_type\":\"weakener\"}\n");
  CHECK_THROWS_AS(load_dnli(path), SchemaError);
  auto rows = load_dnli(path, Split::dev);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].split == Split::dev);
}

TEST_CASE("published capitalized field names are accepted") {
  std::string dir = temp_dir("dnli_published");
  std::string path = dir + "/published.jsonl";
  write_file(path,
             "{\"Premise\":\"a\",\"Hypothesis\":\"b\",\"Update\":\"c\","
             "\"UpdateType\":\"weakener\",\"Split\":\"test\"}\n");
  auto rows = load_dnli(path);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].premise == "a");
  CHECK(rows[0].split == Split::test);
}

TEST_CASE("e-SNLI fixture loads with validated highlights") {
  auto rows = load_esnli(fixture("toy_esnli.jsonl"));
  REQUIRE(rows.size() == 65);
  std::size_t neutral = 0;
  for (const auto& r : rows) {
    if (r.label == NliLabel::neutral) ++neutral;
    for (const auto& h : r.highlights) {
      CHECK(h.token_begin < h.token_end);
      CHECK((h.origin == "premise" || h.origin == "hypothesis"));
    }
  }
  CHECK(neutral == 1);
}

TEST_CASE("e-SNLI csv adapter parses starred highlight words") {
  std::string dir = temp_dir("esnli_csv");
  std::string path = dir + "/toy.csv";
  write_file(path,
             "gold_label,Sentence1,Sentence2,Explanation_1,"
             "Sentence1_marked_1,Sentence2_marked_1\n"
             "entailment,A man reads a book.,A man reads.,"
             "Reading a book implies reading.,"
             "A man *reads* a *book.*,A man *reads.*\n");
  auto rows = load_esnli(path);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].label == NliLabel::entailment);
  REQUIRE(rows[0].highlights.size() == 3);
  CHECK(rows[0].highlights[0].origin == "premise");
  CHECK(rows[0].highlights[0].token_begin == 2);
  CHECK(rows[0].highlights[0].token_end == 3);
  CHECK(rows[0].highlights[1].token_begin == 4);
  CHECK(rows[0].highlights[2].origin == "hypothesis");
}

TEST_CASE("out-of-range highlights are rejected") {
  std::string dir = temp_dir("esnli_range");
  std::string path = dir + "/bad.jsonl";
  write_file(path,
             "{\"premise\":\"a b\",\"hypothesis\":\"c\",\"label\":"
             "\"entailment\",\"rationale\":\"r\",\"highlights\":"
             "[{\"origin\":\"premise\",\"begin\":1,\"end\":5}]}\n");
  CHECK_THROWS_AS(load_esnli(path), SchemaError);
}

namespace {

AugmentedInstance sample_instance() {
  AugmentedInstance a;
  a.instance.id = instance_id("A man reads.", "He reads.", "It rains.");
  a.instance.premise = "A man reads.";
  a.instance.hypothesis = "He reads.";
  a.instance.update = "It rains.";
  a.instance.update_type = UpdateType::weakener;
  a.instance.split = Split::train;

  RationaleCandidate c;
  c.text = "Rain makes reading outside hard.";
  c.source = RationaleSource::nli_derived;
  c.prompt = "explain nli premise: A man reads. It rains. hypothesis: He reads.";
  DecodingConfig dec;
  dec.strategy = DecodingStrategy::beam;
  dec.beam_size = 5;
  dec.num_return = 1;
  c.decoding = dec;
  a.candidates.push_back(c);
  c.score = 0.75;
  a.kept.push_back(c);
  return a;
}

}  // namespace

TEST_CASE("dataset serialization round trips") {
  std::vector<AugmentedInstance> data = {sample_instance()};
  std::string dir = temp_dir("dataset_roundtrip");
  std::string path = dir + "/data.jsonl";
  write_dataset(data, path);
  auto back = read_dataset(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == data[0]);
  // serialization is deterministic
  CHECK(serialize_dataset(back) == serialize_dataset(data));
}

TEST_CASE("expanded row count is one row per kept rationale") {
  AugmentedInstance a = sample_instance();
  std::vector<AugmentedInstance> data = {a, a, a};
  CHECK(expanded_row_count(data) == 3);
  data[1].kept.clear();
  CHECK(expanded_row_count(data) == 2);
  data[2].kept.push_back(data[2].kept.front());
  CHECK(expanded_row_count(data) == 3);
}

TEST_CASE("tokenizer splits clitics and reconstructs surface text") {
  auto toks = tokenize("the farmer's market");
  REQUIRE(toks.size() == 4);
  CHECK(toks[1].text == "farmer");
  CHECK(toks[2].text == "'s");
  std::string text = "the farmer's market";
  for (const Token& t : toks)
    CHECK(text.substr(t.begin, t.end - t.begin) == t.text);
}
