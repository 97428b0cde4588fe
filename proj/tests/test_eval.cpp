#include <doctest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "dfr/eval.hpp"
#include "test_util.hpp"

using namespace dfr;

namespace {

struct MetricItems {
  std::vector<std::string> predictions;
  std::vector<std::vector<std::string>> references;
};

MetricItems load_metric_items() {
  MetricItems items;
  for (const std::string& line : read_lines(fixture("metric_items.jsonl"))) {
    if (normalize_ws(line).empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    items.predictions.push_back(rec.at("prediction").get<std::string>());
    items.references.push_back(
        rec.at("references").get<std::vector<std::string>>());
  }
  return items;
}

}  // namespace

TEST_CASE("metric tokenization lowercases and isolates punctuation") {
  CHECK(metric_tokens("He reads.") ==
        std::vector<std::string>{"he", "reads", "."});
  CHECK(metric_tokens("A man's dog, outside!") ==
        std::vector<std::string>{"a", "man", "'", "s", "dog", ",", "outside",
                                 "!"});
  CHECK(metric_tokens("  spaced   out  ") ==
        std::vector<std::string>{"spaced", "out"});
  CHECK(metric_tokens("").empty());
}

TEST_CASE("corpus scores on the fixture match their frozen values") {
  MetricItems items = load_metric_items();
  REQUIRE(items.predictions.size() == 20);
  CHECK(bleu4(items.predictions, items.references) ==
        doctest::Approx(94.64610850116321).epsilon(1e-9));
  CHECK(rougeL(items.predictions, items.references) ==
        doctest::Approx(96.86868686868686).epsilon(1e-9));
  // no zero-match n-gram order on this fixture, so smoothing is a no-op
  BleuOptions smooth;
  smooth.smooth = true;
  CHECK(bleu4(items.predictions, items.references, smooth) ==
        doctest::Approx(94.64610850116321).epsilon(1e-9));
}

TEST_CASE("identical text scores 100 and disjoint text scores 0") {
  std::vector<std::string> preds = {"a man reads a long book outside today."};
  std::vector<std::vector<std::string>> refs = {
      {"a man reads a long book outside today."}};
  CHECK(bleu4(preds, refs) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(rougeL(preds, refs) == doctest::Approx(100.0).epsilon(1e-12));

  std::vector<std::vector<std::string>> other = {
      {"seven green turtles swim under cold water"}};
  CHECK(bleu4(preds, other) == 0.0);
  CHECK(rougeL(preds, other) == 0.0);
}

TEST_CASE("a single substitution lands on the known LCS F-measure") {
  CHECK(rougeL({"a b c"}, {{"a x c"}}) ==
        doctest::Approx(66.66666666666666).epsilon(1e-9));
}

TEST_CASE("item order does not change corpus scores") {
  MetricItems items = load_metric_items();
  MetricItems shuffled = items;
  std::vector<std::size_t> idx(items.predictions.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(8);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    shuffled.predictions[i] = items.predictions[idx[i]];
    shuffled.references[i] = items.references[idx[i]];
  }
  CHECK(bleu4(shuffled.predictions, shuffled.references) ==
        doctest::Approx(bleu4(items.predictions, items.references))
            .epsilon(1e-12));
  CHECK(rougeL(shuffled.predictions, shuffled.references) ==
        doctest::Approx(rougeL(items.predictions, items.references))
            .epsilon(1e-12));
}

TEST_CASE("duplicated references never change the score") {
  MetricItems items = load_metric_items();
  MetricItems doubled = items;
  for (auto& refs : doubled.references) {
    std::vector<std::string> copy = refs;
    refs.insert(refs.end(), copy.begin(), copy.end());
  }
  CHECK(bleu4(doubled.predictions, doubled.references) ==
        doctest::Approx(bleu4(items.predictions, items.references))
            .epsilon(1e-12));
  CHECK(rougeL(doubled.predictions, doubled.references) ==
        doctest::Approx(rougeL(items.predictions, items.references))
            .epsilon(1e-12));
}

TEST_CASE("metric inputs are validated") {
  CHECK_THROWS_AS(bleu4({}, {}), ContractError);
  CHECK_THROWS_AS(bleu4({"a"}, {}), ContractError);
  CHECK_THROWS_AS(bleu4({"a"}, {{}}), ContractError);
  CHECK_THROWS_AS(rougeL({"a"}, {{"r"}, {"r"}}), ContractError);
}

TEST_CASE("smoothing only enters when a higher order has zero matches") {
  std::vector<std::string> preds = {"a b"};
  std::vector<std::vector<std::string>> refs = {{"a c b"}};
  CHECK(bleu4(preds, refs) == 0.0);  // no bigram match, unsmoothed collapses
  BleuOptions smooth;
  smooth.smooth = true;
  double s = bleu4(preds, refs, smooth);
  CHECK(s > 0.0);
  CHECK(s < 100.0);
}

TEST_CASE("the report splits scores by update type") {
  std::vector<DefeasibleInstance> instances(4);
  std::vector<std::string> preds;
  std::vector<std::vector<std::string>> refs;
  for (std::size_t i = 0; i < 4; ++i) {
    instances[i].update_type =
        i < 3 ? UpdateType::strengthener : UpdateType::weakener;
    preds.push_back("the cat sat on the mat today fine.");
    refs.push_back({i < 3 ? "the cat sat on the mat today fine."
                          : "entirely different words appear here now"});
  }
  EvalReport report = evaluate_rationales(instances, preds, refs);
  CHECK(report.overall.n == 4);
  CHECK(report.strengthener.n == 3);
  CHECK(report.weakener.n == 1);
  CHECK(report.strengthener.bleu4 == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(report.weakener.rougeL == 0.0);
  CHECK(report.overall.rougeL ==
        doctest::Approx(75.0).epsilon(1e-9));  // mean of 3x100 and 1x0
  CHECK_FALSE(report.smoothed);
  CHECK_THROWS_AS(evaluate_rationales(instances, {"x"}, refs), ContractError);
}

namespace {

std::vector<DefeasibleInstance> export_items(std::size_t n) {
  std::vector<DefeasibleInstance> items;
  for (std::size_t i = 0; i < n; ++i) {
    DefeasibleInstance inst;
    inst.premise = "P " + std::to_string(i) + ".";
    inst.hypothesis = "H " + std::to_string(i) + ".";
    inst.update = "U " + std::to_string(i) + ".";
    inst.update_type =
        i % 2 == 0 ? UpdateType::strengthener : UpdateType::weakener;
    inst.id = instance_id(inst.premise, inst.hypothesis, inst.update);
    items.push_back(inst);
  }
  return items;
}

std::map<std::string, std::vector<std::string>> export_outputs(
    const std::vector<DefeasibleInstance>& items) {
  std::map<std::string, std::vector<std::string>> outputs;
  for (const std::string& name : {"baseline", "treatment"}) {
    std::vector<std::string> outs;
    for (std::size_t i = 0; i < items.size(); ++i)
      outs.push_back(name + " rationale " + std::to_string(i) + ".");
    outputs[name] = outs;
  }
  return outputs;
}

}  // namespace

TEST_CASE("the blinded export pairs each sampled item with every model") {
  auto items = export_items(300);
  auto outputs = export_outputs(items);
  HumanEvalExport exp = export_human_eval(items, outputs, 200, 13);
  CHECK(exp.rows.size() == 400);  // 200 items x 2 models
  REQUIRE(exp.key.size() == 2);

  std::set<std::string> names;
  for (const auto& [code, name] : exp.key) {
    CHECK(code.front() == 'M');
    names.insert(name);
  }
  CHECK(names == std::set<std::string>{"baseline", "treatment"});

  // each row's rationale traces back to the keyed model's output list
  for (const HumanEvalRow& row : exp.rows) {
    const std::string& model = exp.key.at(row.model_code);
    CHECK(row.rationale.rfind(model + " rationale ", 0) == 0);
  }

  // same seed, same export; a different seed samples differently
  HumanEvalExport again = export_human_eval(items, outputs, 200, 13);
  CHECK(again.rows == exp.rows);
  HumanEvalExport other = export_human_eval(items, outputs, 200, 14);
  CHECK(other.rows != exp.rows);

  CHECK_THROWS_AS(export_human_eval({}, outputs, 10, 1), ContractError);
  auto misaligned = outputs;
  misaligned["baseline"].pop_back();
  CHECK_THROWS_AS(export_human_eval(items, misaligned, 10, 1), ContractError);
}

TEST_CASE("small pools export every item") {
  auto items = export_items(5);
  auto outputs = export_outputs(items);
  HumanEvalExport exp = export_human_eval(items, outputs, 200, 7);
  CHECK(exp.rows.size() == 10);
}

TEST_CASE("the annotation sheet round trips through disk") {
  auto items = export_items(12);
  auto outputs = export_outputs(items);
  HumanEvalExport exp = export_human_eval(items, outputs, 8, 3);
  std::string dir = temp_dir("human_eval");
  write_human_eval(exp, dir + "/task.tsv", dir + "/key.tsv");

  auto rows = read_human_eval(dir + "/task.tsv");
  REQUIRE(rows.size() == exp.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i] == exp.rows[i]);

  std::string key = read_file(dir + "/key.tsv");
  for (const auto& [code, name] : exp.key)
    CHECK(key.find(code + "\t" + name) != std::string::npos);

  // the reader keys on header names, so reordered columns still load
  std::vector<std::string> lines = read_lines(dir + "/task.tsv");
  auto reorder = [](const std::string& line) {
    std::vector<std::string> f = split(line, '\t');
    std::swap(f[0], f[1]);
    return join(f, "\t");
  };
  std::string shuffled;
  for (const std::string& line : lines) shuffled += reorder(line) + "\n";
  write_file(dir + "/reordered.tsv", shuffled);
  auto rows2 = read_human_eval(dir + "/reordered.tsv");
  REQUIRE(rows2.size() == rows.size());
  CHECK(rows2[0] == rows[0]);
}

namespace {

HumanAnnotation ann(std::string item, std::string worker, Grammaticality g,
                    bool rel, bool corr, bool expl) {
  HumanAnnotation a;
  a.item_id = std::move(item);
  a.worker_id = std::move(worker);
  a.grammatical = g;
  a.relevant = rel;
  a.correct = corr;
  a.explanatory = expl;
  return a;
}

}  // namespace

TEST_CASE("majority voting needs exactly three typed annotations per item") {
  std::vector<HumanAnnotation> annotations = {
      // i1: 2/3 relevant, grammaticality majority understandable-or-better
      ann("i1", "w1", Grammaticality::grammatical, true, true, false),
      ann("i1", "w2", Grammaticality::understandable, true, false, false),
      ann("i1", "w3", Grammaticality::not_understandable, false, false, true),
      // i2: only two annotations -> excluded
      ann("i2", "w1", Grammaticality::grammatical, true, true, true),
      ann("i2", "w2", Grammaticality::grammatical, true, true, true),
      // i3: three annotations but no type mapping -> excluded
      ann("i3", "w1", Grammaticality::grammatical, true, true, true),
      ann("i3", "w2", Grammaticality::grammatical, true, true, true),
      ann("i3", "w3", Grammaticality::grammatical, true, true, true),
      // i4: unanimous weakener item
      ann("i4", "w1", Grammaticality::grammatical, true, true, true),
      ann("i4", "w2", Grammaticality::grammatical, true, true, true),
      ann("i4", "w3", Grammaticality::grammatical, true, true, true),
  };
  std::map<std::string, UpdateType> types = {
      {"i1", UpdateType::strengthener},
      {"i2", UpdateType::strengthener},
      {"i4", UpdateType::weakener},
  };
  VoteAggregate agg = aggregate_votes(annotations, types);

  REQUIRE(agg.per_item.size() == 2);
  CHECK(agg.per_item.at("i1").grammatical);
  CHECK(agg.per_item.at("i1").relevant);
  CHECK_FALSE(agg.per_item.at("i1").correct);
  CHECK_FALSE(agg.per_item.at("i1").explanatory);
  CHECK(agg.per_item.at("i4").explanatory);

  CHECK(agg.excluded == std::vector<std::string>{"i2", "i3"});

  CHECK(agg.strengthener.n == 1);
  CHECK(agg.strengthener.relevant == 100.0);
  CHECK(agg.strengthener.correct == 0.0);
  CHECK(agg.weakener.n == 1);
  CHECK(agg.weakener.correct == 100.0);

  // distribution covers the 6 counted annotations (i1 + i4)
  CHECK(agg.grammaticality_distribution.at("grammatical") ==
        doctest::Approx(100.0 * 4.0 / 6.0).epsilon(1e-12));
  CHECK(agg.grammaticality_distribution.at("understandable") ==
        doctest::Approx(100.0 / 6.0).epsilon(1e-12));
  CHECK(agg.grammaticality_distribution.at("not_understandable") ==
        doctest::Approx(100.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("grammaticality levels round trip") {
  for (Grammaticality g :
       {Grammaticality::grammatical, Grammaticality::understandable,
        Grammaticality::not_understandable})
    CHECK(grammaticality_from_string(to_string(g)) == g);
  CHECK_THROWS_AS(grammaticality_from_string("fluent"), ValueError);
}

TEST_CASE("the agreement statistic matches its frozen oracle") {
  std::vector<std::vector<std::size_t>> counts = {
      {3, 0, 0}, {2, 1, 0}, {0, 3, 0}, {1, 1, 1}, {0, 0, 3},
      {2, 0, 1}, {1, 2, 0}, {0, 1, 2}, {3, 0, 0}, {1, 0, 2}};
  KappaResult r = fleiss_kappa(counts);
  CHECK_FALSE(r.degenerate);
  CHECK(r.value == doctest::Approx(0.3344709897610921).epsilon(1e-9));
}

TEST_CASE("perfect agreement across mixed categories scores one") {
  KappaResult r = fleiss_kappa({{3, 0}, {0, 3}, {3, 0}});
  CHECK(r.value == 1.0);
  CHECK_FALSE(r.degenerate);
}

TEST_CASE("single-category matrices are degenerate unless unanimous") {
  KappaResult all_same = fleiss_kappa({{3}, {3}, {3}});
  CHECK(all_same.value == 1.0);
  CHECK_FALSE(all_same.degenerate);

  // every rater always picks category 0: expected agreement is already 1
  KappaResult r = fleiss_kappa({{3, 0}, {3, 0}, {3, 0}});
  CHECK(r.value == 1.0);
}

TEST_CASE("the count matrix is validated") {
  CHECK_THROWS_AS(fleiss_kappa({}), ContractError);
  CHECK_THROWS_AS(fleiss_kappa({{}}), ContractError);
  CHECK_THROWS_AS(fleiss_kappa({{1, 0}}), ContractError);       // 1 rater
  CHECK_THROWS_AS(fleiss_kappa({{2, 1}, {2}}), ContractError);  // ragged
  CHECK_THROWS_AS(fleiss_kappa({{2, 1}, {2, 2}}), ContractError);
}

TEST_CASE("random votes over many items show near-zero agreement") {
  Rng rng(2024);
  std::uniform_int_distribution<int> cat(0, 2);
  std::vector<std::vector<std::size_t>> counts;
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::size_t> row(3, 0);
    for (int r = 0; r < 3; ++r) ++row[static_cast<std::size_t>(cat(rng))];
    counts.push_back(row);
  }
  KappaResult r = fleiss_kappa(counts);
  CHECK_FALSE(r.degenerate);
  CHECK(std::abs(r.value) < 0.05);
}
