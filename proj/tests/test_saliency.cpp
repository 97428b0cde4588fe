#include <doctest.h>

#include <cmath>
#include <random>

#include "dfr/embeddings.hpp"
#include "dfr/saliency.hpp"
#include "test_util.hpp"

using namespace dfr;

namespace {

const Annotator& annotator() {
  static Annotator a = Annotator::from_data_dir(DFR_DATA_DIR);
  return a;
}

DefeasibleInstance sample_inst() {
  DefeasibleInstance inst;
  inst.premise = "A man is tying a rope to a rock.";
  inst.hypothesis = "A person is rock climbing.";
  inst.update = "The rope is strong and safe.";
  inst.update_type = UpdateType::strengthener;
  inst.id = instance_id(inst.premise, inst.hypothesis, inst.update);
  return inst;
}

}  // namespace

TEST_CASE("classifier serialization carries exactly two separators") {
  std::string s = serialize_for_classifier(sample_inst());
  std::size_t count = 0, pos = 0;
  while ((pos = s.find("<sep>", pos)) != std::string::npos) {
    ++count;
    pos += 5;
  }
  CHECK(count == 2);
}

TEST_CASE("top-token selection keeps ceil(ratio n) tokens for n in 1..500") {
  Rng rng(123);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (std::size_t n = 1; n <= 500; ++n) {
    std::vector<double> scores(n);
    for (double& s : scores) s = dist(rng);
    auto picked = select_top_tokens(scores, 0.20);
    CHECK(picked.size() ==
          static_cast<std::size_t>(std::ceil(0.20 * static_cast<double>(n))));
    CHECK(std::is_sorted(picked.begin(), picked.end()));
  }
}

TEST_CASE("score ties break toward the earliest position") {
  std::vector<double> scores = {0.5, 0.9, 0.5, 0.5, 0.1};
  auto picked = select_top_tokens(scores, 0.4);  // ceil(2.0) = 2
  CHECK(picked == std::vector<std::size_t>{0, 1});
}

TEST_CASE("top-token selection validates its inputs") {
  CHECK_THROWS_AS(select_top_tokens({}, 0.2), ContractError);
  CHECK_THROWS_AS(select_top_tokens({1.0}, 0.0), ContractError);
  CHECK_THROWS_AS(select_top_tokens({1.0}, 1.5), ContractError);
}

TEST_CASE("span merge matches a brute-force reference on random inputs") {
  Rng rng(77);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int round = 0; round < 200; ++round) {
    std::uniform_int_distribution<std::size_t> len(1, 12);
    std::size_t nh = len(rng), nu = len(rng);
    TokenSaliency s;
    std::string hyp, upd;
    for (std::size_t i = 0; i < nh; ++i) {
      s.hyp_tokens.push_back("h" + std::to_string(i));
      s.hyp_scores.push_back(dist(rng));
      hyp += (i ? " " : "") + s.hyp_tokens.back();
    }
    for (std::size_t i = 0; i < nu; ++i) {
      s.upd_tokens.push_back("u" + std::to_string(i));
      s.upd_scores.push_back(dist(rng));
      upd += (i ? " " : "") + s.upd_tokens.back();
    }

    auto spans = extract_salient_spans(s, hyp, upd, 0.20);

    // oracle: recompute the selected set and merge runs by hand
    std::vector<double> combined = s.hyp_scores;
    combined.insert(combined.end(), s.upd_scores.begin(), s.upd_scores.end());
    auto top = select_top_tokens(combined, 0.20);
    std::vector<bool> sel(combined.size(), false);
    for (std::size_t i : top) sel[i] = true;

    std::vector<std::vector<std::string>> expected;
    auto merge = [&](const std::vector<std::string>& toks, std::size_t offset) {
      std::size_t i = 0;
      while (i < toks.size()) {
        if (!sel[offset + i]) {
          ++i;
          continue;
        }
        std::vector<std::string> run;
        while (i < toks.size() && sel[offset + i]) run.push_back(toks[i++]);
        expected.push_back(run);
      }
    };
    merge(s.hyp_tokens, 0);
    merge(s.upd_tokens, nh);

    REQUIRE(spans.size() == expected.size());
    for (std::size_t i = 0; i < spans.size(); ++i)
      CHECK(spans[i].tokens == expected[i]);
  }
}

TEST_CASE("span character offsets recover the surface text") {
  TokenSaliency s;
  s.hyp_tokens = {"a", "person", "climbs"};
  s.hyp_scores = {0.1, 0.9, 0.8};
  s.upd_tokens = {"it", "rains"};
  s.upd_scores = {0.0, 0.0};
  std::string hyp = "a person climbs";
  auto spans = extract_salient_spans(s, hyp, "it rains", 0.4);
  REQUIRE(spans.size() == 1);
  CHECK(hyp.substr(spans[0].char_begin,
                   spans[0].char_end - spans[0].char_begin) == "person climbs");
  CHECK(spans[0].score == doctest::Approx((0.9 + 0.8) / 2));
}

TEST_CASE("grammatical filter drops stop-word spans and emits phrases") {
  SalientSpan stop_only;
  stop_only.tokens = {"is", "the"};
  stop_only.origin = SpanOrigin::hypothesis;

  SalientSpan content;
  content.tokens = {"rock", "climbing."};
  content.origin = SpanOrigin::hypothesis;
  std::string hyp = "A person is rock climbing.";
  content.char_begin = hyp.find("rock");
  content.char_end = hyp.size();
  content.score = 0.8;

  WarningLog warnings;
  auto kept = grammatical_filter({stop_only, content}, hyp,
                                 "The rope is strong.", annotator(), &warnings);
  REQUIRE_FALSE(kept.empty());
  bool has_np = false, has_head = false;
  for (const SalientSpan& s : kept) {
    REQUIRE(s.category.has_value());
    if (*s.category == SpanCategory::noun_phrase) has_np = true;
    if (*s.category == SpanCategory::head_noun) has_head = true;
    // a span the filter emits is never pure stop words
    bool all_stop = true;
    for (const std::string& t : s.tokens)
      if (!annotator().is_stop(t)) all_stop = false;
    CHECK_FALSE(all_stop);
  }
  CHECK(has_np);
  CHECK(has_head);
}

TEST_CASE("pair selection ranks rope next to climbing, not person") {
  Embeddings emb = Embeddings::from_file(fixture("toy_embeddings.txt"));

  auto make = [](std::vector<std::string> tokens, SpanOrigin origin,
                 SpanCategory cat) {
    SalientSpan s;
    s.tokens = std::move(tokens);
    s.origin = origin;
    s.category = cat;
    return s;
  };
  std::vector<SalientSpan> spans = {
      make({"rope"}, SpanOrigin::update, SpanCategory::noun_phrase),
      make({"climbing"}, SpanOrigin::hypothesis, SpanCategory::verb_phrase),
      make({"person"}, SpanOrigin::hypothesis, SpanCategory::noun_phrase),
  };
  auto pairs = select_span_pairs(spans, emb, 3);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].from_update.text() == "rope");
  CHECK(pairs[0].from_hypothesis.text() == "climbing");
  CHECK(pairs[0].similarity > pairs[1].similarity);

  auto one = select_span_pairs(spans, emb, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].from_hypothesis.text() == "climbing");
}

TEST_CASE("pair selection needs spans from both sentences") {
  Embeddings emb = Embeddings::hashed(16, 9);
  SalientSpan s;
  s.tokens = {"rope"};
  s.origin = SpanOrigin::update;
  s.category = SpanCategory::noun_phrase;
  CHECK_THROWS_AS(select_span_pairs({s}, emb, 3), ContractError);
}

TEST_CASE("fully out-of-vocabulary pairs score zero and warn") {
  Embeddings emb = Embeddings::from_file(fixture("toy_embeddings.txt"));
  auto make = [](std::string word, SpanOrigin origin) {
    SalientSpan s;
    s.tokens = {std::move(word)};
    s.origin = origin;
    s.category = SpanCategory::noun_phrase;
    return s;
  };
  WarningLog warnings;
  auto pairs = select_span_pairs(
      {make("zzzq", SpanOrigin::update), make("xxxw", SpanOrigin::hypothesis)},
      emb, 3, &warnings);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].similarity == 0.0);
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("token scores align with the hypothesis and update layout") {
  auto corpus = load_dnli(fixture("toy_dnli.jsonl"));
  std::vector<DefeasibleInstance> train(corpus.begin(), corpus.begin() + 20);
  nn::ClassifierConfig cfg;
  cfg.epochs = 3;
  auto clf = train_type_classifier(train, cfg);

  DefeasibleInstance inst = corpus.front();
  WarningLog warnings;
  TokenSaliency s = score_tokens(clf, inst, &warnings);
  CHECK(s.hyp_tokens == nn::Vocab::whitespace_tokens(inst.hypothesis));
  CHECK(s.upd_tokens == nn::Vocab::whitespace_tokens(inst.update));
  CHECK(s.hyp_scores.size() == s.hyp_tokens.size());
  CHECK(s.upd_scores.size() == s.upd_tokens.size());
  double mass = 0.0;
  for (double v : s.hyp_scores) {
    CHECK(v >= 0.0);
    mass += v;
  }
  for (double v : s.upd_scores) mass += v;
  CHECK(mass <= 1.0 + 1e-9);  // premise and separators hold the rest
}
