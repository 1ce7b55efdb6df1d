#include <chrono>

#include "doctest.h"
#include "helpers.hpp"

using namespace streamtag;
using namespace testing;

TEST_CASE("unambiguous lemmas give an empty confusing list") {
  SynthConfig cfg = SynthConfig::standard();
  cfg.ambiguous_fraction = 0.0;
  CHECK(build_confusing_list(generate_corpus(cfg)).empty());
}

TEST_CASE("fully ambiguous lemmas all become confusing") {
  SynthConfig cfg = SynthConfig::standard();
  cfg.ambiguous_fraction = 1.0;
  cfg.n_trigger_lemmas = 10;
  cfg.zipf_exponent = 0.0;
  CHECK(build_confusing_list(generate_corpus(cfg)).size() == 10);
}

TEST_CASE("generated corpora round trip and are deterministic") {
  const SynthConfig cfg = SynthConfig::standard();
  const auto start = std::chrono::steady_clock::now();
  const auto batches = generate_corpus(cfg);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(5));
  REQUIRE(batches.size() == 4);
  CHECK(batches[0].name == "200303");
  CHECK(batches[3].ordinal == 4);
  CHECK(batches[0].of_split(Split::Train).size() == 300);
  CHECK(batches[0].of_split(Split::Dev).size() == 40);
  CHECK(batches[0].of_split(Split::Test).size() == 40);
  CHECK(parse_corpus_string(serialize_corpus(batches)) == batches);
  CHECK(generate_corpus(cfg) == batches);
  SynthConfig other = cfg;
  other.seed = 2;
  CHECK(generate_corpus(other) != batches);
  CHECK(collect_event_types(batches).size() == 8);
}

TEST_CASE("the oracle tagger is exact on clean data") {
  const SynthConfig cfg = SynthConfig::standard();
  const SynthWorld world = build_world(cfg);
  const auto batches = generate_corpus(cfg, world);
  std::set<TriggerSpan> predicted, gold;
  std::size_t n = 0;
  for (const Batch& b : batches) {
    for (const Sentence& s : b.sentences) {
      for (const auto& span : extract_spans(oracle_tags(world, s), n)) predicted.insert(span);
      for (const auto& span : extract_spans(s.tags, n)) gold.insert(span);
      ++n;
    }
  }
  CHECK_FALSE(gold.empty());
  CHECK(trigger_prf(predicted, gold).f1 == 1.0);
}

TEST_CASE("guidelines cover every type") {
  const SynthConfig cfg = SynthConfig::standard();
  const SynthWorld world = build_world(cfg);
  const auto guide = generate_guidelines(cfg, world, 5, 3);
  CHECK(guide.size() == 40);
  std::map<std::string, int> per_type;
  for (const Sentence& s : guide) {
    CHECK_FALSE(validate_bio(s).has_value());
    for (const auto& span : extract_spans(s.tags)) ++per_type[span.event_type];
  }
  CHECK(per_type.size() == 8);
}

TEST_CASE("config validation and json") {
  SynthConfig cfg = SynthConfig::standard();
  cfg.n_trigger_lemmas = 3;
  CHECK_THROWS(build_world(cfg));
  const auto parsed = SynthConfig::from_json_text(
      R"({"n_event_types": 3, "sentence_length": [4, 5], "batches": [{"name": "x", "n_train": 2, "n_dev": 1, "n_test": 1}]})");
  CHECK(parsed.n_event_types == 3);
  CHECK(parsed.min_length == 4);
  CHECK(parsed.max_length == 5);
  REQUIRE(parsed.batches.size() == 1);
  CHECK(parsed.batches[0].name == "x");
  CHECK_THROWS(SynthConfig::from_json_text(R"({"sentence_length": [5, 4]})"));
}

TEST_CASE("structured embeddings cover the vocabulary") {
  MicroWorld w;
  for (const std::string& word : w.world.vocabulary()) CHECK(w.words->lookup(word) != w.words->unk_id());
  CHECK(w.words->dim() == 200);
}
