#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"

using namespace streamtag;
using namespace testing;

namespace {

// One batch of `n` sentences, each "x shot down y" with a two-token trigger.
Batch ambiguous_batch(int n) {
  Batch b;
  b.name = "b";
  for (int i = 0; i < n; ++i) {
    Sentence s = make_sentence({"x", "shot", "down", "y"}, {"O", i % 2 ? "B-Attack" : "B-Die",
                                                            i % 2 ? "I-Attack" : "I-Die", "O"});
    s.tokens[1].lemma = "shoot";
    s.index_in_batch = i;
    b.sentences.push_back(std::move(s));
  }
  return b;
}

}  // namespace

TEST_CASE("confusing list holds lemmas seen under two types") {
  Batch b;
  b.sentences.push_back(make_sentence({"fired"}, {"B-Attack"}));
  b.sentences.push_back(make_sentence({"fired"}, {"B-EndPosition"}));
  b.sentences.push_back(make_sentence({"met"}, {"B-Meet"}));
  b.sentences.push_back(make_sentence({"met"}, {"B-Attack"}, Split::Dev));
  const ConfusingList list = build_confusing_list(std::vector<Batch>{b});
  CHECK(list.size() == 1);
  REQUIRE(list.find("fired") != nullptr);
  CHECK(*list.find("fired") == std::set<std::string>{"Attack", "EndPosition"});
  CHECK(list.find("met") == nullptr);
}

TEST_CASE("noise 0 and 1") {
  const Batch b = ambiguous_batch(50);
  const ConfusingList list = build_confusing_list(std::vector<Batch>{b});
  std::mt19937_64 rng(1);
  for (const Sentence& s : b.sentences) {
    CHECK(corrupt_sentence(s, 0.0, list, rng) == s);
    CorruptionStats stats;
    const Sentence c = corrupt_sentence(s, 1.0, list, rng, {}, &stats);
    CHECK(stats.corrupted() == 1);
    CHECK(c.tags != s.tags);
    CHECK_FALSE(validate_bio(c).has_value());
  }
  CHECK_THROWS(corrupt_sentence(b.sentences[0], 1.5, list, rng));
  CHECK_THROWS(corrupt_sentence(b.sentences[0], -0.1, list, rng));
}

TEST_CASE("corrupted fraction follows the level") {
  const Batch b = ambiguous_batch(12000);
  const ConfusingList list = build_confusing_list(std::vector<Batch>{b});
  std::mt19937_64 rng(5);
  CorruptionStats stats;
  for (const Sentence& s : b.sentences) {
    const Sentence c = corrupt_sentence(s, 0.25, list, rng, {}, &stats);
    REQUIRE_FALSE(validate_bio(c).has_value());
  }
  CHECK(stats.spans == 12000);
  const double rate = static_cast<double>(stats.corrupted()) / static_cast<double>(stats.spans);
  CHECK(rate > 0.24);
  CHECK(rate < 0.26);
  // Uniform over {drop, the other type}.
  CHECK(static_cast<double>(stats.swapped) / static_cast<double>(stats.corrupted()) ==
        doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("swaps keep the span extent and pick another type") {
  const Batch b = ambiguous_batch(400);
  const ConfusingList list = build_confusing_list(std::vector<Batch>{b});
  std::mt19937_64 rng(9);
  for (const Sentence& s : b.sentences) {
    const Sentence c = corrupt_sentence(s, 1.0, list, rng);
    if (c.tags[1].kind == TagKind::O) {
      CHECK(c.tags[2].kind == TagKind::O);
    } else {
      CHECK(c.tags[1].kind == TagKind::B);
      CHECK(c.tags[2].kind == TagKind::I);
      CHECK(c.tags[1].event_type != s.tags[1].event_type);
      CHECK(c.tags[2].event_type == c.tags[1].event_type);
    }
  }
}

TEST_CASE("drop weight skews the options") {
  const Batch b = ambiguous_batch(4000);
  const ConfusingList list = build_confusing_list(std::vector<Batch>{b});
  std::mt19937_64 rng(2);
  CorruptionStats stats;
  CorruptionOptions opt;
  opt.drop_weight = 3.0;
  for (const Sentence& s : b.sentences) corrupt_sentence(s, 1.0, list, rng, opt, &stats);
  CHECK(static_cast<double>(stats.dropped) / static_cast<double>(stats.corrupted()) ==
        doctest::Approx(0.75).epsilon(0.05));
}

TEST_CASE("groups touch only training splits and are deterministic") {
  MicroWorld w({{"a", 20, 10, 10}, {"b", 20, 10, 10}});
  NoiseSchedule schedule;
  schedule.per_batch = {{1, 0.9}, {2, 0.9}};
  const auto g1 = generate_groups(w.batches, schedule, 3, 42);
  const auto g2 = generate_groups(w.batches, schedule, 3, 42);
  REQUIRE(g1.size() == 3);
  CHECK(g1[0].group_id == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(g1[i].batches == g2[i].batches);
    for (Split s : {Split::Dev, Split::Test}) {
      std::vector<Batch> only_before, only_after;
      for (std::size_t k = 0; k < 2; ++k) {
        Batch a = w.batches[k], c = g1[i].batches[k];
        std::erase_if(a.sentences, [s](const Sentence& x) { return x.split != s; });
        std::erase_if(c.sentences, [s](const Sentence& x) { return x.split != s; });
        only_before.push_back(a);
        only_after.push_back(c);
      }
      CHECK(serialize_corpus(only_before) == serialize_corpus(only_after));
    }
  }
  CHECK(g1[0].batches != g1[1].batches);

  NoiseSchedule partial;
  partial.per_batch = {{1, 0.25}};
  CHECK_THROWS(generate_groups(w.batches, partial, 1, 0));
}

TEST_CASE("simulation config from json") {
  const auto cfg = SimulationConfig::from_json_text(
      R"({"schedule": {"1": 0.25, "2": 0.1}, "n_groups": 4, "master_seed": 9, "drop_weight": null})");
  CHECK(cfg.n_groups == 4);
  CHECK(cfg.master_seed == 9);
  CHECK(cfg.schedule.level(2) == 0.1);
  CHECK_FALSE(cfg.corruption.drop_weight.has_value());
  CHECK(SimulationConfig::from_json_text(R"({"schedule": {"1": 0}, "drop_weight": 2})").corruption.drop_weight == 2.0);
  CHECK_THROWS(SimulationConfig::from_json_text(R"({"schedule": {"1": 2.0}})"));
}

TEST_CASE("standard schedules decrease to zero") {
  const NoiseSchedule s25 = schedule_25();
  CHECK(s25.level(1) == 0.25);
  CHECK(s25.level(2) == 0.10);
  CHECK(s25.level(3) == 0.05);
  CHECK(s25.level(4) == 0.0);
  CHECK(schedule_10().level(1) == 0.10);
  CHECK(schedule_10().level(4) == 0.0);
}
