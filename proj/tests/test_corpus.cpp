#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

using namespace streamtag;
using namespace testing;

namespace {

const char* const kTwoSentences =
    "# doc=d1 batch=200303 split=train\n"
    "Troops\tNNS\ttroop\tO\n"
    "were\tVBD\tbe\tO\n"
    "fired\tVBN\tfire\tB-Attack\n"
    "\n"
    "# doc=d1 batch=200303 split=dev\n"
    "They\tPRP\tthey\tO\n"
    "shot\tVBD\tshoot\tB-Attack\n"
    "down\tRP\tdown\tI-Attack\n"
    "\n";

}  // namespace

TEST_CASE("parse a minimal corpus") {
  const auto batches = parse_corpus_string(kTwoSentences);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].ordinal == 1);
  CHECK(batches[0].name == "200303");
  REQUIRE(batches[0].sentences.size() == 2);
  const Sentence& s = batches[0].sentences[1];
  CHECK(s.split == Split::Dev);
  CHECK(s.doc_id == "d1");
  CHECK(s.index_in_batch == 1);
  CHECK(s.tokens[1].lemma == "shoot");
  CHECK(s.tags[2].str() == "I-Attack");
}

TEST_CASE("an I tag after O is a validation error") {
  const std::string bad = "# doc=d batch=b split=train\nx\tNN\tx\tO\ny\tNN\ty\tI-Attack\n\n";
  CHECK_THROWS_AS(parse_corpus_string(bad), CorpusError);
}

TEST_CASE("malformed lines report their line number") {
  const std::string bad = "# doc=d batch=b split=train\nx\tNN\tx\tO\ny\tNN\ty\n\n";
  try {
    parse_corpus_string(bad);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_corpus_string("x\tNN\tx\tO\n\n"), CorpusError);
  CHECK_THROWS_AS(parse_corpus_string("# doc=d batch=b split=holdout\nx\tNN\tx\tO\n\n"), CorpusError);
  CHECK_THROWS_AS(parse_corpus_string("# doc=d batch=b split=train\nx\tNN\tx\tB-\n\n"), CorpusError);
}

TEST_CASE("batch ordinals follow first appearance") {
  std::string text;
  for (const char* name : {"200303", "200304", "200305", "200306"}) {
    text += std::string("# doc=d batch=") + name + " split=train\nx\tNN\tx\tO\n\n";
  }
  const auto batches = parse_corpus_string(text);
  REQUIRE(batches.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(batches[static_cast<std::size_t>(i)].ordinal == i + 1);
    CHECK(batches[static_cast<std::size_t>(i)].name == std::to_string(200303 + i));
  }
}

TEST_CASE("serialize is a fixpoint after one parse") {
  const auto once = serialize_corpus(parse_corpus_string(kTwoSentences));
  const auto parsed = parse_corpus_string(once);
  CHECK(parsed == parse_corpus_string(kTwoSentences));
  CHECK(serialize_corpus(parsed) == once);

  MicroWorld w;
  const auto text = serialize_corpus(w.batches);
  CHECK(parse_corpus_string(text) == w.batches);
  CHECK(serialize_corpus(parse_corpus_string(text)) == text);
}

TEST_CASE("serialize edge cases") {
  CHECK(serialize_corpus(std::vector<Batch>{}).empty());

  Batch b;
  b.name = "b";
  b.sentences.push_back(make_sentence({"a", "b", "c"}, {"O", "B-Attack", "O"}));
  const std::string text = serialize_corpus(std::vector<Batch>{b});
  std::istringstream in(text);
  std::size_t data = 0, blank = 0, header = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) ++blank;
    else if (line[0] == '#') ++header;
    else ++data;
  }
  CHECK(data == 3);
  CHECK(blank == 1);
  CHECK(header == 1);
}

TEST_CASE("tagset sizes and ids") {
  const TagSet one = build_tagset({"Attack"});
  CHECK(one.labels() == std::vector<std::string>{"O", "B-Attack", "I-Attack"});
  CHECK(one.id("O") == 0);

  std::vector<std::string> types;
  for (int k = 0; k < 33; ++k) types.push_back("T" + std::to_string(k));
  const TagSet ace = build_tagset(types);
  CHECK(ace.size() == 67);
  for (int id = 0; id < 67; ++id) CHECK(ace.id(ace.label(id)) == id);
  CHECK(ace.id("B-T5") == 11);
  CHECK(ace.id("I-T5") == 12);

  CHECK_THROWS(build_tagset({}));
  CHECK_THROWS(build_tagset({"Attack", "Attack"}));
}

TEST_CASE("validate_bio examples") {
  auto tags = [](std::initializer_list<const char*> labels) {
    std::vector<TriggerTag> out;
    for (const char* l : labels) out.push_back(*TriggerTag::parse(l));
    return out;
  };
  CHECK_FALSE(validate_bio(tags({"O", "B-Attack", "I-Attack"})).has_value());
  const auto lone = validate_bio(tags({"I-Attack"}));
  REQUIRE(lone.has_value());
  CHECK(lone->index == 0);
  const auto mismatch = validate_bio(tags({"B-Attack", "I-Meet"}));
  REQUIRE(mismatch.has_value());
  CHECK(mismatch->index == 1);
  CHECK(mismatch->actual == "I-Meet");
}

TEST_CASE("corpus statistics count spans") {
  const auto batches = parse_corpus_string(kTwoSentences);
  const auto stats = corpus_stats(batches);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].documents == 1);
  CHECK(stats[0].sentences == 2);
  CHECK(stats[0].words == 6);
  CHECK(stats[0].triggers == 2);
  CHECK(collect_event_types(batches) == std::vector<std::string>{"Attack"});
  CHECK(collect_split(batches, Split::Dev).size() == 1);
}
