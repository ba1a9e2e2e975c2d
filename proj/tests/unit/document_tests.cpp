#include "doctest.h"

#include <set>

#include "ragforge/document.hpp"
#include "ragforge/errors.hpp"
#include "test_support.hpp"

using namespace ragforge;
using namespace ragforge::corpus;

TEST_CASE("distractor type slugs round trip") {
    CHECK(std::string(to_string(DistractorType::kDoppelganger)) == "doppelganger");
    CHECK(std::string(to_string(DistractorType::kFalseShortcut)) == "false_shortcut");
    CHECK(std::string(to_string(DistractorType::kFragmentedPuzzle)) == "fragmented_puzzle");
    CHECK(std::string(to_string(DistractorType::kSubjectiveFallacy)) == "subjective_fallacy");
    for (DistractorType t : kAllDistractorTypes) {
        CHECK(distractor_type_from_string(to_string(t)) == t);
    }
    CHECK_THROWS_AS(distractor_type_from_string("temporal_trap"), ValidationError);
}

TEST_CASE("origin slugs round trip") {
    CHECK(origin_from_string(to_string(DocOrigin::kKnowledgeBase)) == DocOrigin::kKnowledgeBase);
    CHECK(origin_from_string(to_string(DocOrigin::kDistractor)) == DocOrigin::kDistractor);
    CHECK_THROWS_AS(origin_from_string("primary"), ValidationError);
}

TEST_CASE("document json round trip") {
    Document d;
    d.id = "t-d0";
    d.title = "A rival attribution";
    d.text = "The 1852 almanac credits another firm.";
    d.origin = DocOrigin::kDistractor;
    d.distractor_type = DistractorType::kDoppelganger;
    d.source_node = "n0003";
    CHECK(document_from_json(to_json(d)) == d);

    Document plain;
    plain.id = "kb-1";
    plain.text = "A plain fact.";
    CHECK(document_from_json(to_json(plain)) == plain);
}

TEST_CASE("document_from_json fills defaults and validates") {
    const Document d = document_from_json(Json{{"id", "x"}, {"text", "some text"}});
    CHECK(d.title == "");
    CHECK(d.origin == DocOrigin::kKnowledgeBase);
    CHECK_FALSE(d.distractor_type.has_value());

    CHECK_THROWS_AS(document_from_json(Json{{"id", "x"}}), std::exception);
    CHECK_THROWS_AS(document_from_json(Json{{"text", "y"}}), std::exception);
}

TEST_CASE("validate enforces the distractor_type iff distractor rule") {
    Document d;
    d.id = "a";
    d.text = "b";
    CHECK_NOTHROW(validate(d));

    d.distractor_type = DistractorType::kDoppelganger;  // origin still knowledge_base
    CHECK_THROWS_AS(validate(d), ValidationError);

    d.origin = DocOrigin::kDistractor;
    CHECK_NOTHROW(validate(d));

    d.distractor_type.reset();
    CHECK_THROWS_AS(validate(d), ValidationError);

    Document empty_id;
    empty_id.text = "x";
    CHECK_THROWS_AS(validate(empty_id), ValidationError);
    Document empty_text;
    empty_text.id = "x";
    CHECK_THROWS_AS(validate(empty_text), ValidationError);
}

TEST_CASE("corpus jsonl round trip") {
    testsup::TempDir tmp;
    const auto path = tmp.path() / "corpus.jsonl";
    std::vector<Document> docs = testsup::synthetic_corpus(10);
    save_corpus_jsonl(path, docs);
    CHECK(load_corpus_jsonl(path) == docs);
}

TEST_CASE("fixture corpus loads and has unique ids") {
    const auto docs = load_corpus_jsonl(testsup::fixture_dir() / "corpus_50.jsonl");
    CHECK(docs.size() == 50);
    std::set<std::string> ids;
    for (const auto& d : docs) {
        CHECK(d.origin == DocOrigin::kKnowledgeBase);
        ids.insert(d.id);
    }
    CHECK(ids.size() == 50);
}
