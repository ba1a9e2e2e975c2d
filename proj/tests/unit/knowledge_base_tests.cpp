#include "doctest.h"

#include <memory>

#include "ragforge/errors.hpp"
#include "ragforge/knowledge_base.hpp"
#include "test_support.hpp"

using namespace ragforge;
using namespace ragforge::corpus;

namespace {

KnowledgeBase small_kb(int docs = 40, int dim = 64) {
    return KnowledgeBase::build(testsup::synthetic_corpus(docs),
                                std::make_shared<HashingEmbedder>(dim));
}

}  // namespace

TEST_CASE("search matches the brute-force oracle") {
    auto docs = testsup::synthetic_corpus(60);
    HashingEmbedder oracle_embedder(64);
    KnowledgeBase kb = KnowledgeBase::build(docs, std::make_shared<HashingEmbedder>(64));

    for (const std::string query :
         {"who rebuilt the iron footbridge", "tide tables for the coastal trade",
          "the observatory measured the survey markers", "a cargo ledger of the harbour"}) {
        for (int k : {1, 5, 20}) {
            for (double tau : {0.0, 0.3}) {
                const auto got = kb.search(query, k, tau);
                const auto want =
                    testsup::oracle_search(docs, oracle_embedder, query, k, true, tau);
                REQUIRE(got.size() == want.size());
                for (std::size_t i = 0; i < got.size(); ++i) {
                    CHECK(got[i].document.id == want[i].id);
                    CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-9));
                    CHECK(got[i].rank == static_cast<int>(i) + 1);
                    CHECK(got[i].score > tau);
                }
            }
        }
    }
}

TEST_CASE("top_k_unfiltered ignores tau") {
    auto docs = testsup::synthetic_corpus(30);
    HashingEmbedder oracle_embedder(64);
    KnowledgeBase kb = KnowledgeBase::build(docs, std::make_shared<HashingEmbedder>(64));
    const auto got = kb.top_k_unfiltered("winding gear in the second survey", 7);
    const auto want = testsup::oracle_search(docs, oracle_embedder,
                                             "winding gear in the second survey", 7, false, 0.0);
    REQUIRE(got.size() == 7);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].document.id == want[i].id);
}

TEST_CASE("threshold is strict: a score equal to tau is excluded") {
    // Identical texts embed to identical vectors, so the query scores 1.0
    // against both docs; tau == 1.0 must exclude them.
    std::vector<Document> docs(2);
    docs[0].id = "a";
    docs[0].text = "identical text";
    docs[1].id = "b";
    docs[1].text = "identical text";
    KnowledgeBase kb = KnowledgeBase::build(docs, std::make_shared<HashingEmbedder>(32));
    CHECK(kb.search("identical text", 5, 1.0).empty());
    CHECK(kb.search("identical text", 5, 0.999).size() == 2);
}

TEST_CASE("exact score ties break by ascending id") {
    std::vector<Document> docs(3);
    docs[0].id = "zz";
    docs[0].text = "the same sentence";
    docs[1].id = "aa";
    docs[1].text = "the same sentence";
    docs[2].id = "mm";
    docs[2].text = "the same sentence";
    KnowledgeBase kb = KnowledgeBase::build(docs, std::make_shared<HashingEmbedder>(32));
    const auto hits = kb.top_k_unfiltered("the same sentence", 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].document.id == "aa");
    CHECK(hits[1].document.id == "mm");
    CHECK(hits[2].document.id == "zz");
    CHECK(hits[0].rank == 1);
    CHECK(hits[2].rank == 3);
}

TEST_CASE("k larger than the corpus returns everything that clears tau") {
    KnowledgeBase kb = small_kb(5);
    CHECK(kb.top_k_unfiltered("anything at all", 50).size() == 5);
}

TEST_CASE("empty knowledge base searches cleanly") {
    KnowledgeBase kb = KnowledgeBase::build({}, std::make_shared<HashingEmbedder>(32));
    CHECK(kb.search("anything", 3, 0.0).empty());
    CHECK(kb.size() == 0);
}

TEST_CASE("invalid search arguments are rejected") {
    KnowledgeBase kb = small_kb(5);
    CHECK_THROWS_AS(kb.search("q", 0, 0.0), ValidationError);
    CHECK_THROWS_AS(kb.search("q", 3, 1.5), ValidationError);
    CHECK_THROWS_AS(kb.search("q", 3, -1.5), ValidationError);
}

TEST_CASE("duplicate document ids are rejected at build") {
    std::vector<Document> docs(2);
    docs[0].id = "same";
    docs[0].text = "one";
    docs[1].id = "same";
    docs[1].text = "two";
    CHECK_THROWS_WITH_AS(KnowledgeBase::build(docs, std::make_shared<HashingEmbedder>(16)),
                         doctest::Contains("duplicate document id"), ValidationError);
}

TEST_CASE("save and load round trip preserves search results") {
    testsup::TempDir tmp;
    auto docs = testsup::synthetic_corpus(25);
    KnowledgeBase original = KnowledgeBase::build(docs, std::make_shared<HashingEmbedder>(48));
    original.save(tmp.path() / "kb");

    KnowledgeBase loaded =
        KnowledgeBase::load(tmp.path() / "kb", std::make_shared<HashingEmbedder>(48));
    CHECK(loaded.size() == original.size());
    const auto a = original.top_k_unfiltered("the archive overlooks the grain store", 10);
    const auto b = loaded.top_k_unfiltered("the archive overlooks the grain store", 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].document.id == b[i].document.id);
        CHECK(a[i].score == b[i].score);  // float vectors round trip exactly
    }
}

TEST_CASE("loading under a different embedder identity fails") {
    testsup::TempDir tmp;
    KnowledgeBase original =
        KnowledgeBase::build(testsup::synthetic_corpus(5), std::make_shared<HashingEmbedder>(48));
    original.save(tmp.path() / "kb");
    CHECK_THROWS_WITH_AS(
        KnowledgeBase::load(tmp.path() / "kb", std::make_shared<HashingEmbedder>(64)),
        doctest::Contains("hash3gram/48"), ValidationError);
}

TEST_CASE("find locates documents by id") {
    KnowledgeBase kb = small_kb(5);
    REQUIRE(kb.find("syn-00003") != nullptr);
    CHECK(kb.find("syn-00003")->id == "syn-00003");
    CHECK(kb.find("missing") == nullptr);
}
