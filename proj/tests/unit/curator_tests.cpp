#include <doctest.h>

#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ragforge/curator.hpp"
#include "ragforge/errors.hpp"
#include "ragforge/knowledge_base.hpp"
#include "ragforge/scripted_backend.hpp"
#include "ragforge/util.hpp"
#include "test_support.hpp"

using namespace ragforge;
using namespace ragforge::curator;

namespace {

corpus::KnowledgeBase small_kb(int docs = 12) {
    return corpus::KnowledgeBase::build(testsup::synthetic_corpus(docs),
                                        std::make_shared<corpus::HashingEmbedder>(64));
}

ExploreConfig linear_config() {
    ExploreConfig cfg;
    cfg.branch.by_depth = {0.0};
    cfg.tau = -1.0;  // every document passes; observations are never empty
    cfg.default_top_k = 2;
    return cfg;
}

llm::ScriptEntry dense_entry(const std::string& thought, const std::string& query) {
    return testsup::call_entry(thought, llm::kDenseSearchToolName, Json{{"query", query}});
}

// The value uniform01() yields after `consumed` prior draws, recomputed from a
// fresh engine so the test counts draws without touching SeededRng internals.
double nth_uniform_after(std::uint64_t seed, int consumed) {
    std::mt19937_64 eng(seed);
    for (int i = 0; i < consumed; ++i) eng();
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

TreeNode make_node(std::string id, std::optional<std::string> parent, int depth, int doc_count,
                   std::vector<std::string> children) {
    TreeNode node;
    node.id = std::move(id);
    node.parent = std::move(parent);
    node.depth = depth;
    for (int i = 0; i < doc_count; ++i) {
        corpus::Document d;
        d.id = node.id + "-doc" + std::to_string(i);
        d.text = "filler";
        node.observation.push_back(std::move(d));
    }
    node.children = std::move(children);
    return node;
}

}  // namespace

TEST_CASE("branch schedule is 1-based and zero past the end") {
    BranchSchedule sched;
    sched.by_depth = {0.5, 0.25};
    CHECK(sched.probability_at(1) == 0.5);
    CHECK(sched.probability_at(2) == 0.25);
    CHECK(sched.probability_at(3) == 0.0);
    CHECK(sched.probability_at(99) == 0.0);
    CHECK_THROWS_AS(sched.probability_at(0), ValidationError);
    CHECK_THROWS_AS(sched.probability_at(-1), ValidationError);

    BranchSchedule empty;
    empty.by_depth = {};
    CHECK(empty.probability_at(1) == 0.0);
}

TEST_CASE("exploration config rejects out-of-range values") {
    ExploreConfig good;
    CHECK_NOTHROW(good.validate());

    ExploreConfig cfg = good;
    cfg.branch.by_depth = {0.5, 1.5};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = good;
    cfg.branch.by_depth = {-0.1};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = good;
    cfg.max_depth = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = good;
    cfg.tau = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = good;
    cfg.tau = -1.5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = good;
    cfg.default_top_k = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = good;
    cfg.distractor_budget = -1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = good;
    cfg.observation_char_cap = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("always-branch schedule at depth 1 yields seven nodes at max depth 4") {
    corpus::KnowledgeBase kb = small_kb();
    ExploreConfig cfg = linear_config();
    cfg.branch.by_depth = {1.0};
    cfg.max_depth = 4;

    std::vector<llm::ScriptEntry> entries;
    for (int i = 0; i < 6; ++i)
        entries.push_back(dense_entry("step", "entry " + std::to_string(i + 1)));
    auto scripted = std::make_shared<llm::ScriptedBackend>(entries);
    llm::RecordingBackend backend(scripted);

    SeededRng rng(2024);
    InfoTree tree = explore_tree("Synthetic Topic", "tree-0001", cfg, kb, backend, rng);

    CHECK_FALSE(tree.failed);
    CHECK(tree.rng_seed == 2024);
    REQUIRE(tree.nodes.size() == 7);
    CHECK(backend.call_count() == 6);
    CHECK(scripted->remaining() == 0);

    // Depth-first creation order: the root branches once, and the first
    // child's whole chain is grown before the sibling exists.
    CHECK(tree.root_id == "n0001");
    CHECK(tree.node("n0001").children == std::vector<std::string>{"n0002", "n0005"});
    CHECK(tree.node("n0002").children == std::vector<std::string>{"n0003"});
    CHECK(tree.node("n0003").children == std::vector<std::string>{"n0004"});
    CHECK(tree.node("n0004").children.empty());
    CHECK(tree.node("n0005").children == std::vector<std::string>{"n0006"});
    CHECK(tree.node("n0006").children == std::vector<std::string>{"n0007"});
    CHECK(tree.node("n0007").children.empty());
    CHECK(tree.node("n0004").depth == 4);
    CHECK(tree.node("n0007").depth == 4);

    CHECK(tree.quality.node_count == 7);
    CHECK(tree.quality.max_depth_reached == 4);
    CHECK(tree.quality.hop_count == 3);
    CHECK(tree.quality.distractor_count == 0);
    CHECK(tree.quality.distractor_budget == 5);
    CHECK(tree.quality.below_distractor_budget);

    // Five parents were expanded below max depth (n0004/n0007 stop before
    // drawing), so exactly five branch draws were consumed -- including the
    // zero-probability draws at depths 2 and 3.
    CHECK(rng.uniform01() == nth_uniform_after(2024, 5));
}

TEST_CASE("branch draw is consumed even when the probability is zero") {
    corpus::KnowledgeBase kb = small_kb();
    auto backend = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
        dense_entry("look", "entry 3"), testsup::text_entry("chain complete")});

    SeededRng rng(123);
    InfoTree tree = explore_tree("Synthetic Topic", "tree-0001", linear_config(), kb, *backend, rng);

    REQUIRE(tree.nodes.size() == 2);
    CHECK(tree.node("n0002").parent == std::string("n0001"));
    CHECK(tree.node("n0002").intent == std::string("look"));
    // Two nodes expanded (root and its child) -> exactly two draws.
    CHECK(rng.uniform01() == nth_uniform_after(123, 2));
}

TEST_CASE("dense search child records the retrieval observation") {
    corpus::KnowledgeBase kb = small_kb();
    ExploreConfig cfg = linear_config();  // default_top_k = 2, tau = -1

    auto backend = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
        dense_entry("default k", "entry 4"),
        testsup::call_entry("explicit k", llm::kDenseSearchToolName,
                            Json{{"query", "entry 5"}, {"top_k", 1}}),
        testsup::text_entry("done")});

    SeededRng rng(9);
    InfoTree tree = explore_tree("Synthetic Topic", "tree-0001", cfg, kb, *backend, rng);

    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.node("n0002").observation.size() == 2);  // default_top_k
    CHECK(tree.node("n0003").observation.size() == 1);  // explicit top_k

    // The observation matches an independent scan of the same corpus.
    corpus::HashingEmbedder oracle_embedder(64);
    auto oracle = testsup::oracle_search(testsup::synthetic_corpus(12), oracle_embedder, "entry 4",
                                         2, /*use_tau=*/true, -1.0);
    REQUIRE(oracle.size() == 2);
    CHECK(tree.node("n0002").observation[0].id == oracle[0].id);
    CHECK(tree.node("n0002").observation[1].id == oracle[1].id);
}

TEST_CASE("distractor curation child stamps store ids and source node") {
    corpus::KnowledgeBase kb = small_kb();
    Json writer_args{{"original_fact", "The mill wheel was recast in iron."},
                     {"distractor_type", "doppelganger"},
                     {"creating_guideline", "Describe a different mill with a similar name."},
                     {"distractor_texts", Json::array({"The Brightwood Mill wheel was recast in bronze.",
                                                       "Crane's smallest mill kept a wooden wheel."})}};
    auto backend = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
        dense_entry("look", "entry 2"),
        testsup::call_entry("plant traps", llm::kDistractorWriterToolName, writer_args),
        testsup::text_entry("done")});

    SeededRng rng(5);
    InfoTree tree = explore_tree("Synthetic Topic", "tree-0042", linear_config(), kb, *backend, rng);

    REQUIRE_FALSE(tree.failed);
    REQUIRE(tree.nodes.size() == 3);
    REQUIRE(tree.distractor_store.size() == 2);
    CHECK(tree.distractor_store[0].id == "tree-0042-d0");
    CHECK(tree.distractor_store[1].id == "tree-0042-d1");
    CHECK(tree.distractor_store[0].origin == corpus::DocOrigin::kDistractor);
    CHECK(tree.distractor_store[0].distractor_type == corpus::DistractorType::kDoppelganger);
    // The curation node's id is allocated before the documents are written, so
    // they point back at the node that created them.
    CHECK(tree.distractor_store[0].source_node == "n0003");
    CHECK(tree.distractor_store[1].source_node == "n0003");
    CHECK(tree.node("n0003").observation.size() == 2);
    CHECK(tree.node("n0003").observation[0].id == "tree-0042-d0");
    CHECK(tree.has_distractors());
    CHECK(tree.quality.distractor_count == 2);
    CHECK(tree.quality.below_distractor_budget);  // 2 < budget 5
}

TEST_CASE("curate_distractors builds validated documents with derived titles") {
    const std::vector<std::string> texts{
        "A short note.",
        "  The   committee\nrelocated twice,   and the second site kept the original nameplate "
        "through every renovation that followed in later decades.  "};
    auto docs = curate_distractors("fact", corpus::DistractorType::kFalseShortcut, "guide", texts,
                                   "n0007", "tree-0009-d", 3);
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].id == "tree-0009-d3");
    CHECK(docs[1].id == "tree-0009-d4");
    CHECK(docs[0].title == "A short note.");
    CHECK(docs[1].title == util::truncate_text(util::collapse_whitespace(texts[1]), 80));
    CHECK(docs[0].text == texts[0]);
    CHECK(docs[0].origin == corpus::DocOrigin::kDistractor);
    CHECK(docs[0].distractor_type == corpus::DistractorType::kFalseShortcut);
    CHECK(docs[0].source_node == "n0007");

    CHECK_THROWS_AS(curate_distractors("", corpus::DistractorType::kDoppelganger, "g", texts,
                                       "n0001", "p-", 0),
                    ValidationError);
    CHECK_THROWS_AS(curate_distractors("fact", corpus::DistractorType::kDoppelganger, "g", {},
                                       "n0001", "p-", 0),
                    ValidationError);
    CHECK_THROWS_AS(curate_distractors("fact", corpus::DistractorType::kDoppelganger, "g",
                                       {"ok", ""}, "n0001", "p-", 0),
                    ValidationError);
}

TEST_CASE("exploration context lists every step from the root down") {
    InfoTree tree;
    tree.tree_id = "tree-0001";
    tree.seed_entity = "Brightwater Mill";
    tree.root_id = "n0001";
    tree.nodes.emplace("n0001", make_node("n0001", std::nullopt, 1, 0, {"n0002"}));

    TreeNode step2 = make_node("n0002", std::string("n0001"), 2, 0, {"n0003"});
    step2.intent = "trace the wheel";
    llm::ToolCall call2;
    call2.call_id = "c1";
    call2.name = llm::kDenseSearchToolName;
    call2.arguments = Json{{"query", "mill wheel"}};
    step2.action = call2;
    corpus::Document hit;
    hit.id = "bm-06";
    hit.title = "Wheel note";
    hit.text = "The wheel was recast in iron.";
    step2.observation.push_back(hit);
    tree.nodes.emplace("n0002", std::move(step2));

    TreeNode step3 = make_node("n0003", std::string("n0002"), 3, 0, {});
    step3.intent = "widen";
    llm::ToolCall call3;
    call3.call_id = "c2";
    call3.name = llm::kDenseSearchToolName;
    call3.arguments = Json{{"query", "elsewhere"}};
    step3.action = call3;
    tree.nodes.emplace("n0003", std::move(step3));

    const std::string expected =
        "Seed entity: Brightwater Mill\n"
        "\nStep 1 (start)\n"
        "Topic: Brightwater Mill\n"
        "\nStep 2\n"
        "Intent: trace the wheel\n"
        "Action: query_knowledge_base_dense {\"query\":\"mill wheel\"}\n"
        "Observation:\n"
        "  [1] Wheel note\n"
        "      The wheel was recast in iron.\n"
        "\nStep 3\n"
        "Intent: widen\n"
        "Action: query_knowledge_base_dense {\"query\":\"elsewhere\"}\n"
        "Observation:\n"
        "  (no documents)\n"
        "\nYou are extending the deepest step. Call exactly one tool to add the next step, "
        "or reply with a short plain-text wrap-up if this chain is complete.\n";
    CHECK(render_exploration_context(tree, "n0003", 200) == expected);

    // Rendering an inner node stops at that node.
    const std::string inner = render_exploration_context(tree, "n0002", 200);
    CHECK(inner.find("Step 2") != std::string::npos);
    CHECK(inner.find("Step 3") == std::string::npos);
}

TEST_CASE("one unknown tool gets a corrective round, a second skips the expansion") {
    corpus::KnowledgeBase kb = small_kb();

    SUBCASE("recovers after the corrective reply") {
        auto scripted = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
            testsup::call_entry("hmm", "fetch_web_page", Json{{"url", "x"}}),
            dense_entry("retry", "entry 6"), testsup::text_entry("done")});
        llm::RecordingBackend backend(scripted);

        SeededRng rng(1);
        InfoTree tree =
            explore_tree("Synthetic Topic", "tree-0001", linear_config(), kb, backend, rng);

        CHECK_FALSE(tree.failed);
        CHECK(tree.nodes.size() == 2);
        REQUIRE(backend.call_count() == 3);
        // The second request carries the corrective tool reply.
        const auto recorded = backend.recorded();
        bool found = false;
        for (const llm::ChatMessage& m : recorded[1].messages) {
            if (m.content == "Unknown tool 'fetch_web_page'. Available tools: "
                             "query_knowledge_base_dense, write_distractor_docs.") {
                found = true;
            }
        }
        CHECK(found);
    }

    SUBCASE("second unknown tool skips without failing the tree") {
        auto backend = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
            testsup::call_entry("hmm", "fetch_web_page", Json{{"url", "x"}}),
            testsup::call_entry("hmm again", "browse", Json{{"url", "y"}})});

        SeededRng rng(1);
        InfoTree tree =
            explore_tree("Synthetic Topic", "tree-0001", linear_config(), kb, *backend, rng);

        CHECK_FALSE(tree.failed);
        CHECK(tree.nodes.size() == 1);  // expansion skipped, chain over
        CHECK(backend->remaining() == 0);
    }
}

TEST_CASE("malformed tool arguments get one corrective round") {
    corpus::KnowledgeBase kb = small_kb();

    SUBCASE("corrected arguments attach the child") {
        auto scripted = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
            testsup::call_entry("try", llm::kDenseSearchToolName, Json{{"query", ""}}),
            dense_entry("fixed", "entry 7"), testsup::text_entry("done")});
        llm::RecordingBackend backend(scripted);

        SeededRng rng(1);
        InfoTree tree =
            explore_tree("Synthetic Topic", "tree-0001", linear_config(), kb, backend, rng);

        CHECK_FALSE(tree.failed);
        REQUIRE(tree.nodes.size() == 2);
        CHECK(tree.node("n0002").action->arguments.at("query") == "entry 7");
        const auto recorded = backend.recorded();
        bool found = false;
        for (const llm::ChatMessage& m : recorded[1].messages) {
            if (m.content == "Invalid arguments for query_knowledge_base_dense: 'query' must be "
                             "a non-empty string. Repeat the call with corrected arguments.") {
                found = true;
            }
        }
        CHECK(found);
    }

    SUBCASE("a second malformed call fails the whole tree") {
        auto backend = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
            testsup::call_entry("try", llm::kDenseSearchToolName, Json{{"query", ""}}),
            testsup::call_entry("still wrong", llm::kDenseSearchToolName, Json{{"top_k", 3}})});

        SeededRng rng(1);
        InfoTree tree =
            explore_tree("Synthetic Topic", "tree-0001", linear_config(), kb, *backend, rng);

        CHECK(tree.failed);
        CHECK(tree.failure_reason.find("malformed query_knowledge_base_dense arguments after "
                                       "corrective reply") != std::string::npos);
        CHECK(tree.nodes.size() == 1);
    }

    SUBCASE("unsupported distractor dimension is malformed") {
        Json bad{{"original_fact", "f"},
                 {"distractor_type", "temporal_trap"},
                 {"creating_guideline", "g"},
                 {"distractor_texts", Json::array({"text"})}};
        Json good = bad;
        good["distractor_type"] = "subjective_fallacy";
        auto backend = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
            testsup::call_entry("plant", llm::kDistractorWriterToolName, bad),
            testsup::call_entry("plant", llm::kDistractorWriterToolName, good),
            testsup::text_entry("done")});

        SeededRng rng(1);
        InfoTree tree =
            explore_tree("Synthetic Topic", "tree-0001", linear_config(), kb, *backend, rng);

        CHECK_FALSE(tree.failed);
        REQUIRE(tree.distractor_store.size() == 1);
        CHECK(tree.distractor_store[0].distractor_type ==
              corpus::DistractorType::kSubjectiveFallacy);
    }

    SUBCASE("a wrap-up after the corrective reply ends the chain cleanly") {
        auto backend = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
            testsup::call_entry("try", llm::kDenseSearchToolName, Json{{"query", ""}}),
            testsup::text_entry("never mind, the chain is complete")});

        SeededRng rng(1);
        InfoTree tree =
            explore_tree("Synthetic Topic", "tree-0001", linear_config(), kb, *backend, rng);

        CHECK_FALSE(tree.failed);
        CHECK(tree.nodes.size() == 1);
    }
}

TEST_CASE("explore_tree validates inputs") {
    corpus::KnowledgeBase kb = small_kb(4);
    auto backend = std::make_shared<llm::ScriptedBackend>(
        std::vector<llm::ScriptEntry>{testsup::text_entry("done")});
    SeededRng rng(1);
    CHECK_THROWS_AS(explore_tree("", "tree-0001", linear_config(), kb, *backend, rng),
                    ValidationError);
    ExploreConfig bad = linear_config();
    bad.max_depth = 0;
    CHECK_THROWS_AS(explore_tree("Topic", "tree-0001", bad, kb, *backend, rng), ValidationError);
}

TEST_CASE("identical scripts and seed grow identical trees") {
    corpus::KnowledgeBase kb = small_kb();
    ExploreConfig cfg = linear_config();
    cfg.branch.by_depth = {1.0};
    cfg.max_depth = 3;

    // call_entry mints unique ids from a global counter, so pin ids by hand to
    // make the two scripts byte-identical.
    auto run = [&]() {
        std::vector<llm::ScriptEntry> entries;
        for (int i = 0; i < 4; ++i) {
            llm::ToolCall call;
            call.call_id = "call-" + std::to_string(i + 1);
            call.name = llm::kDenseSearchToolName;
            call.arguments = Json{{"query", "entry " + std::to_string(i + 1)}};
            llm::ScriptEntry entry;
            entry.turn = llm::ChatMessage::assistant_call("step", {call});
            entries.push_back(entry);
        }
        auto backend = std::make_shared<llm::ScriptedBackend>(entries);
        SeededRng rng(77);
        return tree_to_json(explore_tree("Synthetic Topic", "tree-0001", cfg, kb, *backend, rng));
    };
    CHECK(run().dump() == run().dump());
}

TEST_CASE("path selection scores by documents along the path") {
    InfoTree tree;
    tree.tree_id = "tree-0050";
    tree.seed_entity = "Topic";
    tree.root_id = "n0001";
    tree.nodes.emplace("n0001", make_node("n0001", std::nullopt, 1, 0, {"n0002", "n0005"}));
    tree.nodes.emplace("n0002", make_node("n0002", std::string("n0001"), 2, 2, {"n0003", "n0004"}));
    tree.nodes.emplace("n0003", make_node("n0003", std::string("n0002"), 3, 1, {}));
    tree.nodes.emplace("n0004", make_node("n0004", std::string("n0002"), 3, 3, {}));
    tree.nodes.emplace("n0005", make_node("n0005", std::string("n0001"), 2, 1, {"n0006"}));
    tree.nodes.emplace("n0006", make_node("n0006", std::string("n0005"), 3, 2, {}));

    // Brute force over every leaf, with the same ordering rule.
    struct Ref {
        std::string leaf;
        std::vector<std::string> ids;
        int score;
    };
    std::vector<Ref> ref;
    for (const std::string& leaf : tree.leaves()) {
        Ref r;
        r.leaf = leaf;
        r.ids = tree.path_from_root(leaf);
        r.score = 0;
        for (const std::string& id : r.ids) r.score += node_document_count(tree.node(id));
        ref.push_back(std::move(r));
    }
    std::sort(ref.begin(), ref.end(), [](const Ref& a, const Ref& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.leaf < b.leaf;
    });

    for (int m : {1, 2, 3, 10}) {
        std::vector<InfoPath> got = select_paths(tree, m);
        const std::size_t want = std::min<std::size_t>(ref.size(), static_cast<std::size_t>(m));
        REQUIRE(got.size() == want);
        for (std::size_t i = 0; i < want; ++i) {
            CHECK(got[i].node_ids == ref[i].ids);
            CHECK(got[i].score == ref[i].score);
            CHECK(got[i].tree_id == "tree-0050");
        }
    }

    // Hand-derived expectations: 0+2+3=5 beats the two 3-point paths, and the
    // tie between n0003 and n0006 goes to the smaller leaf id.
    std::vector<InfoPath> top = select_paths(tree, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].node_ids == std::vector<std::string>{"n0001", "n0002", "n0004"});
    CHECK(top[0].score == 5);
    CHECK(top[1].node_ids == std::vector<std::string>{"n0001", "n0002", "n0003"});
    CHECK(top[1].score == 3);
    CHECK(top[2].node_ids == std::vector<std::string>{"n0001", "n0005", "n0006"});
    CHECK(top[2].score == 3);

    CHECK_THROWS_AS(select_paths(tree, 0), ValidationError);
}

TEST_CASE("tree json round trip resolves documents from store and corpus") {
    corpus::KnowledgeBase kb = small_kb();
    Json writer_args{{"original_fact", "Entry 2 mentions a detail."},
                     {"distractor_type", "fragmented_puzzle"},
                     {"creating_guideline", "Scatter the detail."},
                     {"distractor_texts", Json::array({"Half of the detail.", "The other half."})}};
    auto backend = std::make_shared<llm::ScriptedBackend>(std::vector<llm::ScriptEntry>{
        dense_entry("look", "entry 2"),
        testsup::call_entry("plant", llm::kDistractorWriterToolName, writer_args),
        testsup::text_entry("done")});

    SeededRng rng(31);
    InfoTree tree = explore_tree("Synthetic Topic", "tree-0031", linear_config(), kb, *backend, rng);
    REQUIRE_FALSE(tree.failed);
    REQUIRE(tree.nodes.size() == 3);
    REQUIRE(tree.distractor_store.size() == 2);

    const Json j = tree_to_json(tree);
    InfoTree back = tree_from_json(j, kb);
    CHECK(tree_to_json(back) == j);

    CHECK(back.tree_id == tree.tree_id);
    CHECK(back.seed_entity == tree.seed_entity);
    CHECK(back.rng_seed == tree.rng_seed);
    REQUIRE(back.nodes.size() == 3);
    // Retrieved documents come back from the corpus, written ones from the
    // embedded store, both with full text.
    CHECK(back.node("n0002").observation.size() == tree.node("n0002").observation.size());
    CHECK(back.node("n0002").observation[0] == tree.node("n0002").observation[0]);
    CHECK(back.node("n0003").observation[0] == tree.node("n0003").observation[0]);
    CHECK(back.node("n0003").action->arguments == writer_args);

    // A node referencing a document neither side knows is a hard error.
    Json broken = j;
    broken["nodes"][1]["observation_doc_ids"] = Json::array({"ghost-99"});
    CHECK_THROWS_WITH_AS(tree_from_json(broken, kb),
                         doctest::Contains("references unknown document"), ParseError);
}

TEST_CASE("path json round trip") {
    InfoPath path;
    path.tree_id = "tree-0002";
    path.node_ids = {"n0001", "n0002", "n0004"};
    path.score = 6;
    const Json j = path_to_json(path);
    InfoPath back = path_from_json(j);
    CHECK(back.tree_id == path.tree_id);
    CHECK(back.node_ids == path.node_ids);
    CHECK(back.score == path.score);
}
