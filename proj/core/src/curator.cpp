#include "ragforge/curator.hpp"

#include <algorithm>

#include "ragforge/errors.hpp"
#include "ragforge/prompts.hpp"

namespace ragforge::curator {

namespace {

constexpr int kNodeIdWidth = 4;

std::string node_id_for(std::size_t creation_index) {
    return "n" + util::format_index(creation_index, kNodeIdWidth);
}

std::string title_from_text(const std::string& text) {
    return util::truncate_text(util::collapse_whitespace(text), 80);
}

struct ArgError {
    std::string message;
};

// Dense-tool argument checks, mirroring the advertised schema.
std::variant<std::pair<std::string, int>, ArgError> parse_dense_args(const Json& args,
                                                                     int default_top_k) {
    if (!args.contains("query") || !args["query"].is_string() ||
        args["query"].get<std::string>().empty()) {
        return ArgError{"'query' must be a non-empty string"};
    }
    int top_k = default_top_k;
    if (args.contains("top_k") && !args["top_k"].is_null()) {
        if (!args["top_k"].is_number_integer() || args["top_k"].get<int>() < 1) {
            return ArgError{"'top_k' must be a positive integer"};
        }
        top_k = args["top_k"].get<int>();
    }
    return std::make_pair(args["query"].get<std::string>(), top_k);
}

struct DistractorArgs {
    std::string original_fact;
    corpus::DistractorType type;
    std::string guideline;
    std::vector<std::string> texts;
};

std::variant<DistractorArgs, ArgError> parse_distractor_args(const Json& args) {
    DistractorArgs out;
    if (!args.contains("original_fact") || !args["original_fact"].is_string() ||
        args["original_fact"].get<std::string>().empty()) {
        return ArgError{"'original_fact' must be a non-empty string"};
    }
    out.original_fact = args["original_fact"].get<std::string>();

    if (!args.contains("distractor_type") || !args["distractor_type"].is_string()) {
        return ArgError{"'distractor_type' must be one of the four dimension slugs"};
    }
    try {
        out.type = corpus::distractor_type_from_string(args["distractor_type"].get<std::string>());
    } catch (const ValidationError&) {
        return ArgError{"'distractor_type' must be one of the four dimension slugs"};
    }

    if (!args.contains("creating_guideline") || !args["creating_guideline"].is_string()) {
        return ArgError{"'creating_guideline' must be a string"};
    }
    out.guideline = args["creating_guideline"].get<std::string>();

    if (!args.contains("distractor_texts") || !args["distractor_texts"].is_array() ||
        args["distractor_texts"].empty()) {
        return ArgError{"'distractor_texts' must be a non-empty array of strings"};
    }
    for (const Json& t : args["distractor_texts"]) {
        if (!t.is_string() || t.get<std::string>().empty()) {
            return ArgError{"'distractor_texts' entries must be non-empty strings"};
        }
        out.texts.push_back(t.get<std::string>());
    }
    return out;
}

}  // namespace

double BranchSchedule::probability_at(int depth) const {
    if (depth < 1) throw ValidationError("depth is 1-based");
    const std::size_t idx = static_cast<std::size_t>(depth - 1);
    if (idx >= by_depth.size()) return 0.0;
    return by_depth[idx];
}

void ExploreConfig::validate() const {
    for (double p : branch.by_depth) {
        if (p < 0.0 || p > 1.0) throw ValidationError("branch probabilities must lie in [0, 1]");
    }
    if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (tau < -1.0 || tau > 1.0) throw ValidationError("tau must lie in [-1, 1]");
    if (default_top_k < 1) throw ValidationError("default_top_k must be >= 1");
    if (distractor_budget < 0) throw ValidationError("distractor_budget must be >= 0");
    if (observation_char_cap < 1) throw ValidationError("observation_char_cap must be >= 1");
}

int node_document_count(const TreeNode& node) {
    return static_cast<int>(node.observation.size());
}

const TreeNode& InfoTree::node(const std::string& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw ValidationError("unknown node id: " + id);
    return it->second;
}

std::vector<std::string> InfoTree::leaves() const {
    std::vector<std::string> out;
    for (const auto& [id, node] : nodes) {
        if (node.children.empty()) out.push_back(id);
    }
    return out;  // map order == ascending id order
}

std::vector<std::string> InfoTree::path_from_root(const std::string& leaf_id) const {
    std::vector<std::string> out;
    const TreeNode* cur = &node(leaf_id);
    out.push_back(cur->id);
    while (cur->parent) {
        cur = &node(*cur->parent);
        out.push_back(cur->id);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<corpus::Document> curate_distractors(const std::string& original_fact,
                                                 corpus::DistractorType type,
                                                 const std::string& guideline,
                                                 const std::vector<std::string>& texts,
                                                 const std::string& source_node,
                                                 const std::string& id_prefix,
                                                 std::size_t start_index) {
    if (original_fact.empty()) throw ValidationError("original_fact must be non-empty");
    if (texts.empty()) throw ValidationError("distractor_texts must be non-empty");
    (void)guideline;  // recorded in the node's action arguments, not on the documents

    std::vector<corpus::Document> docs;
    docs.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) throw ValidationError("distractor text must be non-empty");
        corpus::Document doc;
        doc.id = id_prefix + std::to_string(start_index + i);
        doc.title = title_from_text(texts[i]);
        doc.text = texts[i];
        doc.origin = corpus::DocOrigin::kDistractor;
        doc.distractor_type = type;
        doc.source_node = source_node;
        validate(doc);
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::string render_exploration_context(const InfoTree& tree, const std::string& node_id,
                                       int observation_char_cap) {
    std::vector<std::string> ids = tree.path_from_root(node_id);
    std::string out = "Seed entity: " + tree.seed_entity + "\n";
    for (const std::string& id : ids) {
        const TreeNode& node = tree.node(id);
        out += "\nStep " + std::to_string(node.depth);
        if (!node.parent) {
            out += " (start)\nTopic: " + tree.seed_entity + "\n";
            continue;
        }
        out += "\nIntent: " + (node.intent ? *node.intent : std::string()) + "\n";
        out += "Action: " + node.action->name + " " + node.action->arguments.dump() + "\n";
        out += "Observation:\n";
        if (node.observation.empty()) {
            out += "  (no documents)\n";
        }
        for (std::size_t i = 0; i < node.observation.size(); ++i) {
            const corpus::Document& doc = node.observation[i];
            out += "  [" + std::to_string(i + 1) + "] " + doc.title + "\n";
            out += "      " +
                   util::truncate_text(doc.text, static_cast<std::size_t>(observation_char_cap)) +
                   "\n";
        }
    }
    out +=
        "\nYou are extending the deepest step. Call exactly one tool to add the next step, "
        "or reply with a short plain-text wrap-up if this chain is complete.\n";
    return out;
}

namespace {

struct Explorer {
    const ExploreConfig& cfg;
    const corpus::KnowledgeBase& kb;
    llm::ChatBackend& backend;
    SeededRng& rng;
    InfoTree& tree;
    std::size_t next_index;  // last allocated creation index

    // Returns the id of the child created under parent_id, or nullopt when
    // the model ended the chain or the expansion had to be skipped.
    std::optional<std::string> expand_node(const std::string& parent_id) {
        std::vector<llm::ChatMessage> messages{
            llm::ChatMessage::system(prompts::exploration_system()),
            llm::ChatMessage::user(
                render_exploration_context(tree, parent_id, cfg.observation_char_cap))};
        std::vector<Json> tools{llm::dense_search_tool_schema(),
                                llm::distractor_writer_tool_schema()};

        llm::ChatMessage reply = llm::chat_complete(backend, messages, tools, cfg.sampling);

        // One corrective round for an unknown tool; a second unknown tool
        // skips this expansion without failing the tree.
        for (int round = 0; round < 2; ++round) {
            llm::AssistantTurn turn = llm::parse_assistant_turn(reply);
            if (std::holds_alternative<llm::FinalText>(turn)) return std::nullopt;

            const llm::ToolCall call = std::get<llm::ToolRequest>(turn).calls.front();
            if (call.name == llm::kDenseSearchToolName ||
                call.name == llm::kDistractorWriterToolName) {
                return execute_call(parent_id, reply, std::move(messages), call);
            }
            if (round == 1) return std::nullopt;

            messages.push_back(reply);
            for (const llm::ToolCall& c : std::get<llm::ToolRequest>(turn).calls) {
                messages.push_back(llm::ChatMessage::tool(
                    c.call_id, "Unknown tool '" + c.name + "'. Available tools: " +
                                   llm::kDenseSearchToolName + ", " +
                                   llm::kDistractorWriterToolName + "."));
            }
            reply = llm::chat_complete(backend, messages, tools, cfg.sampling);
        }
        return std::nullopt;
    }

    std::optional<std::string> execute_call(const std::string& parent_id, llm::ChatMessage reply,
                                            std::vector<llm::ChatMessage> messages,
                                            llm::ToolCall call) {
        std::vector<Json> tools{llm::dense_search_tool_schema(),
                                llm::distractor_writer_tool_schema()};
        // One corrective round for malformed arguments; a second failure is a
        // hard protocol error that fails the whole tree.
        for (int round = 0; round < 2; ++round) {
            std::string error;
            if (call.name == llm::kDenseSearchToolName) {
                auto parsed = parse_dense_args(call.arguments, cfg.default_top_k);
                if (auto* ok = std::get_if<std::pair<std::string, int>>(&parsed)) {
                    return attach_search_child(parent_id, reply.content, call, ok->first,
                                               ok->second);
                }
                error = std::get<ArgError>(parsed).message;
            } else {
                auto parsed = parse_distractor_args(call.arguments);
                if (auto* ok = std::get_if<DistractorArgs>(&parsed)) {
                    return attach_curation_child(parent_id, reply.content, call, *ok);
                }
                error = std::get<ArgError>(parsed).message;
            }

            if (round == 1) {
                throw ProtocolError("malformed " + call.name +
                                    " arguments after corrective reply: " + error);
            }
            messages.push_back(reply);
            for (const llm::ToolCall& c : reply.tool_calls) {
                messages.push_back(llm::ChatMessage::tool(
                    c.call_id, c.call_id == call.call_id
                                   ? "Invalid arguments for " + call.name + ": " + error +
                                         ". Repeat the call with corrected arguments."
                                   : "Ignored; issue one tool call at a time."));
            }
            reply = llm::chat_complete(backend, messages, tools, cfg.sampling);
            llm::AssistantTurn turn = llm::parse_assistant_turn(reply);
            if (std::holds_alternative<llm::FinalText>(turn)) return std::nullopt;
            call = std::get<llm::ToolRequest>(turn).calls.front();
            if (call.name != llm::kDenseSearchToolName &&
                call.name != llm::kDistractorWriterToolName) {
                return std::nullopt;
            }
        }
        return std::nullopt;
    }

    std::string alloc_child(const std::string& parent_id, const std::string& intent,
                            llm::ToolCall call, std::vector<corpus::Document> observation) {
        TreeNode child;
        child.id = node_id_for(++next_index);
        child.parent = parent_id;
        child.depth = tree.node(parent_id).depth + 1;
        child.action = std::move(call);
        child.intent = intent;
        child.observation = std::move(observation);
        const std::string id = child.id;
        tree.nodes.emplace(id, std::move(child));
        tree.nodes.at(parent_id).children.push_back(id);
        return id;
    }

    std::optional<std::string> attach_search_child(const std::string& parent_id,
                                                   const std::string& intent, llm::ToolCall call,
                                                   const std::string& query, int top_k) {
        std::vector<corpus::RetrievalHit> hits = kb.search(query, top_k, cfg.tau);
        std::vector<corpus::Document> observation;
        observation.reserve(hits.size());
        for (corpus::RetrievalHit& hit : hits) observation.push_back(std::move(hit.document));
        // An empty observation still becomes a node; the model sees the miss
        // and decides how to continue.
        return alloc_child(parent_id, intent, std::move(call), std::move(observation));
    }

    std::optional<std::string> attach_curation_child(const std::string& parent_id,
                                                     const std::string& intent, llm::ToolCall call,
                                                     const DistractorArgs& args) {
        const std::string child_id = node_id_for(next_index + 1);
        std::vector<corpus::Document> docs = curate_distractors(
            args.original_fact, args.type, args.guideline, args.texts, child_id,
            tree.tree_id + "-d", tree.distractor_store.size());
        for (const corpus::Document& d : docs) tree.distractor_store.push_back(d);
        return alloc_child(parent_id, intent, std::move(call), std::move(docs));
    }

    void expand_chain(const std::string& node_id) {
        if (tree.node(node_id).depth >= cfg.max_depth) return;
        const bool branch = rng.uniform01() < cfg.branch.probability_at(tree.node(node_id).depth);
        const int expansions = branch ? 2 : 1;
        // Depth-first: the first child's entire subtree is grown before the
        // sibling is created, so creation order encodes DFS order.
        for (int i = 0; i < expansions; ++i) {
            std::optional<std::string> child = expand_node(node_id);
            if (child) expand_chain(*child);
        }
    }
};

TreeQuality compute_quality(const InfoTree& tree, int budget) {
    TreeQuality q;
    q.node_count = static_cast<int>(tree.nodes.size());
    q.distractor_count = static_cast<int>(tree.distractor_store.size());
    q.distractor_budget = budget;
    q.below_distractor_budget = q.distractor_count < budget;
    for (const auto& [id, node] : tree.nodes) {
        q.max_depth_reached = std::max(q.max_depth_reached, node.depth);
    }
    q.hop_count = q.max_depth_reached - 1;
    return q;
}

}  // namespace

InfoTree explore_tree(const std::string& seed_entity, const std::string& tree_id,
                      const ExploreConfig& config, const corpus::KnowledgeBase& kb,
                      llm::ChatBackend& backend, SeededRng& rng) {
    config.validate();
    if (seed_entity.empty()) throw ValidationError("seed entity must be non-empty");

    InfoTree tree;
    tree.tree_id = tree_id;
    tree.seed_entity = seed_entity;
    tree.rng_seed = rng.seed();
    tree.root_id = node_id_for(1);

    TreeNode root;
    root.id = tree.root_id;
    root.depth = 1;
    tree.nodes.emplace(root.id, std::move(root));

    Explorer explorer{config, kb, backend, rng, tree, /*next_index=*/1};
    try {
        explorer.expand_chain(tree.root_id);
    } catch (const Error& e) {
        // Keep the partial tree for inspection; downstream stages skip it.
        tree.failed = true;
        tree.failure_reason = e.what();
    }
    tree.quality = compute_quality(tree, config.distractor_budget);
    return tree;
}

std::vector<InfoPath> select_paths(const InfoTree& tree, int m) {
    if (m < 1) throw ValidationError("path selection m must be >= 1");

    struct Scored {
        std::string leaf;
        InfoPath path;
    };
    std::vector<Scored> scored;
    for (const std::string& leaf : tree.leaves()) {
        InfoPath path;
        path.tree_id = tree.tree_id;
        path.node_ids = tree.path_from_root(leaf);
        int score = 0;
        for (const std::string& id : path.node_ids) score += node_document_count(tree.node(id));
        path.score = score;
        scored.push_back(Scored{leaf, std::move(path)});
    }

    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.path.score != b.path.score) return a.path.score > b.path.score;
        return a.leaf < b.leaf;
    });
    if (scored.size() > static_cast<std::size_t>(m)) scored.resize(static_cast<std::size_t>(m));

    std::vector<InfoPath> out;
    out.reserve(scored.size());
    for (Scored& s : scored) out.push_back(std::move(s.path));
    return out;
}

Json tree_to_json(const InfoTree& tree) {
    Json j = Json::object();
    j["tree_id"] = tree.tree_id;
    j["seed_entity"] = tree.seed_entity;
    j["rng_seed"] = tree.rng_seed;
    j["failed"] = tree.failed;
    j["failure_reason"] = tree.failure_reason;
    j["root_id"] = tree.root_id;

    Json nodes = Json::array();
    for (const auto& [id, node] : tree.nodes) {
        Json n = Json::object();
        n["id"] = node.id;
        n["parent"] = node.parent ? Json(*node.parent) : Json(nullptr);
        n["depth"] = node.depth;
        n["intent"] = node.intent ? Json(*node.intent) : Json(nullptr);
        if (node.action) {
            Json a = Json::object();
            a["call_id"] = node.action->call_id;
            a["name"] = node.action->name;
            a["arguments"] = node.action->arguments;
            n["action"] = std::move(a);
        } else {
            n["action"] = nullptr;
        }
        Json obs = Json::array();
        for (const corpus::Document& d : node.observation) obs.push_back(d.id);
        n["observation_doc_ids"] = std::move(obs);
        n["children"] = node.children;
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);

    Json store = Json::array();
    for (const corpus::Document& d : tree.distractor_store) store.push_back(corpus::to_json(d));
    j["distractor_store"] = std::move(store);

    Json q = Json::object();
    q["node_count"] = tree.quality.node_count;
    q["distractor_count"] = tree.quality.distractor_count;
    q["distractor_budget"] = tree.quality.distractor_budget;
    q["below_distractor_budget"] = tree.quality.below_distractor_budget;
    q["max_depth_reached"] = tree.quality.max_depth_reached;
    q["hop_count"] = tree.quality.hop_count;
    j["quality"] = std::move(q);
    return j;
}

InfoTree tree_from_json(const Json& j, const corpus::KnowledgeBase& kb) {
    InfoTree tree;
    tree.tree_id = j.at("tree_id").get<std::string>();
    tree.seed_entity = j.at("seed_entity").get<std::string>();
    tree.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    tree.failed = j.at("failed").get<bool>();
    tree.failure_reason = j.value("failure_reason", std::string());
    tree.root_id = j.at("root_id").get<std::string>();

    for (const Json& d : j.at("distractor_store")) {
        tree.distractor_store.push_back(corpus::document_from_json(d));
    }

    std::map<std::string, const corpus::Document*> store_by_id;
    for (const corpus::Document& d : tree.distractor_store) store_by_id.emplace(d.id, &d);

    for (const Json& n : j.at("nodes")) {
        TreeNode node;
        node.id = n.at("id").get<std::string>();
        if (!n.at("parent").is_null()) node.parent = n["parent"].get<std::string>();
        node.depth = n.at("depth").get<int>();
        if (!n.at("intent").is_null()) node.intent = n["intent"].get<std::string>();
        if (!n.at("action").is_null()) {
            llm::ToolCall call;
            call.call_id = n["action"].at("call_id").get<std::string>();
            call.name = n["action"].at("name").get<std::string>();
            call.arguments = n["action"].at("arguments");
            node.action = std::move(call);
        }
        for (const Json& doc_id_json : n.at("observation_doc_ids")) {
            const std::string doc_id = doc_id_json.get<std::string>();
            if (auto it = store_by_id.find(doc_id); it != store_by_id.end()) {
                node.observation.push_back(*it->second);
            } else if (const corpus::Document* doc = kb.find(doc_id)) {
                node.observation.push_back(*doc);
            } else {
                throw ParseError("tree " + tree.tree_id + ": node " + node.id +
                                 " references unknown document " + doc_id);
            }
        }
        node.children = n.at("children").get<std::vector<std::string>>();
        tree.nodes.emplace(node.id, std::move(node));
    }

    const Json& q = j.at("quality");
    tree.quality.node_count = q.at("node_count").get<int>();
    tree.quality.distractor_count = q.at("distractor_count").get<int>();
    tree.quality.distractor_budget = q.at("distractor_budget").get<int>();
    tree.quality.below_distractor_budget = q.at("below_distractor_budget").get<bool>();
    tree.quality.max_depth_reached = q.at("max_depth_reached").get<int>();
    tree.quality.hop_count = q.at("hop_count").get<int>();
    return tree;
}

Json path_to_json(const InfoPath& path) {
    Json j = Json::object();
    j["tree_id"] = path.tree_id;
    j["leaf_id"] = path.node_ids.empty() ? std::string() : path.node_ids.back();
    j["node_ids"] = path.node_ids;
    j["score"] = path.score;
    return j;
}

InfoPath path_from_json(const Json& j) {
    InfoPath path;
    path.tree_id = j.at("tree_id").get<std::string>();
    path.node_ids = j.at("node_ids").get<std::vector<std::string>>();
    path.score = j.at("score").get<int>();
    return path;
}

}  // namespace ragforge::curator
