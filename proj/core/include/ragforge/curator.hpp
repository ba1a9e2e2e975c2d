#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragforge/backend.hpp"
#include "ragforge/knowledge_base.hpp"
#include "ragforge/rng.hpp"

namespace ragforge::curator {

// Branch probability by depth, 1-based: probability_at(1) == by_depth[0].
// Depths past the end of the list never branch.
struct BranchSchedule {
    std::vector<double> by_depth{0.5, 0.5};

    double probability_at(int depth) const;
};

struct ExploreConfig {
    BranchSchedule branch;
    int max_depth = 30;
    double tau = 0.8;
    int default_top_k = 5;       // dense tool fallback when the model omits top_k
    int distractor_budget = 5;   // per-seed target; shortfall is flagged, never fatal
    int observation_char_cap = 2000;
    llm::SamplingParams sampling;  // temperature 0.7 by default

    void validate() const;
};

struct TreeNode {
    std::string id;
    std::optional<std::string> parent;  // absent at the root
    int depth = 1;                      // root is depth 1
    std::optional<llm::ToolCall> action;
    std::optional<std::string> intent;  // assistant text accompanying the action
    std::vector<corpus::Document> observation;
    std::vector<std::string> children;  // at most 2
};

// Documents this node's action produced: retrieved hits for a search node,
// the written documents for a curation node. Zero at the root.
int node_document_count(const TreeNode& node);

struct TreeQuality {
    int node_count = 0;
    int distractor_count = 0;
    int distractor_budget = 0;
    bool below_distractor_budget = false;
    int max_depth_reached = 1;
    int hop_count = 0;  // actions along the deepest chain
};

struct InfoTree {
    std::string tree_id;
    std::string seed_entity;
    std::string root_id;
    // Node ids are fixed-width creation-order indices ("n0001", ...), so map
    // order is creation order and lexicographic id order is numeric order.
    std::map<std::string, TreeNode> nodes;
    std::vector<corpus::Document> distractor_store;
    std::uint64_t rng_seed = 0;
    bool failed = false;
    std::string failure_reason;
    TreeQuality quality;

    const TreeNode& node(const std::string& id) const;
    std::vector<std::string> leaves() const;                       // ids, ascending
    std::vector<std::string> path_from_root(const std::string& leaf_id) const;
    bool has_distractors() const { return !distractor_store.empty(); }
};

struct InfoPath {
    std::string tree_id;
    std::vector<std::string> node_ids;  // root first, leaf last
    int score = 0;
};

// Materializes one write_distractor_docs call into documents. Ids are
// "<id_prefix><start_index + i>"; titles are derived from the text head.
std::vector<corpus::Document> curate_distractors(const std::string& original_fact,
                                                 corpus::DistractorType type,
                                                 const std::string& guideline,
                                                 const std::vector<std::string>& texts,
                                                 const std::string& source_node,
                                                 const std::string& id_prefix,
                                                 std::size_t start_index);

// Root-to-node context shown to the exploration model: the seed entity, then
// every step's intent, action, and observation, oldest first.
std::string render_exploration_context(const InfoTree& tree, const std::string& node_id,
                                       int observation_char_cap);

// Grows one tree depth-first from a seed entity. Each expanded parent draws
// once against the branch schedule; a successful draw expands the parent
// twice, and each child's whole subtree is finished before its sibling is
// created. Model-level failures mark the tree failed instead of throwing, so
// the partial tree can still be persisted.
InfoTree explore_tree(const std::string& seed_entity, const std::string& tree_id,
                      const ExploreConfig& config, const corpus::KnowledgeBase& kb,
                      llm::ChatBackend& backend, SeededRng& rng);

// Highest-scoring root-to-leaf paths, at most m, score = total documents
// produced along the path. Ties prefer the lexicographically smaller leaf.
std::vector<InfoPath> select_paths(const InfoTree& tree, int m);

Json tree_to_json(const InfoTree& tree);
// kb resolves retrieved observation ids; written documents resolve from the
// embedded distractor store.
InfoTree tree_from_json(const Json& j, const corpus::KnowledgeBase& kb);

Json path_to_json(const InfoPath& path);
InfoPath path_from_json(const Json& j);

}  // namespace ragforge::curator
