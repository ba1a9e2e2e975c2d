#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ragforge/document.hpp"
#include "ragforge/embedder.hpp"

namespace ragforge::corpus {

struct RetrievalHit {
    Document document;
    double score = 0.0;
    int rank = 0;  // 1-based, assigned after sorting
};

// Immutable dense index over a document set. Search is an exact full scan:
// at desk scale (<= tens of thousands of documents) that is faster to trust
// than an ANN structure is to verify.
class KnowledgeBase {
public:
    KnowledgeBase() = default;

    // Embeds every document text. Duplicate ids raise ValidationError.
    static KnowledgeBase build(std::vector<Document> docs, std::shared_ptr<Embedder> embedder);

    // Hits strictly above tau, ordered by score descending then id ascending,
    // truncated to k. Never more than k; possibly empty.
    std::vector<RetrievalHit> search(const std::string& query, int k, double tau) const;

    // Top-k with the threshold ignored. Used as the injection fallback when
    // tau leaves too few distractors above water.
    std::vector<RetrievalHit> top_k_unfiltered(const std::string& query, int k) const;

    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    const Document& doc(std::size_t i) const { return docs_[i]; }
    const std::vector<Document>& documents() const { return docs_; }
    const Document* find(const std::string& id) const;
    const Embedding& embedding(std::size_t i) const { return vectors_[i]; }
    const std::string& embedder_identity() const { return embedder_identity_; }

    // Directory layout: corpus.jsonl + vectors.bin + meta.json.
    void save(const std::filesystem::path& dir) const;
    static KnowledgeBase load(const std::filesystem::path& dir, std::shared_ptr<Embedder> embedder);

private:
    std::vector<RetrievalHit> scan(const Embedding& query, int k, bool use_tau, double tau) const;

    std::vector<Document> docs_;
    std::vector<Embedding> vectors_;
    std::map<std::string, std::size_t> by_id_;
    std::shared_ptr<Embedder> embedder_;
    std::string embedder_identity_;
    int dim_ = 0;
};

}  // namespace ragforge::corpus
