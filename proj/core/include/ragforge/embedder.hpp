#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ragforge/transport.hpp"

namespace ragforge::corpus {

struct Embedding {
    std::vector<float> values;

    int dim() const { return static_cast<int>(values.size()); }
};

// Cosine similarity, accumulated in double. Throws ValidationError on
// dimension mismatch or zero-norm input.
double cosine_sim(const Embedding& a, const Embedding& b);

bool is_unit_norm(const Embedding& e, double tol = 1e-4);

class Embedder {
public:
    virtual ~Embedder() = default;

    // Unit-norm vector for a non-empty text. ValidationError on empty input.
    virtual Embedding embed(const std::string& text) = 0;

    virtual std::vector<Embedding> embed_batch(const std::vector<std::string>& texts);

    // Stable identity string stored in index metadata, e.g. "hash3gram/256".
    // An index refuses to load under a different embedder identity.
    virtual std::string identity() const = 0;
};

// Deterministic local embedder: lowercase the text, hash every character
// 3-gram into one of `dim` signed buckets, L2-normalize. Same text, same
// vector, on every platform, with no model downloads.
class HashingEmbedder : public Embedder {
public:
    explicit HashingEmbedder(int dim = 256);

    Embedding embed(const std::string& text) override;
    std::string identity() const override;

    int dim() const { return dim_; }

private:
    int dim_;
};

// OpenAI-compatible /embeddings endpoint behind the same interface. Returned
// vectors are re-normalized locally so cosine scores stay comparable.
class RemoteEmbedder : public Embedder {
public:
    struct Config {
        std::string base_url = "http://localhost:8000/v1";
        std::string model;
        std::string api_key;
        int batch_size = 64;
        RetryPolicy retry;
    };

    explicit RemoteEmbedder(Config config);
    RemoteEmbedder(Config config, std::shared_ptr<Transport> transport);

    Embedding embed(const std::string& text) override;
    std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) override;
    std::string identity() const override;

private:
    Config config_;
    std::shared_ptr<Transport> transport_;
    std::string path_prefix_;
};

}  // namespace ragforge::corpus
