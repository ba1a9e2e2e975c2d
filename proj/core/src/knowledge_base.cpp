#include "ragforge/knowledge_base.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "ragforge/errors.hpp"

namespace ragforge::corpus {

namespace {

constexpr char kVectorMagic[8] = {'R', 'F', 'V', 'E', 'C', 'I', 'D', 'X'};
constexpr std::uint32_t kVectorFormatVersion = 1;

}  // namespace

KnowledgeBase KnowledgeBase::build(std::vector<Document> docs, std::shared_ptr<Embedder> embedder) {
    if (!embedder) throw ValidationError("knowledge base requires an embedder");

    KnowledgeBase kb;
    kb.embedder_ = std::move(embedder);
    kb.embedder_identity_ = kb.embedder_->identity();
    kb.docs_ = std::move(docs);

    std::vector<std::string> texts;
    texts.reserve(kb.docs_.size());
    for (std::size_t i = 0; i < kb.docs_.size(); ++i) {
        validate(kb.docs_[i]);
        auto [it, inserted] = kb.by_id_.emplace(kb.docs_[i].id, i);
        if (!inserted) throw ValidationError("duplicate document id: " + kb.docs_[i].id);
        texts.push_back(kb.docs_[i].text);
    }

    kb.vectors_ = kb.embedder_->embed_batch(texts);
    for (std::size_t i = 0; i < kb.vectors_.size(); ++i) {
        if (kb.dim_ == 0) kb.dim_ = kb.vectors_[i].dim();
        if (kb.vectors_[i].dim() != kb.dim_) {
            throw ValidationError("embedder returned mixed dimensions within one index");
        }
    }
    return kb;
}

const Document* KnowledgeBase::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

std::vector<RetrievalHit> KnowledgeBase::scan(const Embedding& query, int k, bool use_tau,
                                              double tau) const {
    std::vector<std::size_t> candidates;
    std::vector<double> scores(docs_.size(), 0.0);
    candidates.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        const double s = cosine_sim(query, vectors_[i]);
        scores[i] = s;
        if (!use_tau || s > tau) candidates.push_back(i);
    }

    std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return docs_[a].id < docs_[b].id;
    });
    if (candidates.size() > static_cast<std::size_t>(k)) candidates.resize(static_cast<std::size_t>(k));

    std::vector<RetrievalHit> hits;
    hits.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        hits.push_back(RetrievalHit{docs_[candidates[i]], scores[candidates[i]],
                                    static_cast<int>(i) + 1});
    }
    return hits;
}

std::vector<RetrievalHit> KnowledgeBase::search(const std::string& query, int k, double tau) const {
    if (k < 1) throw ValidationError("search k must be >= 1");
    if (tau < -1.0 || tau > 1.0) throw ValidationError("tau must lie in [-1, 1]");
    if (docs_.empty()) return {};
    return scan(embedder_->embed(query), k, /*use_tau=*/true, tau);
}

std::vector<RetrievalHit> KnowledgeBase::top_k_unfiltered(const std::string& query, int k) const {
    if (k < 1) throw ValidationError("search k must be >= 1");
    if (docs_.empty()) return {};
    return scan(embedder_->embed(query), k, /*use_tau=*/false, 0.0);
}

void KnowledgeBase::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    save_corpus_jsonl(dir / "corpus.jsonl", docs_);

    // vectors.bin: 8-byte magic, u32 version, u32 dim, u64 count, then
    // count*dim float32 rows. Little-endian host assumed (checked in meta).
    std::string blob;
    blob.reserve(24 + docs_.size() * static_cast<std::size_t>(dim_) * 4);
    blob.append(kVectorMagic, sizeof(kVectorMagic));
    auto append_raw = [&blob](const void* p, std::size_t n) {
        blob.append(static_cast<const char*>(p), n);
    };
    const std::uint32_t version = kVectorFormatVersion;
    const std::uint32_t dim = static_cast<std::uint32_t>(dim_);
    const std::uint64_t count = docs_.size();
    append_raw(&version, 4);
    append_raw(&dim, 4);
    append_raw(&count, 8);
    for (const Embedding& e : vectors_) {
        append_raw(e.values.data(), e.values.size() * sizeof(float));
    }
    util::atomic_write_file(dir / "vectors.bin", blob);

    Json meta = Json::object();
    meta["format_version"] = kVectorFormatVersion;
    meta["embedder"] = embedder_identity_;
    meta["dim"] = dim_;
    meta["count"] = docs_.size();
    util::atomic_write_file(dir / "meta.json", meta.dump(2) + "\n");
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& dir,
                                  std::shared_ptr<Embedder> embedder) {
    if (!embedder) throw ValidationError("knowledge base requires an embedder");

    Json meta;
    try {
        meta = Json::parse(util::read_file(dir / "meta.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("meta.json: " + std::string(e.what()));
    }
    if (meta.at("format_version").get<std::uint32_t>() != kVectorFormatVersion) {
        throw ParseError("unsupported index format version");
    }
    const std::string identity = meta.at("embedder").get<std::string>();
    if (identity != embedder->identity()) {
        throw ValidationError("index was built with embedder '" + identity +
                              "' but loaded with '" + embedder->identity() + "'");
    }

    KnowledgeBase kb;
    kb.embedder_ = std::move(embedder);
    kb.embedder_identity_ = identity;
    kb.docs_ = load_corpus_jsonl(dir / "corpus.jsonl");
    for (std::size_t i = 0; i < kb.docs_.size(); ++i) {
        auto [it, inserted] = kb.by_id_.emplace(kb.docs_[i].id, i);
        if (!inserted) throw ValidationError("duplicate document id: " + kb.docs_[i].id);
    }

    const std::string blob = util::read_file(dir / "vectors.bin");
    if (blob.size() < 24 || std::memcmp(blob.data(), kVectorMagic, 8) != 0) {
        throw ParseError("vectors.bin: bad header");
    }
    std::uint32_t version = 0, dim = 0;
    std::uint64_t count = 0;
    std::memcpy(&version, blob.data() + 8, 4);
    std::memcpy(&dim, blob.data() + 12, 4);
    std::memcpy(&count, blob.data() + 16, 8);
    if (version != kVectorFormatVersion) throw ParseError("vectors.bin: unsupported version");
    if (count != kb.docs_.size()) throw ParseError("vectors.bin: vector count does not match corpus");
    const std::size_t expect = 24 + static_cast<std::size_t>(count) * dim * sizeof(float);
    if (blob.size() != expect) throw ParseError("vectors.bin: truncated payload");

    kb.dim_ = static_cast<int>(dim);
    kb.vectors_.resize(count);
    const char* p = blob.data() + 24;
    for (std::uint64_t i = 0; i < count; ++i) {
        kb.vectors_[i].values.resize(dim);
        std::memcpy(kb.vectors_[i].values.data(), p, dim * sizeof(float));
        p += dim * sizeof(float);
    }
    return kb;
}

}  // namespace ragforge::corpus
