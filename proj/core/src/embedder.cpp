#include "ragforge/embedder.hpp"

#include <cmath>

#include "ragforge/errors.hpp"
#include "ragforge/util.hpp"

namespace ragforge::corpus {

double cosine_sim(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) {
        throw ValidationError("cosine_sim: dimension mismatch (" + std::to_string(a.dim()) +
                              " vs " + std::to_string(b.dim()) + ")");
    }
    if (a.dim() == 0) throw ValidationError("cosine_sim: empty embedding");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        const double x = a.values[i];
        const double y = b.values[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) throw ValidationError("cosine_sim: zero-norm embedding");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

bool is_unit_norm(const Embedding& e, double tol) {
    double n = 0.0;
    for (float v : e.values) n += static_cast<double>(v) * static_cast<double>(v);
    return std::abs(std::sqrt(n) - 1.0) <= tol;
}

std::vector<Embedding> Embedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) out.push_back(embed(t));
    return out;
}

HashingEmbedder::HashingEmbedder(int dim) : dim_(dim) {
    if (dim < 1) throw ValidationError("embedding dim must be >= 1");
}

Embedding HashingEmbedder::embed(const std::string& text) {
    if (text.empty()) throw ValidationError("embed: text must be non-empty");
    const std::string folded = util::to_lower(text);

    std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
    if (folded.size() >= 3) {
        std::string_view view(folded);
        for (std::size_t i = 0; i + 3 <= view.size(); ++i) {
            const std::uint64_t h = util::fnv1a64(view.substr(i, 3));
            const std::size_t bucket = static_cast<std::size_t>((h >> 1) % static_cast<std::uint64_t>(dim_));
            acc[bucket] += (h & 1) ? 1.0 : -1.0;
        }
    }

    double norm_sq = 0.0;
    for (double v : acc) norm_sq += v * v;

    if (norm_sq == 0.0) {
        // Texts shorter than one 3-gram (or with fully cancelled buckets)
        // still get a deterministic unit vector.
        acc.assign(acc.size(), 0.0);
        acc[static_cast<std::size_t>(util::fnv1a64(folded) % static_cast<std::uint64_t>(dim_))] = 1.0;
        norm_sq = 1.0;
    }

    const double norm = std::sqrt(norm_sq);
    Embedding e;
    e.values.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
        e.values[i] = static_cast<float>(acc[i] / norm);
    }
    return e;
}

std::string HashingEmbedder::identity() const {
    return "hash3gram/" + std::to_string(dim_);
}

RemoteEmbedder::RemoteEmbedder(Config config)
    : RemoteEmbedder(std::move(config), nullptr) {
    auto [origin, prefix] = split_base_url(config_.base_url);
    transport_ = std::make_shared<HttpTransport>(origin);
    path_prefix_ = prefix;
}

RemoteEmbedder::RemoteEmbedder(Config config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    if (transport_) path_prefix_ = split_base_url(config_.base_url).second;
    if (config_.model.empty()) throw ValidationError("remote embedder requires a model name");
    if (config_.batch_size < 1) throw ValidationError("embedder batch_size must be >= 1");
}

Embedding RemoteEmbedder::embed(const std::string& text) {
    return embed_batch({text}).front();
}

std::vector<Embedding> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());

    for (std::size_t start = 0; start < texts.size(); start += static_cast<std::size_t>(config_.batch_size)) {
        const std::size_t end = std::min(texts.size(), start + static_cast<std::size_t>(config_.batch_size));

        Json body = Json::object();
        body["model"] = config_.model;
        Json input = Json::array();
        for (std::size_t i = start; i < end; ++i) {
            if (texts[i].empty()) throw ValidationError("embed: text must be non-empty");
            input.push_back(texts[i]);
        }
        body["input"] = std::move(input);

        HttpHeaders headers;
        if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

        HttpResponse res = post_with_retries(*transport_, path_prefix_ + "/embeddings",
                                             body.dump(), headers, config_.retry);
        if (res.status != 200) {
            throw ProtocolError("embeddings endpoint returned HTTP " + std::to_string(res.status) +
                                ": " + res.body.substr(0, 200));
        }

        Json parsed;
        try {
            parsed = Json::parse(res.body);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("embeddings endpoint returned invalid JSON: ") + e.what());
        }

        if (!parsed.contains("data") || !parsed["data"].is_array() ||
            parsed["data"].size() != end - start) {
            throw ProtocolError("embeddings endpoint returned wrong item count");
        }

        // The API may return entries out of order; "index" is authoritative.
        std::vector<Embedding> chunk(end - start);
        for (const Json& item : parsed["data"]) {
            const std::size_t idx = item.at("index").get<std::size_t>();
            if (idx >= chunk.size()) throw ProtocolError("embeddings endpoint returned bad index");
            Embedding e;
            for (const Json& v : item.at("embedding")) e.values.push_back(v.get<float>());
            if (e.values.empty()) throw ProtocolError("embeddings endpoint returned empty vector");
            double norm_sq = 0.0;
            for (float v : e.values) norm_sq += static_cast<double>(v) * static_cast<double>(v);
            if (norm_sq == 0.0) throw ProtocolError("embeddings endpoint returned zero vector");
            const double norm = std::sqrt(norm_sq);
            for (float& v : e.values) v = static_cast<float>(v / norm);
            chunk[idx] = std::move(e);
        }
        for (Embedding& e : chunk) out.push_back(std::move(e));
    }
    return out;
}

std::string RemoteEmbedder::identity() const {
    return "remote/" + config_.model;
}

}  // namespace ragforge::corpus
