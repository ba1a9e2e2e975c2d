#include "test_support.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace testsup {

namespace {

std::atomic<int> g_temp_counter{0};

}  // namespace

fs::path fixture_dir() {
#ifdef RAGFORGE_FIXTURE_DIR
    return fs::path(RAGFORGE_FIXTURE_DIR);
#else
    throw std::runtime_error("RAGFORGE_FIXTURE_DIR is not defined");
#endif
}

TempDir::TempDir(const std::string& tag) {
    const int n = g_temp_counter.fetch_add(1);
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(n));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);  // best effort; a leaked dir only wastes tmp space
}

ragforge::pipeline::PipelineConfig fixture_config(const fs::path& out_dir) {
    const fs::path dir = fixture_dir();
    ragforge::Json j = ragforge::Json::parse(read_text(dir / "config.json"));
    j["corpus_file"] = (dir / j["corpus_file"].get<std::string>()).string();
    j["seeds_file"] = (dir / j["seeds_file"].get<std::string>()).string();
    j["llm"]["script"] = (dir / j["llm"]["script"].get<std::string>()).string();
    for (auto& [role, backend] : j["roles"].items()) {
        backend["script"] = (dir / backend["script"].get<std::string>()).string();
    }
    j["output_dir"] = out_dir.string();
    return ragforge::pipeline::config_from_json(j);
}

double oracle_cosine(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) throw std::runtime_error("oracle_cosine: dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0.0 || nb == 0.0) throw std::runtime_error("oracle_cosine: zero norm");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<OracleHit> oracle_search(const std::vector<ragforge::corpus::Document>& docs,
                                     ragforge::corpus::Embedder& embedder,
                                     const std::string& query, int k, bool use_tau, double tau) {
    const ragforge::corpus::Embedding q = embedder.embed(query);
    std::vector<OracleHit> hits;
    for (const auto& doc : docs) {
        const ragforge::corpus::Embedding v = embedder.embed(doc.text);
        const double score = oracle_cosine(q.values, v.values);
        if (use_tau && !(score > tau)) continue;
        hits.push_back(OracleHit{doc.id, score});
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit& x, const OracleHit& y) {
        if (x.score != y.score) return x.score > y.score;
        return x.id < y.id;
    });
    if (hits.size() > static_cast<std::size_t>(k)) hits.resize(static_cast<std::size_t>(k));
    return hits;
}

ragforge::llm::ScriptEntry text_entry(const std::string& content) {
    ragforge::llm::ScriptEntry entry;
    entry.turn = ragforge::llm::ChatMessage::assistant(content);
    return entry;
}

ragforge::llm::ScriptEntry call_entry(const std::string& content, const std::string& tool,
                                      const ragforge::Json& arguments) {
    static std::atomic<int> counter{0};
    ragforge::llm::ToolCall call;
    call.call_id = "t" + std::to_string(counter.fetch_add(1));
    call.name = tool;
    call.arguments = arguments;
    ragforge::llm::ScriptEntry entry;
    entry.turn = ragforge::llm::ChatMessage::assistant_call(content, {call});
    return entry;
}

ragforge::llm::ScriptEntry keyed(ragforge::llm::ScriptEntry entry, const std::string& key) {
    entry.key = key;
    return entry;
}

std::vector<ragforge::corpus::Document> synthetic_corpus(int count) {
    static const char* kSubjects[] = {"the harbour",  "a foundry",   "the archive",
                                      "a lighthouse", "the railway", "an observatory",
                                      "the mill",     "a glassworks"};
    static const char* kVerbs[] = {"records", "supplies", "overlooks", "predates",
                                   "rebuilt",  "licensed", "measured"};
    static const char* kObjects[] = {"the canal locks",    "a bronze bell",  "the tide tables",
                                     "the survey markers", "a cargo ledger", "the winding gear",
                                     "an iron footbridge", "the grain store"};
    static const char* kTails[] = {"after the flood of 1894.", "under the old charter.",
                                   "for the coastal trade.",   "beside the market square.",
                                   "during the long drought.", "in the second survey."};
    std::vector<ragforge::corpus::Document> docs;
    docs.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        ragforge::corpus::Document d;
        d.id = "syn-" + ragforge::util::format_index(static_cast<std::size_t>(i + 1), 5);
        d.title = "Entry " + std::to_string(i + 1);
        d.text = std::string("Entry ") + std::to_string(i + 1) + ": " + kSubjects[i % 8] + " " +
                 kVerbs[(i / 8) % 7] + " " + kObjects[(i / 56) % 8] + " " +
                 kTails[(i / 448) % 6];
        d.origin = ragforge::corpus::DocOrigin::kKnowledgeBase;
        docs.push_back(std::move(d));
    }
    return docs;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::vector<std::string> list_files(const fs::path& root) {
    std::vector<std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        out.push_back(fs::relative(entry.path(), root).generic_string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace testsup
