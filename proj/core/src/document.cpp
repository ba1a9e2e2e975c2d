#include "ragforge/document.hpp"

#include "ragforge/errors.hpp"

namespace ragforge::corpus {

const char* to_string(DocOrigin origin) {
    switch (origin) {
        case DocOrigin::kKnowledgeBase: return "knowledge_base";
        case DocOrigin::kDistractor: return "distractor";
    }
    return "knowledge_base";
}

const char* to_string(DistractorType type) {
    switch (type) {
        case DistractorType::kDoppelganger: return "doppelganger";
        case DistractorType::kFalseShortcut: return "false_shortcut";
        case DistractorType::kFragmentedPuzzle: return "fragmented_puzzle";
        case DistractorType::kSubjectiveFallacy: return "subjective_fallacy";
    }
    return "doppelganger";
}

DocOrigin origin_from_string(const std::string& s) {
    if (s == "knowledge_base") return DocOrigin::kKnowledgeBase;
    if (s == "distractor") return DocOrigin::kDistractor;
    throw ValidationError("unknown document origin: " + s);
}

DistractorType distractor_type_from_string(const std::string& s) {
    for (DistractorType t : kAllDistractorTypes) {
        if (s == to_string(t)) return t;
    }
    throw ValidationError("unknown distractor type: " + s);
}

void validate(const Document& doc) {
    if (doc.id.empty()) throw ValidationError("document id must be non-empty");
    if (doc.text.empty()) throw ValidationError("document text must be non-empty (id=" + doc.id + ")");
    const bool is_distractor = doc.origin == DocOrigin::kDistractor;
    if (is_distractor && !doc.distractor_type.has_value()) {
        throw ValidationError("distractor document missing distractor_type (id=" + doc.id + ")");
    }
    if (!is_distractor && doc.distractor_type.has_value()) {
        throw ValidationError("knowledge_base document carries distractor_type (id=" + doc.id + ")");
    }
}

Json to_json(const Document& doc) {
    Json j = Json::object();
    j["id"] = doc.id;
    j["title"] = doc.title;
    j["text"] = doc.text;
    j["origin"] = to_string(doc.origin);
    if (doc.distractor_type) j["distractor_type"] = to_string(*doc.distractor_type);
    if (doc.source_node) j["source_node"] = *doc.source_node;
    return j;
}

Document document_from_json(const Json& j) {
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.title = j.value("title", std::string());
    doc.text = j.at("text").get<std::string>();
    doc.origin = origin_from_string(j.value("origin", std::string("knowledge_base")));
    if (j.contains("distractor_type") && !j["distractor_type"].is_null()) {
        doc.distractor_type = distractor_type_from_string(j["distractor_type"].get<std::string>());
    }
    if (j.contains("source_node") && !j["source_node"].is_null()) {
        doc.source_node = j["source_node"].get<std::string>();
    }
    validate(doc);
    return doc;
}

std::vector<Document> load_corpus_jsonl(const std::filesystem::path& path) {
    std::vector<Document> docs;
    for (const Json& row : util::read_jsonl_file(path)) {
        try {
            docs.push_back(document_from_json(row));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.filename().string() + ": document record " +
                             std::to_string(docs.size() + 1) + ": " + e.what());
        }
    }
    return docs;
}

void save_corpus_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs) {
    std::vector<Json> rows;
    rows.reserve(docs.size());
    for (const Document& d : docs) rows.push_back(to_json(d));
    util::write_jsonl_file(path, rows);
}

}  // namespace ragforge::corpus
