#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ragforge/util.hpp"

namespace ragforge::corpus {

enum class DocOrigin { kKnowledgeBase, kDistractor };

// The four distraction dimensions. Serialized as snake_case slugs.
enum class DistractorType { kDoppelganger, kFalseShortcut, kFragmentedPuzzle, kSubjectiveFallacy };

inline constexpr DistractorType kAllDistractorTypes[] = {
    DistractorType::kDoppelganger,
    DistractorType::kFalseShortcut,
    DistractorType::kFragmentedPuzzle,
    DistractorType::kSubjectiveFallacy,
};

const char* to_string(DocOrigin origin);
const char* to_string(DistractorType type);
DocOrigin origin_from_string(const std::string& s);
DistractorType distractor_type_from_string(const std::string& s);

struct Document {
    std::string id;
    std::string title;
    std::string text;
    DocOrigin origin = DocOrigin::kKnowledgeBase;
    // Set iff origin == kDistractor.
    std::optional<DistractorType> distractor_type;
    // Exploration-tree node that fabricated this distractor, when known.
    std::optional<std::string> source_node;

    bool operator==(const Document&) const = default;
};

// Enforces: non-empty id and text, distractor_type present iff distractor.
void validate(const Document& doc);

Json to_json(const Document& doc);
Document document_from_json(const Json& j);

std::vector<Document> load_corpus_jsonl(const std::filesystem::path& path);
void save_corpus_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs);

}  // namespace ragforge::corpus
