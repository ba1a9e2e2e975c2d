#pragma once

#include <string>
#include <vector>

#include "ragforge/backend.hpp"
#include "ragforge/curator.hpp"

namespace ragforge::synthesis {

struct ReasoningStep {
    int hop = 0;
    std::string fact;
    std::string evidence;
    std::string output;

    bool operator==(const ReasoningStep&) const = default;
};

struct NegativeAspect {
    corpus::DistractorType dimension = corpus::DistractorType::kDoppelganger;
    std::string misleading_claim;
    std::string disambiguation;
    std::string distraction_text;

    bool operator==(const NegativeAspect&) const = default;
};

struct QAItem {
    std::string qa_id;
    std::string tree_id;
    std::string question;
    std::string answer;
    std::vector<ReasoningStep> reasoning_steps;
    std::vector<NegativeAspect> negative_aspect;
    curator::InfoPath source_path;
};

struct SynthesisConfig {
    int observation_char_cap = 2000;
    llm::SamplingParams sampling;  // temperature 0.7 by default
};

// Strict parse of the generator's reply. Accepts raw JSON or one fenced
// block; rejects unknown fields at the top level and inside every item, and
// requires hops to run 1..n in order.
QAItem parse_qa_response(const std::string& raw);

enum class RuleSeverity { kError, kWarning };

struct RuleResult {
    std::string rule;
    RuleSeverity severity = RuleSeverity::kError;
    bool passed = true;
    std::string detail;
};

struct ValidationReport {
    std::vector<RuleResult> rules;

    bool accepted() const;  // no failed error-severity rule
    std::vector<std::string> failures() const;
    std::string summary() const;
};

// Checks a parsed QA item:
//   answer-not-in-question (normalized substring test)        [error]
//   reasoning_steps length >= 3                               [error]
//   question sentence count <= 2                              [warning]
//   negative_aspect non-empty when the tree has distractors   [error]
//   known dimension slugs                                     [error]
//   no meta phrasing leaking the generation process           [error]
ValidationReport validate_qa(const QAItem& item, bool tree_has_distractors);

// Sentence terminators: . ! ? followed by whitespace or end of text.
// Terminators inside double quotes do not count.
int count_sentences(const std::string& text);

// The path rendered for the generator: every step's intent, action, and
// observation in root-to-leaf order, with per-document truncation.
std::string render_path_context(const curator::InfoTree& tree, const curator::InfoPath& path,
                                int observation_char_cap);

// One QA pair from one selected path. Parse failures get one corrective
// re-prompt; a second failure raises SynthesisError carrying the raw reply.
// Rule violations (validate_qa) raise ValidationError listing the failures.
QAItem synthesize_qa(const curator::InfoTree& tree, const curator::InfoPath& path,
                     const SynthesisConfig& config, llm::ChatBackend& backend);

Json qa_to_json(const QAItem& item);
QAItem qa_from_json(const Json& j);

}  // namespace ragforge::synthesis
