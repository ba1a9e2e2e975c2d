#include "ragforge/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "ragforge/errors.hpp"
#include "ragforge/prompts.hpp"
#include "ragforge/quality.hpp"

namespace ragforge::synthesis {

namespace {

// Phrases that leak the generation process into the question or answer.
// Conservative on purpose: false rejections cost a sample, false accepts
// poison the dataset.
const std::vector<std::string> kMetaPhrases = {
    "according to the trajectory",
    "in the trajectory",
    "from the trajectory",
    "what did the agent",
    "the agent found",
    "search result",
    "search results",
    "according to the documents",
    "according to the observation",
    "in the observations",
    "knowledge base",
};

std::string strip_code_fences(const std::string& raw) {
    std::string text = util::trim(raw);
    if (text.rfind("```", 0) != 0) return text;
    // Drop the opening fence line and a trailing fence line if present.
    std::size_t first_newline = text.find('\n');
    if (first_newline == std::string::npos) return text;
    text = text.substr(first_newline + 1);
    std::size_t closing = text.rfind("```");
    if (closing != std::string::npos) text = text.substr(0, closing);
    return util::trim(text);
}

void require_keys(const Json& obj, const std::set<std::string>& required,
                  const std::string& where) {
    for (const std::string& key : required) {
        if (!obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (required.find(it.key()) == required.end()) {
            throw ParseError(where + ": unexpected field '" + it.key() + "'");
        }
    }
}

std::string non_empty_string(const Json& obj, const std::string& key, const std::string& where) {
    if (!obj.at(key).is_string() || obj[key].get<std::string>().empty()) {
        throw ParseError(where + ": '" + key + "' must be a non-empty string");
    }
    return obj[key].get<std::string>();
}

std::string joined(const std::vector<std::string>& tokens) {
    std::string out;
    for (const std::string& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

}  // namespace

QAItem parse_qa_response(const std::string& raw) {
    const std::string text = strip_code_fences(raw);
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("reply is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("reply must be a JSON object");
    require_keys(j, {"question", "answer", "reasoning_steps", "negative_aspect"}, "reply");

    QAItem item;
    item.question = non_empty_string(j, "question", "reply");
    item.answer = non_empty_string(j, "answer", "reply");

    if (!j["reasoning_steps"].is_array()) throw ParseError("'reasoning_steps' must be an array");
    int expected_hop = 1;
    for (const Json& s : j["reasoning_steps"]) {
        if (!s.is_object()) throw ParseError("reasoning step must be an object");
        const std::string where = "reasoning_steps[" + std::to_string(expected_hop - 1) + "]";
        require_keys(s, {"hop", "fact", "evidence", "output"}, where);
        if (!s["hop"].is_number_integer() || s["hop"].get<int>() != expected_hop) {
            throw ParseError(where + ": hops must run 1..n in order");
        }
        ReasoningStep step;
        step.hop = expected_hop++;
        step.fact = non_empty_string(s, "fact", where);
        step.evidence = non_empty_string(s, "evidence", where);
        step.output = non_empty_string(s, "output", where);
        item.reasoning_steps.push_back(std::move(step));
    }

    if (!j["negative_aspect"].is_array()) throw ParseError("'negative_aspect' must be an array");
    std::size_t idx = 0;
    for (const Json& a : j["negative_aspect"]) {
        if (!a.is_object()) throw ParseError("negative_aspect entry must be an object");
        const std::string where = "negative_aspect[" + std::to_string(idx++) + "]";
        require_keys(a, {"dimension", "misleading_claim", "disambiguation", "distraction_text"},
                     where);
        NegativeAspect aspect;
        try {
            aspect.dimension =
                corpus::distractor_type_from_string(non_empty_string(a, "dimension", where));
        } catch (const ValidationError& e) {
            throw ParseError(where + ": " + e.what());
        }
        aspect.misleading_claim = non_empty_string(a, "misleading_claim", where);
        aspect.disambiguation = non_empty_string(a, "disambiguation", where);
        aspect.distraction_text = non_empty_string(a, "distraction_text", where);
        item.negative_aspect.push_back(std::move(aspect));
    }
    return item;
}

bool ValidationReport::accepted() const {
    for (const RuleResult& r : rules) {
        if (!r.passed && r.severity == RuleSeverity::kError) return false;
    }
    return true;
}

std::vector<std::string> ValidationReport::failures() const {
    std::vector<std::string> out;
    for (const RuleResult& r : rules) {
        if (!r.passed) out.push_back(r.rule);
    }
    return out;
}

std::string ValidationReport::summary() const {
    std::string out;
    for (const RuleResult& r : rules) {
        if (r.passed) continue;
        if (!out.empty()) out += "; ";
        out += r.rule;
        if (!r.detail.empty()) out += " (" + r.detail + ")";
    }
    return out.empty() ? "all rules passed" : out;
}

int count_sentences(const std::string& text) {
    int count = 0;
    bool in_quotes = false;
    const auto is_term = [](char c) { return c == '.' || c == '!' || c == '?'; };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '"') {
            in_quotes = !in_quotes;
            continue;
        }
        if (!is_term(c) || in_quotes) continue;
        std::size_t j = i;
        while (j < text.size() && is_term(text[j])) ++j;  // "?!" counts once
        if (j >= text.size() || std::isspace(static_cast<unsigned char>(text[j]))) ++count;
        i = j - 1;
    }
    return count;
}

ValidationReport validate_qa(const QAItem& item, bool tree_has_distractors) {
    ValidationReport report;

    {
        RuleResult r{"answer_not_in_question", RuleSeverity::kError, true, ""};
        const std::string q = joined(quality::normalize_answer(item.question));
        const std::string a = joined(quality::normalize_answer(item.answer));
        if (!a.empty() && q.find(a) != std::string::npos) {
            r.passed = false;
            r.detail = "normalized answer appears inside the question";
        }
        report.rules.push_back(std::move(r));
    }
    {
        RuleResult r{"reasoning_steps_min_3", RuleSeverity::kError, true, ""};
        if (item.reasoning_steps.size() < 3) {
            r.passed = false;
            r.detail = "reasoning_steps length >= 3 violated (got " +
                       std::to_string(item.reasoning_steps.size()) + ")";
        }
        report.rules.push_back(std::move(r));
    }
    {
        RuleResult r{"question_max_2_sentences", RuleSeverity::kWarning, true, ""};
        const int sentences = count_sentences(item.question);
        if (sentences > 2) {
            r.passed = false;
            r.detail = "question has " + std::to_string(sentences) + " sentences";
        }
        report.rules.push_back(std::move(r));
    }
    {
        RuleResult r{"negative_aspect_present", RuleSeverity::kError, true, ""};
        if (tree_has_distractors && item.negative_aspect.empty()) {
            r.passed = false;
            r.detail = "tree has curated distractors but negative_aspect is empty";
        }
        report.rules.push_back(std::move(r));
    }
    {
        RuleResult r{"no_meta_phrasing", RuleSeverity::kError, true, ""};
        for (const std::string& phrase : kMetaPhrases) {
            if (util::contains_ci(item.question, phrase) || util::contains_ci(item.answer, phrase)) {
                r.passed = false;
                r.detail = "contains \"" + phrase + "\"";
                break;
            }
        }
        report.rules.push_back(std::move(r));
    }
    return report;
}

std::string render_path_context(const curator::InfoTree& tree, const curator::InfoPath& path,
                                int observation_char_cap) {
    std::string out = "Seed entity: " + tree.seed_entity + "\n";
    out += "Selected exploration chain (" + std::to_string(path.node_ids.size()) + " steps):\n";
    for (const std::string& id : path.node_ids) {
        const curator::TreeNode& node = tree.node(id);
        out += "\nStep " + std::to_string(node.depth);
        if (!node.parent) {
            out += " (start)\nTopic: " + tree.seed_entity + "\n";
            continue;
        }
        out += "\nIntent: " + (node.intent ? *node.intent : std::string()) + "\n";
        out += "Action: " + node.action->name + " " + node.action->arguments.dump() + "\n";
        out += "Observation:\n";
        if (node.observation.empty()) out += "  (no documents)\n";
        for (std::size_t i = 0; i < node.observation.size(); ++i) {
            const corpus::Document& doc = node.observation[i];
            out += "  [" + std::to_string(i + 1) + "] " + doc.title + "\n";
            out += "      " +
                   util::truncate_text(doc.text, static_cast<std::size_t>(observation_char_cap)) +
                   "\n";
        }
    }

    if (!tree.distractor_store.empty()) {
        out += "\nNegative documents curated during exploration:\n";
        for (const corpus::Document& doc : tree.distractor_store) {
            out += "- dimension: " + std::string(corpus::to_string(*doc.distractor_type)) + "\n";
            out += "  text: " +
                   util::truncate_text(doc.text, static_cast<std::size_t>(observation_char_cap)) +
                   "\n";
        }
    }
    return out;
}

QAItem synthesize_qa(const curator::InfoTree& tree, const curator::InfoPath& path,
                     const SynthesisConfig& config, llm::ChatBackend& backend) {
    if (path.node_ids.empty()) throw ValidationError("path must contain at least the root");

    std::vector<llm::ChatMessage> messages{
        llm::ChatMessage::system(prompts::qa_synthesis_system()),
        llm::ChatMessage::user(render_path_context(tree, path, config.observation_char_cap))};

    llm::ChatMessage reply = llm::chat_complete(backend, messages, {}, config.sampling);

    QAItem item;
    for (int round = 0; round < 2; ++round) {
        std::string parse_failure;
        if (!reply.tool_calls.empty()) {
            parse_failure = "no tools are available to this role; reply with the JSON object";
        } else {
            try {
                item = parse_qa_response(reply.content);
            } catch (const ParseError& e) {
                parse_failure = e.what();
            }
        }

        if (parse_failure.empty()) break;
        if (round == 1) {
            throw SynthesisError("QA generation unparseable after corrective re-prompt: " +
                                     parse_failure,
                                 reply.content);
        }

        messages.push_back(reply);
        for (const llm::ToolCall& c : reply.tool_calls) {
            messages.push_back(
                llm::ChatMessage::tool(c.call_id, "No tools are available to this role."));
        }
        messages.push_back(llm::ChatMessage::user(
            "Your previous reply was rejected: " + parse_failure +
            ". Reply again with JSON exactly matching the required schema -- no extra fields, "
            "no prose, no code fences."));
        reply = llm::chat_complete(backend, messages, {}, config.sampling);
    }

    ValidationReport report = validate_qa(item, tree.has_distractors());
    if (!report.accepted()) {
        throw ValidationError("generated QA failed validation: " + report.summary());
    }

    item.tree_id = tree.tree_id;
    item.source_path = path;
    return item;
}

Json qa_to_json(const QAItem& item) {
    Json j = Json::object();
    j["qa_id"] = item.qa_id;
    j["tree_id"] = item.tree_id;
    j["source_path"] = path_to_json(item.source_path);
    j["question"] = item.question;
    j["answer"] = item.answer;
    Json steps = Json::array();
    for (const ReasoningStep& s : item.reasoning_steps) {
        Json step = Json::object();
        step["hop"] = s.hop;
        step["fact"] = s.fact;
        step["evidence"] = s.evidence;
        step["output"] = s.output;
        steps.push_back(std::move(step));
    }
    j["reasoning_steps"] = std::move(steps);
    Json aspects = Json::array();
    for (const NegativeAspect& a : item.negative_aspect) {
        Json aspect = Json::object();
        aspect["dimension"] = corpus::to_string(a.dimension);
        aspect["misleading_claim"] = a.misleading_claim;
        aspect["disambiguation"] = a.disambiguation;
        aspect["distraction_text"] = a.distraction_text;
        aspects.push_back(std::move(aspect));
    }
    j["negative_aspect"] = std::move(aspects);
    return j;
}

QAItem qa_from_json(const Json& j) {
    QAItem item;
    item.qa_id = j.at("qa_id").get<std::string>();
    item.tree_id = j.at("tree_id").get<std::string>();
    item.source_path = curator::path_from_json(j.at("source_path"));
    item.question = j.at("question").get<std::string>();
    item.answer = j.at("answer").get<std::string>();
    for (const Json& s : j.at("reasoning_steps")) {
        ReasoningStep step;
        step.hop = s.at("hop").get<int>();
        step.fact = s.at("fact").get<std::string>();
        step.evidence = s.at("evidence").get<std::string>();
        step.output = s.at("output").get<std::string>();
        item.reasoning_steps.push_back(std::move(step));
    }
    for (const Json& a : j.at("negative_aspect")) {
        NegativeAspect aspect;
        aspect.dimension = corpus::distractor_type_from_string(a.at("dimension").get<std::string>());
        aspect.misleading_claim = a.at("misleading_claim").get<std::string>();
        aspect.disambiguation = a.at("disambiguation").get<std::string>();
        aspect.distraction_text = a.at("distraction_text").get<std::string>();
        item.negative_aspect.push_back(std::move(aspect));
    }
    return item;
}

}  // namespace ragforge::synthesis
