#include "ragforge/quality.hpp"

#include <cctype>
#include <set>

#include "ragforge/errors.hpp"
#include "ragforge/prompts.hpp"

namespace ragforge::quality {

std::vector<std::string> normalize_answer(const std::string& text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text) {
        const unsigned char uc = static_cast<unsigned char>(c);
        if (std::ispunct(uc)) continue;  // removed outright, not blanked
        cleaned.push_back(static_cast<char>(std::tolower(uc)));
    }

    std::vector<std::string> tokens;
    std::string token;
    const auto flush = [&] {
        if (!token.empty() && token != "a" && token != "an" && token != "the") {
            tokens.push_back(token);
        }
        token.clear();
    };
    for (char c : cleaned) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            token.push_back(c);
        }
    }
    flush();
    return tokens;
}

namespace {

std::map<std::string, int> counts(const std::vector<std::string>& tokens) {
    std::map<std::string, int> out;
    for (const std::string& t : tokens) ++out[t];
    return out;
}

}  // namespace

double token_f1(const std::string& prediction, const std::string& gold) {
    const std::vector<std::string> pred = normalize_answer(prediction);
    const std::vector<std::string> ref = normalize_answer(gold);
    if (pred.empty() && ref.empty()) return 1.0;
    if (pred.empty() || ref.empty()) return 0.0;

    const std::map<std::string, int> pc = counts(pred);
    const std::map<std::string, int> rc = counts(ref);
    long long overlap = 0;
    for (const auto& [tok, n] : pc) {
        auto it = rc.find(tok);
        if (it != rc.end()) overlap += std::min(n, it->second);
    }
    if (overlap == 0) return 0.0;

    const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

bool exact_match(const std::string& prediction, const std::string& gold) {
    return normalize_answer(prediction) == normalize_answer(gold);
}

ScoredSample score_sample(synthesis::QAItem qa, elicit::Trajectory trajectory) {
    ScoredSample s;
    s.f1 = token_f1(trajectory.final_answer, qa.answer);
    s.em = exact_match(trajectory.final_answer, qa.answer);
    s.qa = std::move(qa);
    s.trajectory = std::move(trajectory);
    return s;
}

FilterReport filter_dataset(std::vector<ScoredSample>& samples, double threshold) {
    if (threshold < 0.0 || threshold > 1.0) {
        throw ValidationError("filter threshold must lie in [0, 1]");
    }

    FilterReport report;
    report.threshold = threshold;
    report.total = static_cast<int>(samples.size());
    for (ScoredSample& s : samples) {
        if (s.trajectory.terminated_by == elicit::Termination::kProtocolError) {
            s.accepted = false;
            s.reject_reason = "protocol_error";
        } else if (s.trajectory.terminated_by == elicit::Termination::kStepLimit) {
            s.accepted = false;
            s.reject_reason = "step_limit";
        } else if (s.f1 >= threshold) {
            s.accepted = true;
            s.reject_reason.clear();
        } else {
            s.accepted = false;
            s.reject_reason = "low_f1";
        }
        if (s.accepted) {
            ++report.accepted;
        } else {
            ++report.rejected_by_reason[s.reject_reason];
        }
    }
    return report;
}

const char* to_string(BehaviorCategory c) {
    switch (c) {
        case BehaviorCategory::kHandlingSuccess: return "handling_success";
        case BehaviorCategory::kFallbackSuccess: return "fallback_success";
        case BehaviorCategory::kDirectAnswer: return "direct_answer";
        case BehaviorCategory::kFailure: return "failure";
    }
    return "failure";
}

const char* to_string(DistractorOutcome o) {
    switch (o) {
        case DistractorOutcome::kResolved: return "resolved";
        case DistractorOutcome::kMisled: return "misled";
        case DistractorOutcome::kUnseen: return "unseen";
    }
    return "unseen";
}

BehaviorCategory behavior_category_from_string(const std::string& s) {
    for (BehaviorCategory c : {BehaviorCategory::kHandlingSuccess, BehaviorCategory::kFallbackSuccess,
                               BehaviorCategory::kDirectAnswer, BehaviorCategory::kFailure}) {
        if (s == to_string(c)) return c;
    }
    throw ValidationError("unknown behavior category: " + s);
}

DistractorOutcome distractor_outcome_from_string(const std::string& s) {
    for (DistractorOutcome o : {DistractorOutcome::kResolved, DistractorOutcome::kMisled,
                                DistractorOutcome::kUnseen}) {
        if (s == to_string(o)) return o;
    }
    throw ValidationError("unknown distractor outcome: " + s);
}

namespace {

std::set<corpus::DistractorType> planted_dimensions(const elicit::Trajectory& t) {
    std::set<corpus::DistractorType> dims;
    for (const elicit::TrajectoryStep& step : t.steps) {
        for (const corpus::RetrievalHit& hit : step.observation) {
            if (hit.document.distractor_type) dims.insert(*hit.document.distractor_type);
        }
    }
    return dims;
}

std::string render_tagging_case(const ScoredSample& sample) {
    const elicit::Trajectory& t = sample.trajectory;
    std::string out;
    out += "Question: " + sample.qa.question + "\n";
    out += "Reference answer: " + sample.qa.answer + "\n";
    out += "Final answer given: " + t.final_answer + "\n";
    out += "Terminated by: " + std::string(elicit::to_string(t.terminated_by)) + "\n";
    out += "Tool calls made: " + std::to_string(t.steps.size()) + "\n";

    out += "\nSteps:\n";
    for (const elicit::TrajectoryStep& step : t.steps) {
        out += "Step " + std::to_string(step.step_index) + "\n";
        out += "  Reasoning: " + util::truncate_text(step.thought, 600) + "\n";
        out += "  Query: " + step.action.arguments.value("query", std::string()) + "\n";
        out += "  Passages seen:\n";
        for (const corpus::RetrievalHit& hit : step.observation) {
            out += "    [" + std::to_string(hit.rank) + "] " + hit.document.title;
            if (hit.document.distractor_type) {
                out += "  <-- planted noise, dimension: " +
                       std::string(corpus::to_string(*hit.document.distractor_type));
            }
            out += "\n";
        }
        if (step.observation.empty()) out += "    (none)\n";
    }

    out += "\nClosing reply from the assistant:\n" + util::truncate_text(t.final_raw_text, 1200) +
           "\n";

    const std::set<corpus::DistractorType> dims = planted_dimensions(t);
    out += "\nPlanted dimensions in this case: ";
    if (dims.empty()) {
        out += "none";
    } else {
        bool first = true;
        for (corpus::DistractorType d : dims) {
            if (!first) out += ", ";
            out += corpus::to_string(d);
            first = false;
        }
    }
    out += "\n";
    return out;
}

}  // namespace

BehaviorTag tag_trajectory(const ScoredSample& sample, llm::ChatBackend& backend,
                           const llm::SamplingParams& params) {
    BehaviorTag tag;

    // Machine-checkable fast path: no tool call was ever made.
    if (sample.trajectory.steps.empty()) {
        tag.category = BehaviorCategory::kDirectAnswer;
        return tag;
    }

    std::vector<llm::ChatMessage> messages{llm::ChatMessage::system(prompts::tagging_system()),
                                           llm::ChatMessage::user(render_tagging_case(sample))};

    std::string raw;
    try {
        llm::ChatMessage reply = llm::chat_complete(backend, messages, {}, params);
        raw = reply.content;

        Json j = Json::parse(raw);
        if (!j.is_object() || !j.contains("category") || !j.contains("per_distractor") ||
            j.size() != 2) {
            throw ParseError("tag reply must contain exactly 'category' and 'per_distractor'");
        }
        const BehaviorCategory category =
            behavior_category_from_string(j["category"].get<std::string>());

        // The model cannot claim direct_answer for a trajectory that
        // demonstrably made tool calls.
        if (category == BehaviorCategory::kDirectAnswer) {
            tag.category = BehaviorCategory::kFailure;
            tag.raw_output = raw;
            return tag;
        }

        const std::set<corpus::DistractorType> dims = planted_dimensions(sample.trajectory);
        std::map<corpus::DistractorType, DistractorOutcome> outcomes;
        for (auto it = j["per_distractor"].begin(); it != j["per_distractor"].end(); ++it) {
            const corpus::DistractorType dim = corpus::distractor_type_from_string(it.key());
            if (dims.find(dim) == dims.end()) {
                throw ParseError("tag reply labels a dimension that was never planted: " +
                                 it.key());
            }
            outcomes[dim] = distractor_outcome_from_string(it.value().get<std::string>());
        }

        tag.category = category;
        tag.per_distractor = std::move(outcomes);
        return tag;
    } catch (const Error& e) {
        tag.category = BehaviorCategory::kFailure;
        tag.raw_output = raw.empty() ? std::string(e.what()) : raw;
        return tag;
    } catch (const nlohmann::json::exception& e) {
        tag.category = BehaviorCategory::kFailure;
        tag.raw_output = raw.empty() ? std::string(e.what()) : raw;
        return tag;
    }
}

std::map<int, int> tool_call_histogram(const std::vector<ScoredSample>& samples) {
    std::map<int, int> histogram;
    for (const ScoredSample& s : samples) {
        ++histogram[static_cast<int>(s.trajectory.steps.size())];
    }
    return histogram;
}

Json scored_to_json(const ScoredSample& s) {
    Json j = Json::object();
    j["qa_id"] = s.qa.qa_id;
    j["tree_id"] = s.qa.tree_id;
    j["f1"] = s.f1;
    j["em"] = s.em;
    j["accepted"] = s.accepted;
    j["reject_reason"] = s.reject_reason;
    return j;
}

ScoredSample scored_from_json(const Json& j) {
    // Summary row only: the full QA item and trajectory live in their own
    // artifacts and are re-joined by qa_id.
    ScoredSample s;
    s.qa.qa_id = j.at("qa_id").get<std::string>();
    s.qa.tree_id = j.at("tree_id").get<std::string>();
    s.trajectory.qa_id = s.qa.qa_id;
    s.f1 = j.at("f1").get<double>();
    s.em = j.at("em").get<bool>();
    s.accepted = j.at("accepted").get<bool>();
    s.reject_reason = j.at("reject_reason").get<std::string>();
    return s;
}

Json tag_to_json(const BehaviorTag& tag) {
    Json j = Json::object();
    j["category"] = to_string(tag.category);
    Json per = Json::object();
    for (const auto& [dim, outcome] : tag.per_distractor) {
        per[corpus::to_string(dim)] = to_string(outcome);
    }
    j["per_distractor"] = std::move(per);
    if (!tag.raw_output.empty()) j["raw_output"] = tag.raw_output;
    return j;
}

}  // namespace ragforge::quality
