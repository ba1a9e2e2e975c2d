#include "ragforge/elicitation.hpp"

#include <algorithm>

#include "ragforge/errors.hpp"
#include "ragforge/prompts.hpp"

namespace ragforge::elicit {

namespace {

constexpr const char* kRolloutStart = "{FINAL_ANSWER_START}";
constexpr const char* kRolloutEnd = "{FINAL_ANSWER_END}";
constexpr const char* kEvalStart = "<RAG_FINAL_ANSWER>";
constexpr const char* kEvalEnd = "</RAG_FINAL_ANSWER>";

// Consecutive protocol slips (unknown tool, malformed arguments) tolerated
// before the trajectory is abandoned.
constexpr int kMaxProtocolStrikes = 3;

}  // namespace

const char* to_string(RouterCase c) {
    switch (c) {
        case RouterCase::kForcedFirst: return "forced_first";
        case RouterCase::kSuppressedAfterInjection: return "suppressed_after_injection";
        case RouterCase::kProbabilisticInject: return "probabilistic_inject";
        case RouterCase::kClean: return "clean";
    }
    return "clean";
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::kAnswer: return "answer";
        case Termination::kStepLimit: return "step_limit";
        case Termination::kProtocolError: return "protocol_error";
    }
    return "protocol_error";
}

RouterCase router_case_from_string(const std::string& s) {
    for (RouterCase c : {RouterCase::kForcedFirst, RouterCase::kSuppressedAfterInjection,
                         RouterCase::kProbabilisticInject, RouterCase::kClean}) {
        if (s == to_string(c)) return c;
    }
    throw ValidationError("unknown router case: " + s);
}

Termination termination_from_string(const std::string& s) {
    for (Termination t : {Termination::kAnswer, Termination::kStepLimit,
                          Termination::kProtocolError}) {
        if (s == to_string(t)) return t;
    }
    throw ValidationError("unknown termination: " + s);
}

void ElicitConfig::validate() const {
    if (k < 3) {
        throw ValidationError(
            "retrieval k must be at least 3 when distractor injection is enabled "
            "(2 of the k slots are reserved for injected documents)");
    }
    if (tau < -1.0 || tau > 1.0) throw ValidationError("tau must lie in [-1, 1]");
    if (p_e < 0.0 || p_e > 1.0) throw ValidationError("p_e must lie in [0, 1]");
    if (max_steps < 1) throw ValidationError("max_steps must be >= 1");
    if (observation_char_cap < 1) throw ValidationError("observation_char_cap must be >= 1");
}

RouterDecision route_retrieval(int step_index, bool prev_injected, double p_e, SeededRng& rng) {
    if (step_index < 1) throw ValidationError("step_index is 1-based");
    if (p_e < 0.0 || p_e > 1.0) throw ValidationError("p_e must lie in [0, 1]");

    RouterDecision decision;
    decision.step = step_index;
    if (step_index == 1) {
        decision.router_case = RouterCase::kForcedFirst;
        return decision;
    }
    if (prev_injected) {
        decision.router_case = RouterCase::kSuppressedAfterInjection;
        return decision;
    }
    const double u = rng.uniform01();
    decision.draw = u;
    decision.router_case = u < p_e ? RouterCase::kProbabilisticInject : RouterCase::kClean;
    return decision;
}

RetrievalPlanResult execute_retrieval_plan(const RouterDecision& decision,
                                           const std::string& query,
                                           const corpus::KnowledgeBase& kb,
                                           const corpus::KnowledgeBase& distractors, int k,
                                           double tau) {
    RetrievalPlanResult out;
    const bool wants_injection = decision.router_case == RouterCase::kForcedFirst ||
                                 decision.router_case == RouterCase::kProbabilisticInject;

    if (!wants_injection) {
        out.hits = kb.search(query, k, tau);
        return out;
    }

    if (k < 3) {
        throw ValidationError(
            "retrieval k must be at least 3 when distractor injection is enabled "
            "(2 of the k slots are reserved for injected documents)");
    }

    std::vector<corpus::RetrievalHit> clean = kb.search(query, k - 2, tau);

    if (distractors.empty()) {
        // Nothing to inject yet: serve the clean slots only and say so.
        out.hits = std::move(clean);
        out.degraded = true;
        for (std::size_t i = 0; i < out.hits.size(); ++i) out.hits[i].rank = static_cast<int>(i) + 1;
        return out;
    }

    std::vector<corpus::RetrievalHit> planted = distractors.search(query, 2, tau);
    if (planted.size() < 2) {
        // The threshold starved the injection; fall back to the best two
        // regardless of score so the plant still happens.
        planted = distractors.top_k_unfiltered(query, 2);
        out.below_threshold = true;
    }
    out.injected = !planted.empty();

    out.hits = std::move(clean);
    for (corpus::RetrievalHit& hit : planted) out.hits.push_back(std::move(hit));
    std::stable_sort(out.hits.begin(), out.hits.end(),
                     [](const corpus::RetrievalHit& a, const corpus::RetrievalHit& b) {
                         if (a.score != b.score) return a.score > b.score;
                         const bool a_kb = a.document.origin == corpus::DocOrigin::kKnowledgeBase;
                         const bool b_kb = b.document.origin == corpus::DocOrigin::kKnowledgeBase;
                         if (a_kb != b_kb) return a_kb;
                         return a.document.id < b.document.id;
                     });
    for (std::size_t i = 0; i < out.hits.size(); ++i) out.hits[i].rank = static_cast<int>(i) + 1;
    return out;
}

std::string render_observation(const std::vector<corpus::RetrievalHit>& hits,
                               int observation_char_cap) {
    if (hits.empty()) return "No documents matched the query.";
    std::string out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += "[" + std::to_string(hits[i].rank) + "] " + hits[i].document.title + "\n";
        out += util::truncate_text(hits[i].document.text,
                                   static_cast<std::size_t>(observation_char_cap));
    }
    return out;
}

std::string extract_final_answer(const std::string& text, AnswerTagMode mode) {
    const std::string start = mode == AnswerTagMode::kRollout ? kRolloutStart : kEvalStart;
    const std::string end = mode == AnswerTagMode::kRollout ? kRolloutEnd : kEvalEnd;

    const std::size_t start_pos = text.rfind(start);
    if (start_pos == std::string::npos) {
        throw ExtractionError("final answer tag " + start + " not found");
    }
    const std::size_t content_pos = start_pos + start.size();
    const std::size_t end_pos = text.find(end, content_pos);
    if (end_pos == std::string::npos) {
        throw ExtractionError("final answer tag " + start + " is not closed by " + end);
    }
    return util::trim(text.substr(content_pos, end_pos - content_pos));
}

Trajectory run_teacher(const std::string& question, const corpus::KnowledgeBase& kb,
                       const corpus::KnowledgeBase& distractors, const ElicitConfig& config,
                       llm::ChatBackend& backend, SeededRng& rng) {
    config.validate();
    if (question.empty()) throw ValidationError("question must be non-empty");

    Trajectory traj;
    traj.question = question;
    traj.rng_seed = rng.seed();
    traj.prompts_version = prompts::kVersion;
    traj.observation_char_cap = config.observation_char_cap;

    std::vector<llm::ChatMessage> messages{llm::ChatMessage::system(prompts::teacher_rollout_system()),
                                           llm::ChatMessage::user(question)};
    const std::vector<Json> tools{llm::dense_search_tool_schema()};

    bool prev_injected = false;
    int strikes = 0;

    try {
        while (true) {
            llm::ChatMessage reply = llm::chat_complete(backend, messages, tools, config.sampling);
            llm::AssistantTurn turn = llm::parse_assistant_turn(reply);

            if (auto* final_text = std::get_if<llm::FinalText>(&turn)) {
                traj.final_raw_text = final_text->text;
                traj.final_answer = extract_final_answer(final_text->text, AnswerTagMode::kRollout);
                traj.terminated_by = Termination::kAnswer;
                return traj;
            }

            const auto& calls = std::get<llm::ToolRequest>(turn).calls;
            const llm::ToolCall& call = calls.front();

            if (static_cast<int>(traj.steps.size()) >= config.max_steps) {
                traj.terminated_by = Termination::kStepLimit;
                traj.failure_reason = "tool budget of " + std::to_string(config.max_steps) +
                                      " steps exhausted without a final answer";
                return traj;
            }

            // Protocol slips get a corrective tool reply, not a step.
            std::string slip;
            std::string query;
            int requested_k = config.k;
            if (call.name != llm::kDenseSearchToolName) {
                slip = "Unknown tool '" + call.name + "'. Only " + llm::kDenseSearchToolName +
                       " is available.";
            } else if (!call.arguments.contains("query") || !call.arguments["query"].is_string() ||
                       call.arguments["query"].get<std::string>().empty()) {
                slip = "Invalid arguments: 'query' must be a non-empty string.";
            } else if (call.arguments.contains("top_k") && !call.arguments["top_k"].is_null() &&
                       (!call.arguments["top_k"].is_number_integer() ||
                        call.arguments["top_k"].get<int>() < 1)) {
                slip = "Invalid arguments: 'top_k' must be a positive integer.";
            } else {
                query = call.arguments["query"].get<std::string>();
                if (call.arguments.contains("top_k") && !call.arguments["top_k"].is_null()) {
                    requested_k = call.arguments["top_k"].get<int>();
                }
            }

            if (!slip.empty()) {
                if (++strikes >= kMaxProtocolStrikes) {
                    throw ProtocolError("abandoned after " + std::to_string(strikes) +
                                        " malformed tool calls; last: " + slip);
                }
                messages.push_back(reply);
                for (const llm::ToolCall& c : calls) {
                    messages.push_back(llm::ChatMessage::tool(c.call_id, slip));
                }
                continue;
            }

            const int step_index = static_cast<int>(traj.steps.size()) + 1;
            RouterDecision decision = route_retrieval(step_index, prev_injected, config.p_e, rng);
            const bool wants_injection = decision.router_case == RouterCase::kForcedFirst ||
                                         decision.router_case == RouterCase::kProbabilisticInject;
            // Injection needs two reserved slots, so the model's top_k is
            // raised to 3 on injected steps; otherwise it is honored as-is.
            const int k_effective = wants_injection ? std::max(requested_k, 3) : requested_k;

            RetrievalPlanResult plan =
                execute_retrieval_plan(decision, query, kb, distractors, k_effective, config.tau);
            traj.router_log.push_back(decision);

            TrajectoryStep step;
            step.step_index = step_index;
            step.thought = reply.content;
            step.action = call;
            step.observation = plan.hits;
            step.distractor_injected = plan.injected;
            step.degraded = plan.degraded;
            step.below_threshold = plan.below_threshold;
            traj.steps.push_back(std::move(step));
            prev_injected = plan.injected;

            messages.push_back(reply);
            messages.push_back(llm::ChatMessage::tool(
                call.call_id, render_observation(plan.hits, config.observation_char_cap)));
            for (std::size_t i = 1; i < calls.size(); ++i) {
                messages.push_back(llm::ChatMessage::tool(
                    calls[i].call_id,
                    "Please issue one retrieval at a time; only the first call was executed."));
            }
        }
    } catch (const ExtractionError& e) {
        traj.terminated_by = Termination::kProtocolError;
        traj.failure_reason = e.what();
    } catch (const ProtocolError& e) {
        traj.terminated_by = Termination::kProtocolError;
        traj.failure_reason = e.what();
    } catch (const TransportError& e) {
        traj.terminated_by = Termination::kProtocolError;
        traj.failure_reason = e.what();
    }
    return traj;
}

Json trajectory_to_json(const Trajectory& t) {
    Json j = Json::object();
    j["qa_id"] = t.qa_id;
    j["question"] = t.question;
    j["rng_seed"] = t.rng_seed;
    j["prompts_version"] = t.prompts_version;
    j["observation_char_cap"] = t.observation_char_cap;
    j["terminated_by"] = to_string(t.terminated_by);
    j["failure_reason"] = t.failure_reason;
    j["final_answer"] = t.final_answer;
    j["final_raw_text"] = t.final_raw_text;

    Json log = Json::array();
    for (const RouterDecision& d : t.router_log) {
        Json row = Json::object();
        row["step"] = d.step;
        row["case"] = to_string(d.router_case);
        row["draw"] = d.draw ? Json(*d.draw) : Json(nullptr);
        log.push_back(std::move(row));
    }
    j["router_log"] = std::move(log);

    Json steps = Json::array();
    for (const TrajectoryStep& s : t.steps) {
        Json row = Json::object();
        row["step_index"] = s.step_index;
        row["thought"] = s.thought;
        Json action = Json::object();
        action["call_id"] = s.action.call_id;
        action["name"] = s.action.name;
        action["arguments"] = s.action.arguments;
        row["action"] = std::move(action);
        row["distractor_injected"] = s.distractor_injected;
        row["degraded"] = s.degraded;
        row["below_threshold"] = s.below_threshold;
        Json obs = Json::array();
        for (const corpus::RetrievalHit& hit : s.observation) {
            Json h = Json::object();
            h["document"] = corpus::to_json(hit.document);
            h["score"] = hit.score;
            h["rank"] = hit.rank;
            obs.push_back(std::move(h));
        }
        row["observation"] = std::move(obs);
        steps.push_back(std::move(row));
    }
    j["steps"] = std::move(steps);
    return j;
}

Trajectory trajectory_from_json(const Json& j) {
    Trajectory t;
    t.qa_id = j.at("qa_id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    t.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    t.prompts_version = j.at("prompts_version").get<int>();
    t.observation_char_cap = j.at("observation_char_cap").get<int>();
    t.terminated_by = termination_from_string(j.at("terminated_by").get<std::string>());
    t.failure_reason = j.value("failure_reason", std::string());
    t.final_answer = j.at("final_answer").get<std::string>();
    t.final_raw_text = j.at("final_raw_text").get<std::string>();

    for (const Json& row : j.at("router_log")) {
        RouterDecision d;
        d.step = row.at("step").get<int>();
        d.router_case = router_case_from_string(row.at("case").get<std::string>());
        if (!row.at("draw").is_null()) d.draw = row["draw"].get<double>();
        t.router_log.push_back(d);
    }

    for (const Json& row : j.at("steps")) {
        TrajectoryStep s;
        s.step_index = row.at("step_index").get<int>();
        s.thought = row.at("thought").get<std::string>();
        s.action.call_id = row.at("action").at("call_id").get<std::string>();
        s.action.name = row.at("action").at("name").get<std::string>();
        s.action.arguments = row.at("action").at("arguments");
        s.distractor_injected = row.at("distractor_injected").get<bool>();
        s.degraded = row.at("degraded").get<bool>();
        s.below_threshold = row.at("below_threshold").get<bool>();
        for (const Json& h : row.at("observation")) {
            corpus::RetrievalHit hit;
            hit.document = corpus::document_from_json(h.at("document"));
            hit.score = h.at("score").get<double>();
            hit.rank = h.at("rank").get<int>();
            s.observation.push_back(std::move(hit));
        }
        t.steps.push_back(std::move(s));
    }
    return t;
}

}  // namespace ragforge::elicit
