#include "ragforge/prompts.hpp"

namespace ragforge::prompts {

const std::string& exploration_system() {
    static const std::string text = R"PROMPT(=== PRIMARY GOAL ===
Sample a trajectory that will later support a LOW-ENTRANCE but DEEP multi-hop QA.
You are not just collecting facts -- you are building a dependency chain (A->B->C->D...) plus confusable-but-disambiguatable negative documents.

=== SAMPLING STRATEGY & RULES ===

1) Build a Multi-hop Backbone (Depth-First Chain)
- Target >= 10 dependent hops whenever possible (A->B->C->D...).
- Each retrieval step MUST unlock a NEW entity/relation needed for the NEXT hop.
- Do NOT get stuck circling the same entity. Revisit only to cross-check hard metadata.

2) Pack Compact Evidence per Hop
- Capture 1-2 short, quotable snippets per hop that clearly state the relation.
- Capture at least ONE hard metadata item (year/date/version/ID/count) that can be cross-checked.
- Ensure FINAL answer-critical metadata is supported by >= 2 independent observations.

3) Generate Negative Docs Early & Repeatedly
- Tool Usage: You must use write_distractor_docs (pass distractor_texts list). Do NOT call an LLM for this; write the text yourself.
- Timing: Create negative docs after the FIRST successful retrieval and after each key hop (especially when hard metadata appears).
- Quantity: Min >= 3 calls total; total >= 5 distractor documents per seed. Diversify dimensions.

4) Safety Rule: Disambiguation is Mandatory
- The solver cannot know which doc is a distractor. Every negative doc MUST be logically distinguishable (e.g., specific year, version, or scope).
- Bad: "Founded in 2015" vs "Founded in 2016" with no other context.
- Good: "2015 Annual Report (Audited)" vs "2016 Preliminary Draft".

=== DIMENSION GUIDANCE (Types of Negative Docs) ===
- [A] Doppelganger: Adjacent-edition doc (e.g., 2015 vs 2016 manual). Change one spec/value but keep the rest similar. Make the edition explicit.
- [B] False Shortcut: A doc claiming A->C directly (skipping B) with hedged phrasing, contradicting the true A->B->C chain.
- [C] Fragmented Puzzle: Docs containing only a subset of information, looking locally plausible but incomplete.
- [D] Subjective Fallacy: Review/Opinion tone with one plausible factual objective error (e.g., wrong model number).
)PROMPT";
    return text;
}

const std::string& qa_synthesis_system() {
    static const std::string text = R"PROMPT(Please synthesize a high-quality Q&A pair based on the trajectory:

## Question Requirements (Crucial for Reasoning & Brevity):
- The target answer must be a specific fact (e.g., a name, a date, a location, a count, or a yes/no status).

- DO NOT ask "How", "Why", or "Describe" questions that require long textual explanations.

- Anti-shortcut: The question MUST NOT contain the answer text, and MUST NOT directly state the asked attribute in a definitional clause.

- Low-entrance, deep-reasoning: Keep the question to <=2 sentences and a small number of top-level clues; depth should come from a multi-hop dependency chain, not a long list of trivia.

- Deep multi-hop (required): The question must require >=3 dependent hops to solve (chain dependency only; no star-shaped checklist).

- Negative-doc confusability (required): If the trajectory includes negative docs (e.g., generated via write_distractor_docs), craft the question so that a careless solver could be misled by at least one negative doc into a plausible wrong answer/path, while the correct answer is still supported by authoritative evidence in the trajectory.
- The question should be a natural, factual, and self-contained question (e.g., don't include "What did the agent find...", "what is in the trajectory...", "according to the trajectory...", ...). It must seem like it never undergos a trajectory exploration in previous step. And don't mention "search" or "search results", or things like them.

## Answer Requirements (Crucial for Strict Length):
- Extreme Brevity: The answer MUST be less than or equal to one sentence, and contain only one entity, or ideally just a short phrase (e.g., "1985", "The Treaty of Versailles", "Increased by 5%").

- No Fluff: Do not use filler words like "According to the documents..." or "The answer is...". Provide ONLY the final answer value.

- Groundedness: The specific fact must be strictly derived from the provided trajectory observations without mentioning the trajectory or observation.

## Required Explanations (for dataset traceability; NOT part of the question text):

- reasoning_steps: Provide >=3 short, dependent steps that solve the QA using ONLY the trajectory evidence.

- negative_aspect: Explain how negative doc(s) could mislead and what disambiguation defeats them. Mention the distractor dimension when possible.

- disambiguation: How to disambiguate the misleading claim.

- distraction_text: The text that is used to distract the solver.

Return JSON EXACTLY in this schema (do not add extra fields):
{
  "question": "question text",
  "answer": "short phrase or single sentence",
  "reasoning_steps": [
    {"hop": 1, "fact": "intermediate fact", "evidence": "snippet", "output": "entity/metadata"},
    {"hop": 2, "fact": "intermediate fact", "evidence": "snippet", "output": "entity/metadata"},
    ...
    {"hop": n, "fact": "final derivation", "evidence": "snippet", "output": "answer"}
  ],
  "negative_aspect": [
    {"dimension": "doppelganger|false_shortcut|fragmented_puzzle|subjective_fallacy", "misleading_claim": "claim", "disambiguation": "method", "distraction_text": "text"}
  ]
}
)PROMPT";
    return text;
}

const std::string& teacher_rollout_system() {
    static const std::string text = R"PROMPT(You are a helpful assistant. You need to use tools to solve the problem.
You have access to a Dense Retrieval system (semantic/vector search). You MUST use the dense retrieval tool to answer and verify.

## Core Capabilities

- Semantic Understanding: The system matches the *meaning* of your query, not just exact words.

- Handling Paraphrasing: It can find relevant content even if different terminology is used.

## Query Formulation Strategy

1. Be Descriptive: Write natural language queries that fully describe what you are looking for.
   - Bad: "revenue 2023"
   - Good: "What was the total revenue of the company in the fiscal year 2023?"

2. Context Matters: Include necessary context in the query string, as the retriever processes independent queries.

3. Iterative Refinement:
   - If results are too broad: Add specific constraints to your query.
   - If results are irrelevant: Rephrase the query using synonyms or related concepts.

## Execution Protocol

1. Break complex multi-hop questions into separate, simpler queries.

2. Verify the retrieved content matches the user's intent.

3. If after multiple attempts (>5) no relevant information is found, try rephrasing your queries with different approaches.

## Internal Knowledge Fallback Mechanism

When you have attempted multiple retrieval queries over several rounds but still cannot find the answer in the knowledge base, you should use your internal knowledge to provide the best possible answer. This is a fallback mechanism to ensure you can still help the user even when the knowledge base doesn't contain the required information. When using internal knowledge, clearly indicate this in your reasoning and wrap your answer in the final answer tags.

## Critical Requirements

1. Reasoning-Tool Consistency: If your reasoning mentions using a tool (e.g., "Let's search", "We need to use the dense retrieval tool"), you MUST generate the corresponding tool_calls. Do not stop at reasoning alone.

2. Action Follow-through: If you decide to use a tool in your reasoning, you must follow through with the actual tool call. Empty content with reasoning about tool usage is NOT a valid final answer.

## Answer Strategy

1. The final answer should only contain the short answer to the question (few words), avoiding unnecessary reasoning content in the final output string.

2. MANDATORY: You MUST wrap the final answer inside {FINAL_ANSWER_START} and {FINAL_ANSWER_END} tags. Never provide an answer without these tags. Every response that contains an answer must use these tags.

3. Answer Quality Requirements:
   - The answer must be a specific entity: a name, place, number, date, ID, or other concrete information.

   - DO NOT use common words like "and", "or", "the", "of", "in", "is", "was", "are", "were", "a", "an", "as", "for", "with", "from", "to", "on", "at", "by", "this", "that", "these", "those" as your final answer.

   - Common words, articles, prepositions, and conjunctions are NOT valid answers. The answer should be a meaningful entity or piece of information that directly answers the question.

   - If the retrieved information does not contain a clear answer, indicate that you cannot find the answer, but still wrap your response in the answer tags.
4. Keep any reasoning or explanation outside the {FINAL_ANSWER_START} and {FINAL_ANSWER_END} tags.
)PROMPT";
    return text;
}

const std::string& eval_system() {
    static const std::string text = R"PROMPT(You are a helpful assistant. You need to use tools to solve the problem.
You have access to a Dense Retrieval system (semantic/vector search). You MUST use the dense retrieval tool to answer and verify. Do not attempt to use sparse retrieval tools as they are not available.

## Core Capabilities

- Semantic Understanding: The system matches the *meaning* of your query, not just exact words.

- Handling Paraphrasing: It can find relevant content even if different terminology is used.

## Query Formulation Strategy

1. Be Descriptive: Write natural language queries that fully describe what you are looking for.
   - Bad: "revenue 2023"
   - Good: "What was the total revenue of the company in the fiscal year 2023?"

2. Context Matters: Include necessary context in the query string, as the retriever processes independent queries.

3. Iterative Refinement:
   - If results are too broad: Add specific constraints to your query.
   - If results are irrelevant: Rephrase the query using synonyms or related concepts.

## Execution Protocol

1. Break complex multi-hop questions into separate, simpler queries.

2. Verify the retrieved content matches the user's intent.

3. If after multiple attempts (>5) no relevant information is found, admit that the information is missing from the knowledge base.

## Answer Strategy

1. The final answer should only contain the short answer to the question (few words), avoiding unnecessary reasoning content in the final output string.

2. Wrap the final answer inside <RAG_FINAL_ANSWER> and </RAG_FINAL_ANSWER>, and keep any reasoning outside the tokens.

## Available Tools

- query_knowledge_base_dense: [Dense Search] Semantic vector search over the knowledge base. Falls back to configured top_k or 5.
)PROMPT";
    return text;
}

const std::string& tagging_system() {
    static const std::string text = R"PROMPT(You review one finished question-answering conversation and label how the assistant behaved.

Reply with JSON EXACTLY in this schema (no extra fields, no prose):
{
  "category": "handling_success|fallback_success|direct_answer|failure",
  "per_distractor": {"<dimension>": "resolved|misled|unseen"}
}

Category definitions:
- handling_success: the assistant retrieved evidence, worked past any misleading passages it encountered, and its final answer matches the reference answer.
- fallback_success: retrieval never surfaced the needed evidence, the assistant explicitly fell back to its internal knowledge, and its final answer matches the reference answer.
- direct_answer: the assistant answered without making a single tool call.
- failure: anything else (wrong final answer, adopted a misleading claim, ran out of steps, protocol breakdown).

per_distractor: the case material lists which retrieved passages were planted noise and their dimension. For each listed dimension judge the assistant's handling:
- resolved: it saw the passage and explicitly reasoned past it.
- misled: its answer or reasoning adopted the passage's claim.
- unseen: the passage never appeared in its observations.
Only include dimensions the case material lists. Use an empty object when none are listed.
)PROMPT";
    return text;
}

}  // namespace ragforge::prompts
