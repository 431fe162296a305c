#pragma once

#include <string>
#include <vector>

#include "promptmut/clients.hpp"
#include "promptmut/mutation_ops.hpp"
#include "promptmut/rng.hpp"
#include "promptmut/template_model.hpp"
#include "promptmut/validation.hpp"

namespace promptmut {

struct Pool {
    std::vector<MetaTemplate> members;  // members[0] is the original seed
    int threshold = 100;
};

// Pool member ids as used by the store and the eval harness: t000, t001, ...
std::string template_id_for_index(std::size_t index);

struct LoopBudget {
    int max_iterations = 10000;
    int max_refinement_rounds = 3;
    std::uint64_t rng_seed = 0;
};

// One transcript row: either a client interaction (phase mutation/refinement)
// or the iteration outcome. Persisted to lineage.jsonl and sufficient to
// replay the loop bit-identically.
struct LoopEvent {
    int iteration = 0;
    std::string phase;  // "mutation", "refinement", "outcome"
    std::size_t member_index = 0;
    std::string op_name;
    std::string op_target;
    std::string prompt;
    std::string response;
    std::string verdict;  // "accepted" or "rejected"
    std::string code;     // rejection code: ParseError, C1, C2, C3, NoOp, duplicate, ...
    std::string detail;
    std::string template_id;  // assigned on accepted outcomes

    json to_json() const;
    static LoopEvent from_json(const json& row);
};

// The raw responses of every client interaction, in order — feeding these to a
// ReplayMutatorClient reproduces the run.
std::vector<std::string> responses_from_transcript(const std::vector<json>& rows);

std::string args_signature(const OpSpec& spec);

std::string build_mutation_prompt(const MetaTemplate& mt, const OpSpec& spec);

std::string build_refinement_prompt(const Inconsistency& inc, const OpSpec& spec,
                                    const std::string& component_content);

struct MutateResult {
    bool accepted = false;
    MetaTemplate result;  // meaningful when accepted
    std::string code;     // rejection code otherwise
    std::string detail;
    std::vector<LoopEvent> events;
};

// One iteration: sample a member and an operation, prompt the mutator, parse,
// validate, apply, refine inconsistencies, and screen for duplicates.
MutateResult mutate_once(const Pool& pool, MutatorClient& client, const DecodeParams& decode,
                         EmbeddingClient& embedder, const ValidationPolicy& policy,
                         const LoopBudget& budget, Rng& rng, int iteration);

struct LoopResult {
    Pool pool;
    std::vector<LoopEvent> transcript;
    int iterations = 0;
    int accepted = 0;
};

// Grows the pool from the seed until `threshold` members exist. Throws
// BudgetExhaustedError (reporting the acceptance rate) when max_iterations run
// out first; ClientError propagates from the transport.
LoopResult run_mutation_loop(const MetaTemplate& seed, MutatorClient& client,
                             const DecodeParams& decode, EmbeddingClient& embedder,
                             const ValidationPolicy& policy, const LoopBudget& budget,
                             int threshold);

}  // namespace promptmut
