#include "promptmut/mutator_loop.hpp"

#include <cstdio>

#include "promptmut/errors.hpp"

namespace promptmut {

std::string template_id_for_index(std::size_t index) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "t%03zu", index);
    return buf;
}

json LoopEvent::to_json() const {
    json row;
    row["schema_version"] = 1;
    row["iteration"] = iteration;
    row["phase"] = phase;
    row["member_index"] = member_index;
    row["op_name"] = op_name;
    row["op_target"] = op_target;
    row["prompt"] = prompt;
    row["response"] = response;
    row["verdict"] = verdict;
    row["code"] = code;
    row["detail"] = detail;
    row["template_id"] = template_id;
    return row;
}

LoopEvent LoopEvent::from_json(const json& row) {
    LoopEvent e;
    e.iteration = row.value("iteration", 0);
    e.phase = row.value("phase", std::string());
    e.member_index = row.value("member_index", std::size_t{0});
    e.op_name = row.value("op_name", std::string());
    e.op_target = row.value("op_target", std::string());
    e.prompt = row.value("prompt", std::string());
    e.response = row.value("response", std::string());
    e.verdict = row.value("verdict", std::string());
    e.code = row.value("code", std::string());
    e.detail = row.value("detail", std::string());
    e.template_id = row.value("template_id", std::string());
    return e;
}

std::vector<std::string> responses_from_transcript(const std::vector<json>& rows) {
    std::vector<std::string> responses;
    for (const json& row : rows) {
        std::string phase = row.value("phase", std::string());
        if (phase == "mutation" || phase == "refinement")
            responses.push_back(row.value("response", std::string()));
    }
    return responses;
}

std::string args_signature(const OpSpec& spec) {
    std::string out;
    for (std::size_t i = 0; i < spec.args.size(); ++i) {
        if (i) out += ", ";
        const ArgSpec& arg = spec.args[i];
        out += arg.name + ": ";
        switch (arg.type) {
            case ArgType::string_t: out += "string"; break;
            case ArgType::integer_t: out += "integer"; break;
            case ArgType::enum_t: {
                out += "one of {";
                for (std::size_t j = 0; j < arg.enum_values.size(); ++j) {
                    if (j) out += ", ";
                    out += arg.enum_values[j];
                }
                out += "}";
                break;
            }
        }
    }
    return out;
}

std::string build_mutation_prompt(const MetaTemplate& mt, const OpSpec& spec) {
    return "Below, you are provided with a prompt template.\n" + render_template(mt.tree) +
           "\nYour task is to slightly modify the template to create a new one. The operation "
           "you are required to apply is:\n" +
           spec.name + "(" + args_signature(spec) + "): " + spec.description +
           "\nPlease apply this operation only once. Make sure the operation changes the "
           "template.\nAnswer with a valid Python function call, using exactly the operation "
           "name. Do not include any extra information or comments.";
}

std::string build_refinement_prompt(const Inconsistency& inc, const OpSpec& spec,
                                    const std::string& component_content) {
    if (inc.reason.empty()) throw DomainError("refinement prompt requires a non-empty reason");
    if (spec.target != inc.rule.dependent_node)
        throw DomainError("refinement operation must target the rule's dependent node");
    static const std::string component = "text component";
    return "Below, you are provided with the " + component + " of a prompt.\n" +
           component_content + "\nThere are inconsistencies in the " + component + " because " +
           inc.reason + ". Your task is to fix the " + component +
           " for consistency. The operation you are required to apply is:\n" + spec.name + "(" +
           args_signature(spec) + "): " + spec.description +
           "\nDo not include any extra information or comments. Answer with a valid Python "
           "function call, using exactly the operation name.";
}

namespace {

LoopEvent make_event(int iteration, std::string phase, std::size_t member_index,
                     const OpSpec& spec, std::string prompt, std::string response) {
    LoopEvent e;
    e.iteration = iteration;
    e.phase = std::move(phase);
    e.member_index = member_index;
    e.op_name = spec.name;
    e.op_target = spec.target;
    e.prompt = std::move(prompt);
    e.response = std::move(response);
    return e;
}

struct CallOutcome {
    bool ok = false;
    std::string code;
    std::string detail;
    OpCall call;
};

// Parse + validate one raw response against the requested operation.
CallOutcome screen_response(const std::string& raw, const OpSpec& spec, const MetaTemplate& mt,
                            OpOrigin origin, EmbeddingClient& embedder,
                            const ValidationPolicy& policy) {
    CallOutcome out;
    try {
        out.call = parse_op_call(raw);
    } catch (const ParseError& e) {
        out.code = "ParseError";
        out.detail = e.what();
        return out;
    }
    out.call.origin = origin;
    Verdict verdict = validate_op_call(out.call, spec, mt, embedder, policy);
    if (!verdict.accepted) {
        out.code = verdict.condition;
        out.detail = verdict.detail;
        return out;
    }
    out.ok = true;
    return out;
}

}  // namespace

MutateResult mutate_once(const Pool& pool, MutatorClient& client, const DecodeParams& decode,
                         EmbeddingClient& embedder, const ValidationPolicy& policy,
                         const LoopBudget& budget, Rng& rng, int iteration) {
    if (pool.members.empty()) throw DomainError("pool must contain the seed template");
    MutateResult result;

    std::size_t member_index = rng.pick(pool.members.size());
    const MetaTemplate& member = pool.members[member_index];
    std::size_t op_index = rng.pick(member.op_catalog.size());
    const OpSpec& spec = member.op_catalog[op_index];

    std::string prompt = build_mutation_prompt(member, spec);
    std::string raw = client.complete(prompt, decode);
    LoopEvent event = make_event(iteration, "mutation", member_index, spec, prompt, raw);

    auto reject = [&](std::string code, std::string detail, LoopEvent ev) {
        ev.verdict = "rejected";
        ev.code = code;
        ev.detail = detail;
        result.events.push_back(std::move(ev));
        result.accepted = false;
        result.code = std::move(code);
        result.detail = std::move(detail);
        return result;
    };

    CallOutcome screened = screen_response(raw, spec, member, OpOrigin::mutation, embedder, policy);
    if (!screened.ok) return reject(screened.code, screened.detail, std::move(event));

    MetaTemplate current;
    try {
        current = apply_operation(member, screened.call);
    } catch (const NoOpError& e) {
        return reject("NoOp", e.what(), std::move(event));
    }
    event.verdict = "accepted";
    result.events.push_back(std::move(event));

    std::vector<Inconsistency> pending = detect_inconsistencies(member, current, screened.call);
    int rounds = 0;
    while (!pending.empty() && rounds < budget.max_refinement_rounds) {
        ++rounds;
        const Inconsistency& inc = pending.front();
        const OpSpec& rspec = current.find_spec("paraphrase_text", inc.rule.dependent_node);
        std::string content = current.tree.node(inc.rule.dependent_node).content;
        std::string rprompt = build_refinement_prompt(inc, rspec, content);
        std::string rraw = client.complete(rprompt, decode);
        LoopEvent revent = make_event(iteration, "refinement", member_index, rspec, rprompt, rraw);

        CallOutcome rscreened =
            screen_response(rraw, rspec, current, OpOrigin::refinement, embedder, policy);
        if (!rscreened.ok) {
            revent.verdict = "rejected";
            revent.code = rscreened.code;
            revent.detail = rscreened.detail;
            result.events.push_back(std::move(revent));
            continue;  // round consumed; same inconsistency comes up again
        }
        try {
            current = apply_operation(current, rscreened.call);
        } catch (const NoOpError& e) {
            revent.verdict = "rejected";
            revent.code = "NoOp";
            revent.detail = e.what();
            result.events.push_back(std::move(revent));
            continue;
        }
        revent.verdict = "accepted";
        result.events.push_back(std::move(revent));
        pending = detect_inconsistencies(member, current, screened.call);
    }

    LoopEvent outcome;
    outcome.iteration = iteration;
    outcome.phase = "outcome";
    outcome.member_index = member_index;
    outcome.op_name = spec.name;
    outcome.op_target = spec.target;

    if (!pending.empty()) {
        outcome.verdict = "rejected";
        outcome.code = "unresolved_inconsistencies";
        outcome.detail = pending.front().reason;
        result.events.push_back(std::move(outcome));
        result.accepted = false;
        result.code = "unresolved_inconsistencies";
        result.detail = pending.front().reason;
        return result;
    }
    if (std::vector<Inconsistency> sweep = check_consistency(current); !sweep.empty()) {
        outcome.verdict = "rejected";
        outcome.code = "inconsistent";
        outcome.detail = sweep.front().reason;
        result.events.push_back(std::move(outcome));
        result.accepted = false;
        result.code = "inconsistent";
        result.detail = sweep.front().reason;
        return result;
    }

    std::string rendered = render_template(current.tree);
    for (const MetaTemplate& existing : pool.members) {
        if (render_template(existing.tree) == rendered) {
            outcome.verdict = "rejected";
            outcome.code = "duplicate";
            outcome.detail = "rendered template equals an existing pool member";
            result.events.push_back(std::move(outcome));
            result.accepted = false;
            result.code = "duplicate";
            result.detail = outcome.detail;
            return result;
        }
    }

    outcome.verdict = "accepted";
    outcome.template_id = template_id_for_index(pool.members.size());
    result.events.push_back(std::move(outcome));
    result.accepted = true;
    result.result = std::move(current);
    return result;
}

LoopResult run_mutation_loop(const MetaTemplate& seed, MutatorClient& client,
                             const DecodeParams& decode, EmbeddingClient& embedder,
                             const ValidationPolicy& policy, const LoopBudget& budget,
                             int threshold) {
    if (threshold < 1) throw DomainError("threshold must be at least 1");
    LoopResult out;
    out.pool.threshold = threshold;
    out.pool.members.push_back(seed);
    Rng rng(budget.rng_seed);

    while (static_cast<int>(out.pool.members.size()) < threshold) {
        if (out.iterations >= budget.max_iterations) {
            double rate =
                out.iterations ? static_cast<double>(out.accepted) / out.iterations : 0.0;
            throw BudgetExhaustedError(
                "max_iterations reached with " + std::to_string(out.pool.members.size()) + "/" +
                std::to_string(threshold) + " members (acceptance rate " + std::to_string(rate) +
                ")");
        }
        ++out.iterations;
        MutateResult result =
            mutate_once(out.pool, client, decode, embedder, policy, budget, rng, out.iterations);
        for (LoopEvent& e : result.events) out.transcript.push_back(std::move(e));
        if (result.accepted) {
            ++out.accepted;
            out.pool.members.push_back(std::move(result.result));
        }
    }
    return out;
}

}  // namespace promptmut
