#pragma once

#include <string>
#include <vector>

#include "promptmut/template_model.hpp"

namespace promptmut {

// A function call extracted from a mutator response. The target node is not a
// field: it is recovered from the identifying first argument (node id for
// paraphrase_text/change_delimiter, current tag text for the tag operations).
struct OpCall {
    std::string name;
    std::vector<ArgValue> args;
    // Parallel to args: true when the argument was written as a bare identifier
    // rather than a quoted string. Only enum parameters accept bare spellings;
    // empty means all-quoted (calls built programmatically).
    std::vector<bool> bare;
    OpOrigin origin = OpOrigin::mutation;

    bool is_bare(std::size_t i) const { return i < bare.size() && bare[i]; }
};

// Renders a call in the Python-literal style used in prompts and transcripts.
std::string render_op_call(const std::string& name, const std::vector<ArgValue>& args);

// Extracts exactly one Python-style function call from raw mutator output.
// Literals: single-/double-quoted strings with backslash escapes, integers,
// and bare enum identifiers. Prose and markdown fences around the call are
// ignored. Zero or multiple candidate calls raise ParseError.
OpCall parse_op_call(const std::string& response);

// ASCII case styles for change_tag_case: upper, lower, title, capitalize-first.
std::string apply_case_style(const std::string& s, const std::string& style);

// Resolves the catalog entry a call addresses, using the identifying argument.
// The lookup runs against the pre-operation template (tag text arguments echo
// the content at request time).
const OpSpec& resolve_spec(const MetaTemplate& mt, const OpCall& call);

// Applies a validated call, returning a new template with the lineage extended.
// Content-only rewrite: the node multiset {(id, kind)} is untouched.
MetaTemplate apply_operation(const MetaTemplate& mt, const OpCall& call);

struct StaleLiteral {
    std::string node;         // the mentioned node
    std::string old_literal;  // what the dependent text still says
    std::string new_literal;  // the mentioned node's current rendered form
};

struct Inconsistency {
    ConsistencyRule rule;
    std::vector<StaleLiteral> stale_literals;
    std::string reason;  // reason_template with the `{changes}` slot filled
};

// Checks every consistency rule watching a node touched by `call`: each
// mention of the rule's dependent text node must match one of the mentioned
// node's current rendered forms (header, footer, or raw content).
std::vector<Inconsistency> detect_inconsistencies(const MetaTemplate& before,
                                                  const MetaTemplate& after,
                                                  const OpCall& call);

// Full sweep over all rules and mentions, independent of any particular call.
// Accepted pool members always pass this.
std::vector<Inconsistency> check_consistency(const MetaTemplate& mt);

}  // namespace promptmut
