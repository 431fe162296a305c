#pragma once

#include <optional>
#include <string>
#include <vector>

#include "promptmut/mutator_loop.hpp"
#include "promptmut/validation.hpp"

namespace promptmut {

// One paraphrase-bearing operation (kind 1 or 2) recovered by replaying a
// member's lineage from the seed template.
struct ParaphraseEntry {
    std::size_t op_index = 0;  // position in the member's lineage
    std::string op_name;
    std::string node;
    std::string old_text;
    std::string new_text;
    bool gate_exempt = false;            // C2 does not apply (tag, or short text)
    std::optional<double> similarity;    // set when the gate applies
};

struct TemplateReview {
    std::string template_id;
    std::vector<AppliedOp> lineage;
    std::vector<ParaphraseEntry> paraphrases;
    std::vector<std::string> diff_lines;  // unified-style diff vs the seed render
};

struct ReviewReport {
    std::string task_id;
    std::vector<TemplateReview> templates;

    json to_json() const;
    std::string to_text() const;
};

// Lines prefixed with ' ', '-', '+' (LCS-based), old = seed render, new = member render.
std::vector<std::string> diff_lines(const std::string& old_text, const std::string& new_text);

ReviewReport build_review_report(const Pool& pool, EmbeddingClient& embedder,
                                 const ValidationPolicy& policy);

}  // namespace promptmut
