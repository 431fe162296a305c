#include "promptmut/review.hpp"

#include <sstream>

#include "promptmut/errors.hpp"
#include "promptmut/mutation_ops.hpp"

namespace promptmut {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

json applied_op_json(const AppliedOp& op) {
    json j;
    j["name"] = op.name;
    j["target"] = op.target;
    json args = json::array();
    for (const ArgValue& a : op.args) {
        if (std::holds_alternative<std::string>(a)) {
            args.push_back(std::get<std::string>(a));
        } else {
            args.push_back(std::get<long long>(a));
        }
    }
    j["args"] = args;
    j["origin"] = op.origin == OpOrigin::mutation ? "mutation" : "refinement";
    return j;
}

}  // namespace

std::vector<std::string> diff_lines(const std::string& old_text, const std::string& new_text) {
    std::vector<std::string> a = split_lines(old_text);
    std::vector<std::string> b = split_lines(new_text);
    std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1
                                     : std::max(lcs[i + 1][j], lcs[i][j + 1]);
        }
    }
    std::vector<std::string> out;
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (a[i] == b[j]) {
            out.push_back(" " + a[i]);
            ++i, ++j;
        } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
            out.push_back("-" + a[i]);
            ++i;
        } else {
            out.push_back("+" + b[j]);
            ++j;
        }
    }
    for (; i < n; ++i) out.push_back("-" + a[i]);
    for (; j < m; ++j) out.push_back("+" + b[j]);
    return out;
}

ReviewReport build_review_report(const Pool& pool, EmbeddingClient& embedder,
                                 const ValidationPolicy& policy) {
    if (pool.members.empty()) throw DomainError("review requires a non-empty pool");
    const MetaTemplate& seed = pool.members.front();
    std::string seed_render = render_template(seed.tree);

    ReviewReport report;
    report.task_id = seed.task_id;
    for (std::size_t idx = 0; idx < pool.members.size(); ++idx) {
        const MetaTemplate& member = pool.members[idx];
        TemplateReview tr;
        tr.template_id = template_id_for_index(idx);
        tr.lineage = member.lineage;

        MetaTemplate replayed = seed;
        replayed.lineage.clear();
        for (std::size_t oi = 0; oi < member.lineage.size(); ++oi) {
            const AppliedOp& op = member.lineage[oi];
            OpCall call;
            call.name = op.name;
            call.args = op.args;
            call.bare.assign(op.args.size(), false);
            call.origin = op.origin;
            const OpSpec& spec = resolve_spec(replayed, call);
            std::string old_content = replayed.tree.node(spec.target).content;
            replayed = apply_operation(replayed, call);
            if (spec.kind == 1 || spec.kind == 2) {
                ParaphraseEntry entry;
                entry.op_index = oi;
                entry.op_name = op.name;
                entry.node = spec.target;
                entry.old_text = old_content;
                entry.new_text = replayed.tree.node(spec.target).content;
                if (spec.kind == 1 && word_count(entry.old_text) > policy.word_count_gate) {
                    entry.similarity = cosine_similarity(embedder.embed(entry.old_text),
                                                         embedder.embed(entry.new_text));
                } else {
                    entry.gate_exempt = true;
                }
                tr.paraphrases.push_back(std::move(entry));
            }
        }
        if (!structurally_equal(replayed, member)) {
            throw InvariantError("lineage replay diverges from stored member '" +
                                 tr.template_id + "'");
        }
        tr.diff_lines = diff_lines(seed_render, render_template(member.tree));
        report.templates.push_back(std::move(tr));
    }
    return report;
}

json ReviewReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["task_id"] = task_id;
    json templates = json::array();
    for (const TemplateReview& tr : this->templates) {
        json tj;
        tj["template_id"] = tr.template_id;
        json lineage = json::array();
        for (const AppliedOp& op : tr.lineage) lineage.push_back(applied_op_json(op));
        tj["lineage"] = lineage;
        json paras = json::array();
        for (const ParaphraseEntry& p : tr.paraphrases) {
            json pj;
            pj["op_index"] = p.op_index;
            pj["op_name"] = p.op_name;
            pj["node"] = p.node;
            pj["old_text"] = p.old_text;
            pj["new_text"] = p.new_text;
            if (p.similarity) {
                pj["similarity"] = *p.similarity;
            } else {
                pj["gate_exempt"] = true;
            }
            paras.push_back(std::move(pj));
        }
        tj["paraphrases"] = paras;
        tj["diff"] = tr.diff_lines;
        templates.push_back(std::move(tj));
    }
    j["templates"] = templates;
    return j;
}

std::string ReviewReport::to_text() const {
    std::ostringstream os;
    os << "Review for task " << task_id << " (" << templates.size() << " templates)\n";
    for (const TemplateReview& tr : templates) {
        os << "\n=== " << tr.template_id << " ===\n";
        if (tr.lineage.empty()) {
            os << "seed template (no operations)\n";
        }
        for (std::size_t oi = 0; oi < tr.lineage.size(); ++oi) {
            const AppliedOp& op = tr.lineage[oi];
            os << "op[" << oi << "] " << op.name << " on " << op.target << " ("
               << (op.origin == OpOrigin::mutation ? "mutation" : "refinement") << ")\n";
        }
        for (const ParaphraseEntry& p : tr.paraphrases) {
            os << "paraphrase op[" << p.op_index << "] " << p.node << ":\n";
            os << "  old: " << p.old_text << "\n";
            os << "  new: " << p.new_text << "\n";
            if (p.similarity) {
                os << "  similarity: " << *p.similarity << "\n";
            } else {
                os << "  similarity: gate-exempt\n";
            }
        }
        if (!tr.lineage.empty()) {
            os << "diff vs seed:\n";
            for (const std::string& line : tr.diff_lines) {
                if (!line.empty() && line[0] == ' ') continue;  // changed lines only
                os << "  " << line << "\n";
            }
        }
    }
    return os.str();
}

}  // namespace promptmut
