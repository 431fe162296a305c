#include "promptmut/validation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "promptmut/errors.hpp"
#include "promptmut/jsonio.hpp"

namespace promptmut {

std::vector<std::string> StubEmbedder::tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

std::vector<double> StubEmbedder::embed(const std::string& text) {
    std::vector<double> v(kDimension, 0.0);
    for (const std::string& token : tokenize(text)) v[fnv1a64(token) % kDimension] += 1.0;
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
        double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return v;
}

double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size())
        throw DimensionMismatchError("vectors have dimensions " + std::to_string(u.size()) +
                                     " and " + std::to_string(v.size()));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw ZeroVectorError("cosine of an all-zero vector is undefined");
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

int word_count(const std::string& text) {
    int count = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

namespace {

const char* arg_type_name(ArgType t) {
    switch (t) {
        case ArgType::string_t: return "string";
        case ArgType::enum_t: return "enum";
        case ArgType::integer_t: return "integer";
    }
    return "string";
}

}  // namespace

Verdict check_arguments(const OpCall& call, const OpSpec& spec) {
    if (call.name != spec.name)
        return Verdict::reject("C1", "operation name " + call.name + " does not match " + spec.name);
    if (call.args.size() != spec.args.size())
        return Verdict::reject("C1", spec.name + " takes " + std::to_string(spec.args.size()) +
                                         " arguments, got " + std::to_string(call.args.size()));
    for (std::size_t i = 0; i < spec.args.size(); ++i) {
        const ArgSpec& as = spec.args[i];
        const ArgValue& v = call.args[i];
        switch (as.type) {
            case ArgType::string_t:
                if (!std::holds_alternative<std::string>(v) || call.is_bare(i))
                    return Verdict::reject("C1", "argument " + as.name + " must be a quoted string");
                break;
            case ArgType::integer_t:
                if (!std::holds_alternative<long long>(v))
                    return Verdict::reject("C1", "argument " + as.name + " must be an integer");
                break;
            case ArgType::enum_t: {
                if (!std::holds_alternative<std::string>(v))
                    return Verdict::reject("C1", "argument " + as.name + " must be one of the " +
                                                     arg_type_name(as.type) + " values");
                const std::string& s = std::get<std::string>(v);
                if (std::find(as.enum_values.begin(), as.enum_values.end(), s) ==
                    as.enum_values.end())
                    return Verdict::reject("C1", "argument " + as.name + " value " +
                                                     arg_value_repr(v) + " is not a member");
                break;
            }
        }
    }
    return Verdict::ok();
}

Verdict check_semantics(const std::string& old_text, const std::string& new_text,
                        EmbeddingClient& client, const ValidationPolicy& policy) {
    int words = word_count(old_text);
    if (words <= policy.word_count_gate) {
        Verdict v = Verdict::ok();
        v.detail = "gate-exempt (" + std::to_string(words) + " words)";
        return v;
    }
    double sim;
    try {
        sim = cosine_similarity(client.embed(old_text), client.embed(new_text));
    } catch (const ZeroVectorError&) {
        return Verdict::reject("C2", "replacement has no token content; similarity undefined");
    }
    std::ostringstream detail;
    detail << "similarity " << sim << " vs threshold " << policy.similarity_threshold;
    Verdict v;
    v.similarity = sim;
    v.detail = detail.str();
    if (sim < policy.similarity_threshold) {
        v.accepted = false;
        v.condition = "C2";
    } else {
        v.accepted = true;
    }
    return v;
}

bool delimiter_in_whitelist(const std::string& s, const ValidationPolicy& policy,
                            std::string* why) {
    if (s.empty()) {
        *why = "delimiter must be non-empty";
        return false;
    }
    if (s.size() > policy.max_delimiter_len) {
        *why = "delimiter longer than " + std::to_string(policy.max_delimiter_len) + " characters";
        return false;
    }
    if (s.find("{}") != std::string::npos) {
        *why = "delimiter must not contain the slot token {}";
        return false;
    }
    for (unsigned char c : s) {
        bool ws = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        bool punct = c < 0x80 && std::ispunct(c);
        if (!ws && !punct) {
            *why = "delimiter may contain only whitespace and punctuation";
            return false;
        }
    }
    return true;
}

namespace {

std::string get_str(const OpCall& call, std::size_t i) {
    return std::get<std::string>(call.args[i]);
}

Verdict check_format_arg(const std::string& pattern, const char* what) {
    std::size_t count = 0, pos = 0;
    while ((pos = pattern.find("{}", pos)) != std::string::npos) {
        ++count;
        pos += 2;
    }
    if (count != 1)
        return Verdict::reject("C3", std::string(what) +
                                         " must contain the tag slot {} exactly once");
    if (pattern.size() <= 2)
        return Verdict::reject("C3", std::string(what) +
                                         " needs at least one character besides the tag slot");
    return Verdict::ok();
}

}  // namespace

Verdict check_description(const OpCall& call, const OpSpec& spec, const MetaTemplate& mt,
                          const ValidationPolicy& policy) {
    const SyntaxTree& tree = mt.tree;
    switch (spec.kind) {
        case 1: {
            if (get_str(call, 0) != spec.target)
                return Verdict::reject("C3", "first argument must echo the node id \"" +
                                                 spec.target + "\"");
            const Node& node = tree.node(spec.target);
            const std::string& new_text = get_str(call, 1);
            if (new_text.empty()) return Verdict::reject("C3", "replacement text is empty");
            if (new_text == node.content)
                return Verdict::reject("C3", "replacement text equals the current text");
            std::vector<std::string> before = scan_placeholder_occurrences(node.content);
            std::vector<std::string> after = scan_placeholder_occurrences(new_text);
            std::sort(before.begin(), before.end());
            std::sort(after.begin(), after.end());
            if (before != after)
                return Verdict::reject("C3", "replacement must keep every {{placeholder}} marker");
            for (const Mention& m : node.mentions) {
                RenderedForms rf = rendered_forms(tree, m.node);
                bool kept = new_text.find(m.literal) != std::string::npos ||
                            (rf.has_header && new_text.find(rf.header) != std::string::npos) ||
                            (rf.has_footer && new_text.find(rf.footer) != std::string::npos) ||
                            (!rf.raw.empty() && new_text.find(rf.raw) != std::string::npos);
                if (!kept)
                    return Verdict::reject("C3", "replacement drops the reference to node \"" +
                                                     m.node + "\" (" +
                                                     arg_value_repr(ArgValue{m.literal}) + ")");
            }
            return Verdict::ok();
        }
        case 2: {
            const Node& node = tree.node(spec.target);
            if (get_str(call, 0) != node.content)
                return Verdict::reject("C3", "first argument must echo the current tag text \"" +
                                                 node.content + "\"");
            const std::string& new_tag = get_str(call, 1);
            if (new_tag.empty()) return Verdict::reject("C3", "new tag is empty");
            if (new_tag.find('\n') != std::string::npos || new_tag.find('\r') != std::string::npos)
                return Verdict::reject("C3", "tags must not contain line breaks");
            if (new_tag.find("{}") != std::string::npos)
                return Verdict::reject("C3", "tags must not contain the slot token {}");
            if (new_tag == node.content)
                return Verdict::reject("C3", "new tag equals the current tag");
            for (const auto& [id, other] : tree.nodes) {
                if (other.kind == NodeKind::tag && id != spec.target && other.content == new_tag)
                    return Verdict::reject("C3", "tag \"" + new_tag +
                                                     "\" is already used by another section");
            }
            return Verdict::ok();
        }
        case 3: {
            const Node& node = tree.node(spec.target);
            if (get_str(call, 0) != node.content)
                return Verdict::reject("C3", "first argument must echo the current tag text \"" +
                                                 node.content + "\"");
            std::string styled = apply_case_style(node.content, get_str(call, 1));
            if (styled == node.content)
                return Verdict::reject("C3", "style " + get_str(call, 1) +
                                                 " does not change the tag's rendering");
            for (const auto& [id, other] : tree.nodes) {
                if (other.kind == NodeKind::tag && id != spec.target && other.content == styled)
                    return Verdict::reject("C3", "restyled tag \"" + styled +
                                                     "\" collides with another section");
            }
            return Verdict::ok();
        }
        case 4: {
            Verdict v = check_format_arg(get_str(call, 0), "new header pattern");
            if (!v.accepted) return v;
            bool footer_declared = tree.shared_format.footer.has_value();
            bool changed = get_str(call, 0) != tree.shared_format.content;
            if (footer_declared) {
                v = check_format_arg(get_str(call, 1), "new footer pattern");
                if (!v.accepted) return v;
                changed = changed || get_str(call, 1) != *tree.shared_format.footer;
            }
            if (!changed)
                return Verdict::reject("C3", "new format equals the current format");
            return Verdict::ok();
        }
        case 5: {
            if (get_str(call, 0) != spec.target)
                return Verdict::reject("C3", "first argument must echo the node id \"" +
                                                 spec.target + "\"");
            const Node& node = tree.node(spec.target);
            const std::string& next = get_str(call, 1);
            std::string why;
            if (!delimiter_in_whitelist(next, policy, &why)) return Verdict::reject("C3", why);
            if (next == node.content)
                return Verdict::reject("C3", "new delimiter equals the current delimiter");
            return Verdict::ok();
        }
        default:
            return Verdict::reject("C3", "unknown operation kind");
    }
}

Verdict validate_op_call(const OpCall& call, const OpSpec& spec, const MetaTemplate& mt,
                         EmbeddingClient& client, const ValidationPolicy& policy) {
    Verdict v = check_arguments(call, spec);
    if (!v.accepted) return v;
    v = check_description(call, spec, mt, policy);
    if (!v.accepted) return v;
    if (spec.kind == 1) {
        const Node& node = mt.tree.node(spec.target);
        return check_semantics(node.content, std::get<std::string>(call.args[1]), client, policy);
    }
    return Verdict::ok();
}

}  // namespace promptmut
