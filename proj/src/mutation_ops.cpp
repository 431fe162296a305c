#include "promptmut/mutation_ops.hpp"

#include <algorithm>
#include <cctype>

#include "promptmut/errors.hpp"

namespace promptmut {

namespace {

bool is_ident_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}

bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9');
}

// Bare identifiers may carry hyphens so enum members like capitalize-first
// can be written unquoted.
bool is_bare_ident_char(char c) {
    return is_ident_char(c) || c == '-';
}

void append_utf8(std::string& out, unsigned int cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

struct Scanner {
    const std::string& s;
    std::size_t pos = 0;

    bool eof() const { return pos >= s.size(); }
    char peek() const { return s[pos]; }

    void skip_ws() {
        while (!eof() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\n' || s[pos] == '\r'))
            ++pos;
    }

    bool parse_string(std::string* out) {
        char quote = s[pos];
        ++pos;
        std::string value;
        while (true) {
            if (eof()) return false;
            char c = s[pos];
            if (c == quote) {
                ++pos;
                *out = std::move(value);
                return true;
            }
            if (c == '\n' || c == '\r') return false;  // raw newline not allowed in a literal
            if (c == '\\') {
                ++pos;
                if (eof()) return false;
                char e = s[pos++];
                switch (e) {
                    case 'n': value += '\n'; break;
                    case 't': value += '\t'; break;
                    case 'r': value += '\r'; break;
                    case '\\': value += '\\'; break;
                    case '\'': value += '\''; break;
                    case '"': value += '"'; break;
                    case '0': value += '\0'; break;
                    case 'a': value += '\a'; break;
                    case 'b': value += '\b'; break;
                    case 'f': value += '\f'; break;
                    case 'v': value += '\v'; break;
                    case 'x': {
                        if (pos + 2 > s.size()) return false;
                        int hi = hex_digit(s[pos]), lo = hex_digit(s[pos + 1]);
                        if (hi < 0 || lo < 0) return false;
                        value += static_cast<char>(hi * 16 + lo);
                        pos += 2;
                        break;
                    }
                    case 'u': {
                        if (pos + 4 > s.size()) return false;
                        unsigned int cp = 0;
                        for (int i = 0; i < 4; ++i) {
                            int d = hex_digit(s[pos + i]);
                            if (d < 0) return false;
                            cp = cp * 16 + static_cast<unsigned int>(d);
                        }
                        pos += 4;
                        append_utf8(value, cp);
                        break;
                    }
                    default:
                        return false;  // unknown escape
                }
                continue;
            }
            value += c;
            ++pos;
        }
    }

    bool parse_integer(long long* out) {
        std::size_t start = pos;
        if (!eof() && s[pos] == '-') ++pos;
        std::size_t digits = pos;
        while (!eof() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos == digits) return false;
        if (!eof() && (is_bare_ident_char(s[pos]) || s[pos] == '.')) return false;
        *out = std::stoll(s.substr(start, pos - start));
        return true;
    }

    bool parse_literal(ArgValue* out, bool* bare) {
        char c = s[pos];
        *bare = false;
        if (c == '"' || c == '\'') {
            std::string v;
            if (!parse_string(&v)) return false;
            *out = ArgValue{std::move(v)};
            return true;
        }
        if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
            long long v;
            if (!parse_integer(&v)) return false;
            *out = ArgValue{v};
            return true;
        }
        if (is_ident_start(c)) {
            std::size_t start = pos;
            while (!eof() && is_bare_ident_char(s[pos])) ++pos;
            if (!eof() && s[pos] == '(') return false;  // nested call, not a literal
            *out = ArgValue{s.substr(start, pos - start)};
            *bare = true;
            return true;
        }
        return false;
    }

    // Attempts `name ( args )` starting at an identifier; pos must be at an
    // identifier start. On success, pos is one past the closing parenthesis.
    bool parse_call(std::string* name, std::vector<ArgValue>* args, std::vector<bool>* bare) {
        std::size_t start = pos;
        while (!eof() && is_ident_char(s[pos])) ++pos;
        *name = s.substr(start, pos - start);
        skip_ws();
        if (eof() || s[pos] != '(') return false;
        ++pos;
        skip_ws();
        if (!eof() && s[pos] == ')') {
            ++pos;
            return true;
        }
        while (true) {
            skip_ws();
            if (eof()) return false;
            ArgValue v;
            bool b = false;
            if (!parse_literal(&v, &b)) return false;
            args->push_back(std::move(v));
            bare->push_back(b);
            skip_ws();
            if (eof()) return false;
            if (s[pos] == ',') {
                ++pos;
                continue;
            }
            if (s[pos] == ')') {
                ++pos;
                return true;
            }
            return false;
        }
    }
};

std::string changes_summary(const std::vector<StaleLiteral>& stale) {
    std::string out;
    for (std::size_t i = 0; i < stale.size(); ++i) {
        if (i) out += ", ";
        out += "`" + stale[i].old_literal + "` -> `" + stale[i].new_literal + "`";
    }
    return out;
}

std::string render_reason(const std::string& reason_template, const std::string& changes) {
    std::string out;
    std::size_t pos = reason_template.find("{changes}");
    if (pos == std::string::npos) return reason_template + ": " + changes;
    out = reason_template;
    while ((pos = out.find("{changes}")) != std::string::npos)
        out = out.substr(0, pos) + changes + out.substr(pos + 9);
    return out;
}

// Ordered candidate forms a mention literal can take for a node.
struct FormSet {
    std::vector<std::pair<std::string, std::string>> forms;  // (label, text)
};

FormSet forms_of(const SyntaxTree& tree, const std::string& node_id) {
    RenderedForms rf = rendered_forms(tree, node_id);
    FormSet fs;
    if (rf.has_header) fs.forms.emplace_back("header", rf.header);
    if (rf.has_footer) fs.forms.emplace_back("footer", rf.footer);
    fs.forms.emplace_back("raw", rf.raw);
    return fs;
}

bool matches_any(const FormSet& fs, const std::string& literal) {
    return std::any_of(fs.forms.begin(), fs.forms.end(),
                       [&](const auto& f) { return f.second == literal; });
}

std::string expected_new_literal(const FormSet& before, const FormSet& after,
                                 const std::string& literal) {
    for (const auto& [label, text] : before.forms) {
        if (text != literal) continue;
        for (const auto& [alabel, atext] : after.forms) {
            if (alabel == label) return atext;
        }
    }
    return after.forms.front().second;  // unrecognized form: fall back to the primary one
}

}  // namespace

std::string render_op_call(const std::string& name, const std::vector<ArgValue>& args) {
    std::string out = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += arg_value_repr(args[i]);
    }
    out += ")";
    return out;
}

OpCall parse_op_call(const std::string& response) {
    std::vector<OpCall> candidates;
    std::size_t pos = 0;
    while (pos < response.size()) {
        if (!is_ident_start(response[pos]) ||
            (pos > 0 && is_ident_char(response[pos - 1]))) {
            ++pos;
            continue;
        }
        Scanner sc{response, pos};
        OpCall call;
        if (sc.parse_call(&call.name, &call.args, &call.bare)) {
            candidates.push_back(std::move(call));
            pos = sc.pos;
        } else {
            ++pos;
        }
    }
    if (candidates.empty()) throw ParseError("no function call found in response");
    if (candidates.size() > 1) throw ParseError("multiple function calls found in response");
    return std::move(candidates[0]);
}

std::string apply_case_style(const std::string& s, const std::string& style) {
    auto lower = [](unsigned char c) { return static_cast<char>(std::tolower(c)); };
    auto upper = [](unsigned char c) { return static_cast<char>(std::toupper(c)); };
    std::string out = s;
    if (style == "upper") {
        std::transform(out.begin(), out.end(), out.begin(), upper);
    } else if (style == "lower") {
        std::transform(out.begin(), out.end(), out.begin(), lower);
    } else if (style == "title") {
        bool prev_alpha = false;
        for (char& c : out) {
            bool alpha = std::isalpha(static_cast<unsigned char>(c)) != 0;
            if (alpha) c = prev_alpha ? lower(c) : upper(c);
            prev_alpha = alpha;
        }
    } else if (style == "capitalize-first") {
        std::transform(out.begin(), out.end(), out.begin(), lower);
        if (!out.empty()) out[0] = upper(out[0]);
    } else {
        throw DomainError("unknown case style " + style);
    }
    return out;
}

namespace {

std::string string_arg(const OpCall& call, std::size_t idx) {
    if (idx >= call.args.size() || !std::holds_alternative<std::string>(call.args[idx]))
        throw DomainError("argument " + std::to_string(idx) + " of " + call.name +
                          " must be a string");
    return std::get<std::string>(call.args[idx]);
}

const OpSpec* find_entry(const MetaTemplate& mt, const std::string& name,
                         const std::string& target) {
    for (const OpSpec& spec : mt.op_catalog) {
        if (spec.name == name && spec.target == target) return &spec;
    }
    return nullptr;
}

}  // namespace

const OpSpec& resolve_spec(const MetaTemplate& mt, const OpCall& call) {
    if (call.name == "change_format") {
        const OpSpec* spec = find_entry(mt, call.name, kGlobalFormatId);
        if (!spec) throw UnknownNodeError("no change_format entry in catalog");
        return *spec;
    }
    if (call.name == "paraphrase_text" || call.name == "change_delimiter") {
        std::string target = string_arg(call, 0);
        const OpSpec* spec = find_entry(mt, call.name, target);
        if (!spec)
            throw UnknownNodeError("no catalog entry for " + call.name + " on node \"" + target +
                                   "\"");
        return *spec;
    }
    if (call.name == "paraphrase_tag" || call.name == "change_tag_case") {
        std::string tag_text = string_arg(call, 0);
        const OpSpec* found = nullptr;
        for (const OpSpec& spec : mt.op_catalog) {
            if (spec.name != call.name) continue;
            if (mt.tree.node(spec.target).content != tag_text) continue;
            if (found)
                throw InvariantError("tag text \"" + tag_text + "\" is ambiguous across sections");
            found = &spec;
        }
        if (!found)
            throw UnknownNodeError("no section tag currently reads \"" + tag_text + "\"");
        return *found;
    }
    throw UnknownNodeError("unknown operation name " + call.name);
}

namespace {

// After a text node's content is replaced, re-point each mention at whichever
// current form of the referenced node the new text actually uses. When no
// current form appears, the old literal is kept (the C3 gate guarantees it
// still occurs), which leaves the mention detectably stale.
void update_mentions(Node& node, const SyntaxTree& tree) {
    for (Mention& m : node.mentions) {
        FormSet fs = forms_of(tree, m.node);
        for (const auto& [label, text] : fs.forms) {
            if (!text.empty() && node.content.find(text) != std::string::npos) {
                m.literal = text;
                break;
            }
        }
    }
    std::sort(node.mentions.begin(), node.mentions.end());
}

}  // namespace

MetaTemplate apply_operation(const MetaTemplate& mt, const OpCall& call) {
    const OpSpec& spec = resolve_spec(mt, call);
    MetaTemplate out = mt;
    std::string before_render = render_template(mt.tree);

    switch (spec.kind) {
        case 1: {
            std::string new_text = string_arg(call, 1);
            Node& node = out.tree.nodes.at(spec.target);
            node.content = new_text;
            update_mentions(node, out.tree);
            break;
        }
        case 2: {
            std::string new_tag = string_arg(call, 1);
            out.tree.nodes.at(spec.target).content = new_tag;
            break;
        }
        case 3: {
            std::string style = string_arg(call, 1);
            Node& node = out.tree.nodes.at(spec.target);
            node.content = apply_case_style(node.content, style);
            break;
        }
        case 4: {
            out.tree.shared_format.content = string_arg(call, 0);
            if (out.tree.shared_format.footer) {
                if (call.args.size() < 2)
                    throw DomainError("change_format requires a footer pattern here");
                out.tree.shared_format.footer = string_arg(call, 1);
            }
            break;
        }
        case 5: {
            out.tree.nodes.at(spec.target).content = string_arg(call, 1);
            break;
        }
        default:
            throw DomainError("unknown operation kind");
    }

    if (render_template(out.tree) == before_render)
        throw NoOpError(call.name + " left the rendered template unchanged");

    out.op_catalog = build_op_catalog(out.tree);
    out.lineage.push_back({call.name, spec.target, call.args, call.origin});
    return out;
}

namespace {

std::vector<Inconsistency> scan_rules(const MetaTemplate& current,
                                      const SyntaxTree* before_tree,
                                      const std::string* touched) {
    std::vector<Inconsistency> found;
    for (const ConsistencyRule& rule : current.consistency_rules) {
        if (touched &&
            std::find(rule.watched_nodes.begin(), rule.watched_nodes.end(), *touched) ==
                rule.watched_nodes.end())
            continue;
        const Node& dep = current.tree.node(rule.dependent_node);
        std::vector<StaleLiteral> stale;
        for (const Mention& m : dep.mentions) {
            FormSet now = forms_of(current.tree, m.node);
            if (matches_any(now, m.literal)) {
                // The literal is current, but the text must still carry it: a
                // paraphrase that dropped the reference is inconsistent too.
                if (dep.content.find(m.literal) == std::string::npos) {
                    stale.push_back({m.node, m.literal, m.literal});
                }
                continue;
            }
            FormSet before = before_tree ? forms_of(*before_tree, m.node) : now;
            stale.push_back({m.node, m.literal, expected_new_literal(before, now, m.literal)});
        }
        if (stale.empty()) continue;
        Inconsistency inc;
        inc.rule = rule;
        inc.stale_literals = std::move(stale);
        inc.reason = render_reason(rule.reason_template, changes_summary(inc.stale_literals));
        found.push_back(std::move(inc));
    }
    return found;
}

}  // namespace

std::vector<Inconsistency> detect_inconsistencies(const MetaTemplate& before,
                                                  const MetaTemplate& after,
                                                  const OpCall& call) {
    std::string touched = resolve_spec(before, call).target;
    return scan_rules(after, &before.tree, &touched);
}

std::vector<Inconsistency> check_consistency(const MetaTemplate& mt) {
    return scan_rules(mt, nullptr, nullptr);
}

}  // namespace promptmut
