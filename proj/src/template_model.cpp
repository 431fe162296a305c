#include "promptmut/template_model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "promptmut/errors.hpp"

namespace promptmut {

namespace {

bool is_ident_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}

bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9');
}

// Counts non-overlapping occurrences of the two-character slot token `{}`.
std::size_t count_slot_tokens(const std::string& s) {
    std::size_t count = 0, pos = 0;
    while ((pos = s.find("{}", pos)) != std::string::npos) {
        ++count;
        pos += 2;
    }
    return count;
}

void check_format_pattern(const std::string& pattern, const std::string& what) {
    if (count_slot_tokens(pattern) != 1)
        throw InvariantError("format " + what + " must contain the slot token {} exactly once");
}

// Scans `text` from `pos` for a placeholder marker `{{name}}`. On success
// returns true and sets name/end (index one past the closing braces).
bool match_marker(const std::string& text, std::size_t pos, std::string* name, std::size_t* end) {
    if (pos + 4 > text.size() || text[pos] != '{' || text[pos + 1] != '{') return false;
    std::size_t i = pos + 2;
    if (i >= text.size() || !is_ident_start(text[i])) return false;
    std::size_t start = i;
    while (i < text.size() && is_ident_char(text[i])) ++i;
    if (i + 2 > text.size() || text[i] != '}' || text[i + 1] != '}') return false;
    *name = text.substr(start, i - start);
    *end = i + 2;
    return true;
}

const std::vector<std::string>& case_styles() {
    static const std::vector<std::string> styles = {"upper", "lower", "title", "capitalize-first"};
    return styles;
}

// Node ids referenced by segments, in tree order (top-level text nodes, section
// tags, section bodies), used both for validation and catalog construction.
struct TreeOrder {
    std::vector<std::string> text_nodes;
    std::vector<std::string> tag_nodes;
};

TreeOrder tree_order(const SyntaxTree& tree) {
    TreeOrder order;
    for (const Segment& seg : tree.segments) {
        if (!seg.is_section) {
            order.text_nodes.push_back(seg.text_node);
        } else {
            order.tag_nodes.push_back(seg.tag_node);
            for (const std::string& id : seg.body) order.text_nodes.push_back(id);
        }
    }
    return order;
}

std::string quote_id(const std::string& s) {
    return "\"" + s + "\"";
}

}  // namespace

const char* node_kind_name(NodeKind kind) {
    switch (kind) {
        case NodeKind::text: return "text";
        case NodeKind::format: return "format";
        case NodeKind::tag: return "tag";
        case NodeKind::delimiter: return "delimiter";
    }
    return "text";
}

NodeKind node_kind_from_name(const std::string& name) {
    if (name == "text") return NodeKind::text;
    if (name == "format") return NodeKind::format;
    if (name == "tag") return NodeKind::tag;
    if (name == "delimiter") return NodeKind::delimiter;
    throw SchemaError("unknown node kind: " + name);
}

const Node& SyntaxTree::node(const std::string& id) const {
    if (id == kGlobalFormatId) return shared_format;
    auto it = nodes.find(id);
    if (it == nodes.end()) throw UnknownNodeError("no node with id " + quote_id(id));
    return it->second;
}

std::string arg_value_repr(const ArgValue& v) {
    if (std::holds_alternative<long long>(v)) return std::to_string(std::get<long long>(v));
    const std::string& s = std::get<std::string>(v);
    std::string out = "\"";
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\x%02x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    out += "\"";
    return out;
}

std::string render_pattern(const std::string& pattern, const std::string& tag_content) {
    std::size_t pos = pattern.find("{}");
    if (pos == std::string::npos) return pattern;
    return pattern.substr(0, pos) + tag_content + pattern.substr(pos + 2);
}

RenderedForms rendered_forms(const SyntaxTree& tree, const std::string& node_id) {
    const Node& n = tree.node(node_id);
    RenderedForms forms;
    forms.raw = n.content;
    if (n.kind == NodeKind::tag) {
        forms.has_header = true;
        forms.header = render_pattern(tree.shared_format.content, n.content);
        if (tree.shared_format.footer) {
            forms.has_footer = true;
            forms.footer = render_pattern(*tree.shared_format.footer, n.content);
        }
    }
    return forms;
}

std::vector<std::string> scan_placeholder_markers(const std::string& text) {
    std::vector<std::string> names;
    std::set<std::string> seen;
    std::size_t pos = 0;
    while (pos + 1 < text.size()) {
        std::string name;
        std::size_t end;
        if (match_marker(text, pos, &name, &end)) {
            if (seen.insert(name).second) names.push_back(name);
            pos = end;
        } else {
            ++pos;
        }
    }
    return names;
}

std::vector<std::string> scan_placeholder_occurrences(const std::string& text) {
    std::vector<std::string> names;
    std::size_t pos = 0;
    while (pos + 1 < text.size()) {
        std::string name;
        std::size_t end;
        if (match_marker(text, pos, &name, &end)) {
            names.push_back(name);
            pos = end;
        } else {
            ++pos;
        }
    }
    return names;
}

std::vector<OpSpec> build_op_catalog(const SyntaxTree& tree) {
    std::vector<OpSpec> catalog;
    TreeOrder order = tree_order(tree);

    for (const std::string& id : order.text_nodes) {
        OpSpec spec;
        spec.name = "paraphrase_text";
        spec.kind = 1;
        spec.target = id;
        spec.args = {{"node", ArgType::string_t, {}}, {"new_text", ArgType::string_t, {}}};
        spec.description =
            "Rewrite the content of the text node with id " + quote_id(id) +
            ", preserving its meaning, every {{placeholder}} marker, and any references to "
            "section headers. Pass the node id " + quote_id(id) +
            " as the first argument and the full replacement text as the second. The node "
            "currently reads:\n" + tree.node(id).content;
        catalog.push_back(std::move(spec));
    }
    for (const std::string& id : order.tag_nodes) {
        OpSpec spec;
        spec.name = "paraphrase_tag";
        spec.kind = 2;
        spec.target = id;
        spec.args = {{"tag", ArgType::string_t, {}}, {"new_tag", ArgType::string_t, {}}};
        spec.description =
            "Replace the section tag currently reading " + quote_id(tree.node(id).content) +
            " with a short tag of equivalent meaning. Pass the current tag text as the first "
            "argument and the replacement as the second.";
        catalog.push_back(std::move(spec));
    }
    for (const std::string& id : order.tag_nodes) {
        OpSpec spec;
        spec.name = "change_tag_case";
        spec.kind = 3;
        spec.target = id;
        spec.args = {{"tag", ArgType::string_t, {}}, {"style", ArgType::enum_t, case_styles()}};
        spec.description =
            "Change the letter casing of the section tag currently reading " +
            quote_id(tree.node(id).content) +
            ". Pass the current tag text as the first argument and the target style as the "
            "second.";
        catalog.push_back(std::move(spec));
    }
    {
        OpSpec spec;
        spec.name = "change_format";
        spec.kind = 4;
        spec.target = kGlobalFormatId;
        spec.args = {{"header", ArgType::string_t, {}}};
        spec.description =
            "Replace the section header pattern " + quote_id(tree.shared_format.content);
        if (tree.shared_format.footer) {
            spec.args.push_back({"footer", ArgType::string_t, {}});
            spec.description += " and the footer pattern " + quote_id(*tree.shared_format.footer) +
                                ", used by every section. Pass the new header pattern first and "
                                "the new footer pattern second.";
        } else {
            spec.description += " used by every section. Pass the new header pattern.";
        }
        spec.description +=
            " Each new pattern must contain the tag slot {} exactly once plus at least one "
            "decoration character.";
        catalog.push_back(std::move(spec));
    }
    for (const std::string& id : tree.delimiters) {
        OpSpec spec;
        spec.name = "change_delimiter";
        spec.kind = 5;
        spec.target = id;
        spec.args = {{"node", ArgType::string_t, {}}, {"new_delimiter", ArgType::string_t, {}}};
        spec.description =
            "Replace the segment delimiter with id " + quote_id(id) + " currently reading " +
            arg_value_repr(ArgValue{tree.node(id).content}) +
            " with a different separator built only from whitespace and punctuation, at most 16 "
            "characters. Pass the node id " + quote_id(id) +
            " as the first argument and the new delimiter as the second.";
        catalog.push_back(std::move(spec));
    }
    return catalog;
}

const OpSpec& MetaTemplate::find_spec(const std::string& name, const std::string& target) const {
    for (const OpSpec& spec : op_catalog) {
        if (spec.name == name && spec.target == target) return spec;
    }
    throw UnknownNodeError("no catalog entry for " + name + " on " + quote_id(target));
}

namespace {

Node parse_node(const json& j) {
    if (!j.is_object()) throw SchemaError("node entries must be objects");
    if (!j.contains("id") || !j["id"].is_string()) throw SchemaError("node missing string id");
    Node n;
    n.id = j["id"].get<std::string>();
    if (n.id.empty()) throw SchemaError("node id must be non-empty");
    if (n.id == kGlobalFormatId)
        throw SchemaError("node id " + quote_id(kGlobalFormatId) + " is reserved for the format node");
    if (!j.contains("kind") || !j["kind"].is_string())
        throw SchemaError("node " + n.id + " missing kind");
    n.kind = node_kind_from_name(j["kind"].get<std::string>());
    if (n.kind == NodeKind::format)
        throw SchemaError("the format node is declared via shared_format, not nodes[]");
    if (!j.contains("content") || !j["content"].is_string())
        throw SchemaError("node " + n.id + " missing string content");
    n.content = j["content"].get<std::string>();
    if (j.contains("mentions")) {
        if (n.kind != NodeKind::text)
            throw SchemaError("node " + n.id + ": mentions are only valid on text nodes");
        if (!j["mentions"].is_array()) throw SchemaError("node " + n.id + ": mentions must be an array");
        for (const json& m : j["mentions"]) {
            if (!m.is_object() || !m.contains("node") || !m.contains("literal") ||
                !m["node"].is_string() || !m["literal"].is_string())
                throw SchemaError("node " + n.id + ": each mention needs string node and literal");
            n.mentions.push_back({m["node"].get<std::string>(), m["literal"].get<std::string>()});
        }
        std::sort(n.mentions.begin(), n.mentions.end());
    }
    return n;
}

void check_node_invariants(const Node& n) {
    switch (n.kind) {
        case NodeKind::tag:
            if (n.content.empty())
                throw InvariantError("tag node " + n.id + " must be non-empty");
            if (n.content.find('\n') != std::string::npos || n.content.find('\r') != std::string::npos)
                throw InvariantError("tag node " + n.id + " must not contain line breaks");
            break;
        case NodeKind::delimiter:
            if (n.content.empty())
                throw InvariantError("delimiter node " + n.id + " must be non-empty");
            if (n.content.find("{}") != std::string::npos)
                throw InvariantError("delimiter node " + n.id + " must not contain the slot token {}");
            break;
        default:
            break;
    }
}

ArgValue parse_arg_value(const json& j) {
    if (j.is_string()) return ArgValue{j.get<std::string>()};
    if (j.is_number_integer()) return ArgValue{j.get<long long>()};
    throw SchemaError("operation args must be strings or integers");
}

json arg_value_to_json(const ArgValue& v) {
    if (std::holds_alternative<long long>(v)) return std::get<long long>(v);
    return std::get<std::string>(v);
}

}  // namespace

MetaTemplate parse_meta_template(const json& doc) {
    if (!doc.is_object()) throw SchemaError("meta-template document must be a JSON object");
    if (!doc.contains("version") || !doc["version"].is_number_integer())
        throw SchemaError("document missing integer version");
    if (doc["version"].get<int>() != 1)
        throw SchemaError("unsupported document version " + doc["version"].dump());
    if (!doc.contains("task_id") || !doc["task_id"].is_string() ||
        doc["task_id"].get<std::string>().empty())
        throw SchemaError("document missing non-empty task_id");

    MetaTemplate mt;
    mt.task_id = doc["task_id"].get<std::string>();

    if (!doc.contains("nodes") || !doc["nodes"].is_array())
        throw SchemaError("document missing nodes array");
    for (const json& nj : doc["nodes"]) {
        Node n = parse_node(nj);
        check_node_invariants(n);
        if (!mt.tree.nodes.emplace(n.id, n).second)
            throw InvariantError("duplicate node id " + n.id);
    }

    if (!doc.contains("shared_format") || !doc["shared_format"].is_object())
        throw SchemaError("document missing shared_format object");
    const json& fmt = doc["shared_format"];
    if (!fmt.contains("header") || !fmt["header"].is_string())
        throw SchemaError("shared_format missing string header");
    mt.tree.shared_format.id = kGlobalFormatId;
    mt.tree.shared_format.kind = NodeKind::format;
    mt.tree.shared_format.content = fmt["header"].get<std::string>();
    check_format_pattern(mt.tree.shared_format.content, "header");
    if (fmt.contains("footer")) {
        if (!fmt["footer"].is_string()) throw SchemaError("shared_format footer must be a string");
        mt.tree.shared_format.footer = fmt["footer"].get<std::string>();
        check_format_pattern(*mt.tree.shared_format.footer, "footer");
    }

    if (!doc.contains("segments") || !doc["segments"].is_array() || doc["segments"].empty())
        throw SchemaError("document missing non-empty segments array");

    auto expect_node = [&](const std::string& id, NodeKind kind, const char* where) -> const Node& {
        auto it = mt.tree.nodes.find(id);
        if (it == mt.tree.nodes.end())
            throw UnknownNodeError(std::string(where) + " references unknown node " + quote_id(id));
        if (it->second.kind != kind)
            throw InvariantError(std::string(where) + " node " + quote_id(id) + " has kind " +
                                 node_kind_name(it->second.kind) + ", expected " +
                                 node_kind_name(kind));
        return it->second;
    };

    std::map<std::string, int> use_counts;
    bool expect_delimiter = false;
    for (const json& sj : doc["segments"]) {
        if (!sj.is_object() || !sj.contains("kind") || !sj["kind"].is_string())
            throw SchemaError("segment entries must be objects with a kind");
        std::string kind = sj["kind"].get<std::string>();
        if (kind == "delimiter") {
            if (!expect_delimiter)
                throw InvariantError("segments must alternate content and delimiter entries");
            if (!sj.contains("node") || !sj["node"].is_string())
                throw SchemaError("delimiter segment missing node id");
            std::string id = sj["node"].get<std::string>();
            expect_node(id, NodeKind::delimiter, "delimiter segment");
            use_counts[id]++;
            mt.tree.delimiters.push_back(id);
            expect_delimiter = false;
            continue;
        }
        if (expect_delimiter)
            throw InvariantError("segments must alternate content and delimiter entries");
        Segment seg;
        if (kind == "text") {
            if (!sj.contains("node") || !sj["node"].is_string())
                throw SchemaError("text segment missing node id");
            seg.text_node = sj["node"].get<std::string>();
            expect_node(seg.text_node, NodeKind::text, "text segment");
            use_counts[seg.text_node]++;
        } else if (kind == "section") {
            seg.is_section = true;
            if (!sj.contains("tag") || !sj["tag"].is_string())
                throw SchemaError("section segment missing tag node id");
            seg.tag_node = sj["tag"].get<std::string>();
            expect_node(seg.tag_node, NodeKind::tag, "section tag");
            use_counts[seg.tag_node]++;
            if (!sj.contains("body") || !sj["body"].is_array())
                throw SchemaError("section segment missing body array");
            for (const json& bj : sj["body"]) {
                if (!bj.is_string()) throw SchemaError("section body entries must be node ids");
                std::string id = bj.get<std::string>();
                expect_node(id, NodeKind::text, "section body");
                use_counts[id]++;
                seg.body.push_back(id);
            }
            seg.has_footer = mt.tree.shared_format.footer.has_value();
        } else {
            throw SchemaError("unknown segment kind " + quote_id(kind));
        }
        mt.tree.segments.push_back(std::move(seg));
        expect_delimiter = true;
    }
    if (!expect_delimiter)
        throw InvariantError("segments must not end with a delimiter entry");

    for (const auto& [id, node] : mt.tree.nodes) {
        int uses = use_counts.count(id) ? use_counts.at(id) : 0;
        if (uses == 0) throw InvariantError("node " + quote_id(id) + " is not referenced by any segment");
        if (uses > 1) throw InvariantError("node " + quote_id(id) + " is referenced more than once");
    }

    for (const auto& [id, node] : mt.tree.nodes) {
        for (const Mention& m : node.mentions) {
            if (!mt.tree.nodes.count(m.node))
                throw InvariantError("node " + quote_id(id) + " mentions unknown node " + quote_id(m.node));
            if (node.content.find(m.literal) == std::string::npos)
                throw InvariantError("node " + quote_id(id) + " mention literal " +
                                     arg_value_repr(ArgValue{m.literal}) +
                                     " does not occur in its content");
        }
    }

    if (!doc.contains("placeholders") || !doc["placeholders"].is_array())
        throw SchemaError("document missing placeholders array");
    std::set<std::string> declared;
    for (const json& pj : doc["placeholders"]) {
        if (!pj.is_string()) throw SchemaError("placeholders must be strings");
        std::string name = pj.get<std::string>();
        if (name.empty() || !is_ident_start(name[0]) ||
            !std::all_of(name.begin(), name.end(), is_ident_char))
            throw SchemaError("placeholder name " + quote_id(name) + " is not an identifier");
        if (!declared.insert(name).second)
            throw SchemaError("duplicate placeholder " + quote_id(name));
    }
    std::set<std::string> scanned;
    for (const auto& [id, node] : mt.tree.nodes) {
        if (node.kind != NodeKind::text) continue;
        for (const std::string& name : scan_placeholder_markers(node.content)) scanned.insert(name);
    }
    for (const std::string& name : scanned) {
        if (!declared.count(name))
            throw InvariantError("placeholder marker " + quote_id(name) + " is not declared");
    }
    for (const std::string& name : declared) {
        if (!scanned.count(name))
            throw InvariantError("declared placeholder " + quote_id(name) +
                                 " does not occur in any text node");
    }
    mt.tree.placeholders.assign(declared.begin(), declared.end());

    if (!doc.contains("consistency_rules") || !doc["consistency_rules"].is_array())
        throw SchemaError("document missing consistency_rules array");
    for (const json& rj : doc["consistency_rules"]) {
        if (!rj.is_object() || !rj.contains("watched_nodes") || !rj.contains("dependent_node") ||
            !rj.contains("reason_template"))
            throw SchemaError("consistency rules need watched_nodes, dependent_node, reason_template");
        ConsistencyRule rule;
        if (!rj["watched_nodes"].is_array() || rj["watched_nodes"].empty())
            throw InvariantError("consistency rule watched_nodes must be a non-empty array");
        for (const json& wj : rj["watched_nodes"]) {
            if (!wj.is_string()) throw SchemaError("watched_nodes entries must be node ids");
            std::string id = wj.get<std::string>();
            if (id != kGlobalFormatId && !mt.tree.nodes.count(id))
                throw UnknownNodeError("consistency rule watches unknown node " + quote_id(id));
            rule.watched_nodes.push_back(id);
        }
        std::sort(rule.watched_nodes.begin(), rule.watched_nodes.end());
        rule.watched_nodes.erase(std::unique(rule.watched_nodes.begin(), rule.watched_nodes.end()),
                                 rule.watched_nodes.end());
        if (!rj["dependent_node"].is_string())
            throw SchemaError("dependent_node must be a node id");
        rule.dependent_node = rj["dependent_node"].get<std::string>();
        auto it = mt.tree.nodes.find(rule.dependent_node);
        if (it == mt.tree.nodes.end())
            throw UnknownNodeError("consistency rule depends on unknown node " +
                                   quote_id(rule.dependent_node));
        if (it->second.kind != NodeKind::text)
            throw InvariantError("consistency rule dependent node " + quote_id(rule.dependent_node) +
                                 " must be a text node");
        if (!rj["reason_template"].is_string())
            throw SchemaError("reason_template must be a string");
        rule.reason_template = rj["reason_template"].get<std::string>();
        mt.consistency_rules.push_back(std::move(rule));
    }
    std::sort(mt.consistency_rules.begin(), mt.consistency_rules.end(),
              [](const ConsistencyRule& a, const ConsistencyRule& b) {
                  if (a.dependent_node != b.dependent_node) return a.dependent_node < b.dependent_node;
                  if (a.watched_nodes != b.watched_nodes) return a.watched_nodes < b.watched_nodes;
                  return a.reason_template < b.reason_template;
              });

    mt.op_catalog = build_op_catalog(mt.tree);

    if (!doc.contains("operations") || !doc["operations"].is_array())
        throw SchemaError("document missing operations array");
    for (const json& oj : doc["operations"]) {
        if (!oj.is_object() || !oj.contains("name") || !oj.contains("target") ||
            !oj.contains("args") || !oj.contains("origin"))
            throw SchemaError("operations entries need name, target, args, origin");
        if (!oj["name"].is_string() || !oj["target"].is_string() || !oj["origin"].is_string())
            throw SchemaError("operation name, target, and origin must be strings");
        AppliedOp op;
        op.name = oj["name"].get<std::string>();
        op.target = oj["target"].get<std::string>();
        if (op.target != kGlobalFormatId && !mt.tree.nodes.count(op.target))
            throw UnknownNodeError("operation targets unknown node " + quote_id(op.target));
        bool known = false;
        for (const OpSpec& spec : mt.op_catalog) {
            if (spec.name == op.name && spec.target == op.target) known = true;
        }
        if (!known) throw SchemaError("operation " + op.name + " has no catalog entry for target " +
                                      quote_id(op.target));
        if (!oj["args"].is_array()) throw SchemaError("operation args must be an array");
        for (const json& aj : oj["args"]) op.args.push_back(parse_arg_value(aj));
        std::string origin = oj["origin"].get<std::string>();
        if (origin == "mutation") op.origin = OpOrigin::mutation;
        else if (origin == "refinement") op.origin = OpOrigin::refinement;
        else throw SchemaError("operation origin must be mutation or refinement");
        mt.lineage.push_back(std::move(op));
    }

    return mt;
}

json serialize_meta_template(const MetaTemplate& mt) {
    json doc;
    doc["version"] = 1;
    doc["task_id"] = mt.task_id;

    json nodes = json::array();
    for (const auto& [id, node] : mt.tree.nodes) {
        json nj;
        nj["id"] = node.id;
        nj["kind"] = node_kind_name(node.kind);
        nj["content"] = node.content;
        if (!node.mentions.empty()) {
            std::vector<Mention> sorted = node.mentions;
            std::sort(sorted.begin(), sorted.end());
            json mj = json::array();
            for (const Mention& m : sorted) mj.push_back({{"node", m.node}, {"literal", m.literal}});
            nj["mentions"] = std::move(mj);
        }
        nodes.push_back(std::move(nj));
    }
    doc["nodes"] = std::move(nodes);

    json fmt;
    fmt["header"] = mt.tree.shared_format.content;
    if (mt.tree.shared_format.footer) fmt["footer"] = *mt.tree.shared_format.footer;
    doc["shared_format"] = std::move(fmt);

    json segments = json::array();
    for (std::size_t i = 0; i < mt.tree.segments.size(); ++i) {
        const Segment& seg = mt.tree.segments[i];
        if (seg.is_section) {
            segments.push_back({{"kind", "section"}, {"tag", seg.tag_node}, {"body", seg.body}});
        } else {
            segments.push_back({{"kind", "text"}, {"node", seg.text_node}});
        }
        if (i + 1 < mt.tree.segments.size())
            segments.push_back({{"kind", "delimiter"}, {"node", mt.tree.delimiters[i]}});
    }
    doc["segments"] = std::move(segments);

    doc["placeholders"] = mt.tree.placeholders;

    json rules = json::array();
    for (const ConsistencyRule& rule : mt.consistency_rules) {
        rules.push_back({{"watched_nodes", rule.watched_nodes},
                         {"dependent_node", rule.dependent_node},
                         {"reason_template", rule.reason_template}});
    }
    doc["consistency_rules"] = std::move(rules);

    json ops = json::array();
    for (const AppliedOp& op : mt.lineage) {
        json args = json::array();
        for (const ArgValue& v : op.args) args.push_back(arg_value_to_json(v));
        ops.push_back({{"name", op.name},
                       {"target", op.target},
                       {"args", std::move(args)},
                       {"origin", op.origin == OpOrigin::mutation ? "mutation" : "refinement"}});
    }
    doc["operations"] = std::move(ops);

    return doc;
}

std::string render_template(const SyntaxTree& tree) {
    std::string out;
    for (std::size_t i = 0; i < tree.segments.size(); ++i) {
        const Segment& seg = tree.segments[i];
        if (!seg.is_section) {
            out += tree.node(seg.text_node).content;
        } else {
            const std::string& tag = tree.node(seg.tag_node).content;
            out += render_pattern(tree.shared_format.content, tag);
            for (const std::string& id : seg.body) out += tree.node(id).content;
            if (seg.has_footer && tree.shared_format.footer)
                out += render_pattern(*tree.shared_format.footer, tag);
        }
        if (i + 1 < tree.segments.size()) out += tree.node(tree.delimiters[i]).content;
    }
    return out;
}

std::string instantiate_prompt(const std::string& rendered, const TaskInstance& instance) {
    std::string out;
    out.reserve(rendered.size());
    std::size_t pos = 0;
    while (pos < rendered.size()) {
        std::string name;
        std::size_t end;
        if (rendered[pos] == '{' && match_marker(rendered, pos, &name, &end)) {
            auto it = instance.slot_values.find(name);
            if (it == instance.slot_values.end())
                throw MissingSlotError("no value for slot " + quote_id(name));
            out += it->second;
            pos = end;
        } else {
            out += rendered[pos];
            ++pos;
        }
    }
    return out;
}

bool structurally_equal(const MetaTemplate& a, const MetaTemplate& b) {
    return canonical_dump(serialize_meta_template(a)) == canonical_dump(serialize_meta_template(b));
}

std::vector<std::pair<std::string, std::string>> node_multiset(const SyntaxTree& tree) {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back(kGlobalFormatId, node_kind_name(NodeKind::format));
    for (const auto& [id, node] : tree.nodes) out.emplace_back(id, node_kind_name(node.kind));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace promptmut
