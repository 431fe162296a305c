#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "promptmut/jsonio.hpp"

namespace promptmut {

// Sentinel node id naming the shared format node. The format node is a single
// instance referenced by every section, so it lives outside the ordinary node
// table and operations address it by this id.
inline const std::string kGlobalFormatId = "GLOBAL";

enum class NodeKind { text, format, tag, delimiter };

const char* node_kind_name(NodeKind kind);
NodeKind node_kind_from_name(const std::string& name);

// A cross-node reference carried by a text node: `literal` is the exact
// substring of the text that refers to node `node` (usually a rendered section
// header such as "[ANS]").
struct Mention {
    std::string node;
    std::string literal;

    bool operator==(const Mention&) const = default;
    bool operator<(const Mention& o) const {
        return node != o.node ? node < o.node : literal < o.literal;
    }
};

struct Node {
    std::string id;
    NodeKind kind = NodeKind::text;
    std::string content;
    // Format nodes only: the closing pattern emitted after a section's body.
    std::optional<std::string> footer;
    // Text nodes only.
    std::vector<Mention> mentions;

    bool operator==(const Node&) const = default;
};

// A top-level segment: either a plain text node or a tagged section whose
// header/footer come from the shared format node.
struct Segment {
    bool is_section = false;
    std::string text_node;               // !is_section
    std::string tag_node;                // is_section
    std::vector<std::string> body;       // is_section: ordered text node ids
    bool has_footer = false;             // is_section

    bool operator==(const Segment&) const = default;
};

struct SyntaxTree {
    std::vector<Segment> segments;
    std::vector<std::string> delimiters;  // node ids; delimiters[i] joins segments[i], segments[i+1]
    Node shared_format;                   // id == kGlobalFormatId, kind == format
    std::vector<std::string> placeholders;
    std::map<std::string, Node> nodes;    // text, tag, and delimiter nodes by id

    const Node& node(const std::string& id) const;
    bool has_node(const std::string& id) const { return nodes.count(id) > 0; }
};

enum class ArgType { string_t, enum_t, integer_t };

struct ArgSpec {
    std::string name;
    ArgType type = ArgType::string_t;
    std::vector<std::string> enum_values;  // enum_t only
};

// One entry of the operation catalog: a generic operation name (the five kinds)
// bound to a concrete target node.
struct OpSpec {
    std::string name;
    int kind = 0;            // 1..5
    std::string target;      // node id, or kGlobalFormatId for kind 4
    std::vector<ArgSpec> args;
    std::string description;
};

struct ConsistencyRule {
    std::vector<std::string> watched_nodes;  // node ids; may include kGlobalFormatId
    std::string dependent_node;              // a text node id
    std::string reason_template;             // may contain a `{changes}` slot
};

using ArgValue = std::variant<std::string, long long>;

std::string arg_value_repr(const ArgValue& v);  // Python-literal style, for reports

enum class OpOrigin { mutation, refinement };

// A validated, applied operation as recorded in a template's lineage.
struct AppliedOp {
    std::string name;
    std::string target;
    std::vector<ArgValue> args;
    OpOrigin origin = OpOrigin::mutation;
};

struct MetaTemplate {
    std::string task_id;
    SyntaxTree tree;
    std::vector<OpSpec> op_catalog;          // derived from the tree, not serialized
    std::vector<ConsistencyRule> consistency_rules;
    std::vector<AppliedOp> lineage;

    const OpSpec& find_spec(const std::string& name, const std::string& target) const;
};

// Rendered appearance of a node as other text may refer to it: a tag's header
// form (tag content inserted into the format header), its footer form when the
// template declares footers, and the raw content shared by every kind.
struct RenderedForms {
    std::string header;  // tag nodes only (empty otherwise)
    std::string footer;  // tag nodes with a declared footer
    bool has_header = false;
    bool has_footer = false;
    std::string raw;
};

std::string render_pattern(const std::string& pattern, const std::string& tag_content);
RenderedForms rendered_forms(const SyntaxTree& tree, const std::string& node_id);

MetaTemplate parse_meta_template(const json& doc);
json serialize_meta_template(const MetaTemplate& mt);  // canonical document

std::string render_template(const SyntaxTree& tree);

struct TaskInstance {
    std::string instance_id;
    std::map<std::string, std::string> slot_values;
    json judge_payload;
};

std::string instantiate_prompt(const std::string& rendered, const TaskInstance& instance);

// Distinct `{{name}}` markers appearing in a string, in first-appearance order.
std::vector<std::string> scan_placeholder_markers(const std::string& text);

// Every marker occurrence in order, duplicates included (multiset comparisons).
std::vector<std::string> scan_placeholder_occurrences(const std::string& text);

// Structural equality: string equality of canonical serializations.
bool structurally_equal(const MetaTemplate& a, const MetaTemplate& b);

// Multiset of (id, kind) pairs, the quantity preserved by every operation.
std::vector<std::pair<std::string, std::string>> node_multiset(const SyntaxTree& tree);

// Rebuilds the operation catalog for a tree (kind-major, then tree order).
std::vector<OpSpec> build_op_catalog(const SyntaxTree& tree);

}  // namespace promptmut
