#include <doctest.h>

#include <filesystem>

#include "promptmut/errors.hpp"
#include "promptmut/mutation_ops.hpp"

using namespace promptmut;

namespace {

json load_doc(const std::string& name) {
    return parse_json_file(std::filesystem::path(PROMPTMUT_ASSETS_DIR) / "templates" / name);
}

MetaTemplate cruxeval() { return parse_meta_template(load_doc("cruxeval_i.json")); }

OpCall call_of(const std::string& text) { return parse_op_call(text); }

}  // namespace

TEST_CASE("parse_op_call extracts a single Python-style call") {
    OpCall c = call_of("paraphrase_text(\"intro\", \"Shorter instructions.\")");
    CHECK(c.name == "paraphrase_text");
    REQUIRE(c.args.size() == 2);
    CHECK(std::get<std::string>(c.args[0]) == "intro");
    CHECK(std::get<std::string>(c.args[1]) == "Shorter instructions.");
    CHECK_FALSE(c.is_bare(0));
    CHECK_FALSE(c.is_bare(1));
}

TEST_CASE("parse_op_call ignores surrounding prose and fences") {
    OpCall c = call_of(
        "Sure, applying the operation now.\n"
        "```python\nchange_tag_case(\"ANS\", lower)\n```\n"
        "That changes the tag.");
    CHECK(c.name == "change_tag_case");
    REQUIRE(c.args.size() == 2);
    CHECK(std::get<std::string>(c.args[1]) == "lower");
    CHECK_FALSE(c.is_bare(0));
    CHECK(c.is_bare(1));  // bare identifiers are only legal for enum parameters
}

TEST_CASE("parse_op_call handles escapes, quotes, and integers") {
    OpCall c = call_of("op('a\\nb\\t\\\\', \"q\\\"inner\\\"\", -12, '\\x41\\u00e9')");
    REQUIRE(c.args.size() == 4);
    CHECK(std::get<std::string>(c.args[0]) == "a\nb\t\\");
    CHECK(std::get<std::string>(c.args[1]) == "q\"inner\"");
    CHECK(std::get<long long>(c.args[2]) == -12);
    CHECK(std::get<std::string>(c.args[3]) == "A\u00e9");
}

TEST_CASE("parse_op_call failure modes") {
    CHECK_THROWS_AS(call_of("no call here"), ParseError);
    CHECK_THROWS_AS(call_of("a(1) and also b(2)"), ParseError);
    CHECK_THROWS_AS(call_of("op(\"unterminated)"), ParseError);
    CHECK_THROWS_AS(call_of("op(\"literal\nwith raw newline\")"), ParseError);
    CHECK_THROWS_AS(call_of("op(1.5)"), ParseError);
    CHECK_THROWS_AS(call_of("op(42abc)"), ParseError);
    CHECK_THROWS_AS(call_of("op(1,)"), ParseError);
    // A nested call invalidates the outer candidate; the inner one still parses.
    OpCall inner = call_of("outer(inner(1))");
    CHECK(inner.name == "inner");
    CHECK(std::get<long long>(inner.args[0]) == 1);
}

TEST_CASE("render_op_call round-trips through the parser") {
    std::vector<ArgValue> args{std::string("tag_ans"), std::string("line1\nline2"),
                               static_cast<long long>(-3)};
    std::string text = render_op_call("some_op", args);
    OpCall c = call_of(text);
    CHECK(c.name == "some_op");
    CHECK(c.args == args);
}

TEST_CASE("case styles follow the catalog semantics") {
    CHECK(apply_case_style("answer tag", "upper") == "ANSWER TAG");
    CHECK(apply_case_style("ANSWER", "lower") == "answer");
    CHECK(apply_case_style("my-tag name", "title") == "My-Tag Name");
    CHECK(apply_case_style("mIxEd CASE", "capitalize-first") == "Mixed case");
    CHECK_THROWS_AS(apply_case_style("x", "snake"), DomainError);
}

TEST_CASE("resolve_spec uses the identifying first argument") {
    MetaTemplate mt = cruxeval();
    CHECK(resolve_spec(mt, call_of("paraphrase_text(\"py_body\", \"x\")")).target == "py_body");
    CHECK(resolve_spec(mt, call_of("change_delimiter(\"d1\", \"---\")")).target == "d1");
    CHECK(resolve_spec(mt, call_of("change_format(\"<{}>\", \"</{}>\")")).target ==
          kGlobalFormatId);
    // Tag operations address the tag by its current text, not by node id.
    CHECK(resolve_spec(mt, call_of("paraphrase_tag(\"ANS\", \"RESULT\")")).target == "tag_ans");
    CHECK(resolve_spec(mt, call_of("change_tag_case(\"PY\", lower)")).target == "tag_py");
    CHECK_THROWS_AS(resolve_spec(mt, call_of("paraphrase_tag(\"NOPE\", \"X\")")),
                    UnknownNodeError);
    CHECK_THROWS_AS(resolve_spec(mt, call_of("frobnicate(\"intro\", \"x\")")), UnknownNodeError);
}

TEST_CASE("ambiguous tag text cannot be resolved") {
    json doc = load_doc("cruxeval_i.json");
    for (json& nj : doc["nodes"]) {
        if (nj["id"] == "tag_py") nj["content"] = "ANS";  // now two tags read ANS
    }
    MetaTemplate mt = parse_meta_template(doc);
    CHECK_THROWS_AS(resolve_spec(mt, call_of("paraphrase_tag(\"ANS\", \"OUT\")")),
                    InvariantError);
}

TEST_CASE("apply_operation preserves the node multiset and extends the lineage") {
    MetaTemplate before = cruxeval();
    MetaTemplate after = apply_operation(
        before, call_of("paraphrase_text(\"py_body\", \"\\n# {{code}}\\n\")"));
    CHECK(node_multiset(after.tree) == node_multiset(before.tree));
    CHECK(render_template(after.tree) != render_template(before.tree));
    REQUIRE(after.lineage.size() == 1);
    CHECK(after.lineage.back().name == "paraphrase_text");
    CHECK(after.lineage.back().target == "py_body");
    CHECK(before.lineage.empty());  // purity: the input template is untouched
    CHECK(before.tree.node("py_body").content == "\n{{code}}\n");
}

TEST_CASE("paraphrasing a text node re-points its mentions when possible") {
    MetaTemplate mt = cruxeval();
    MetaTemplate kept = apply_operation(
        mt, call_of("paraphrase_text(\"intro\", \"Run the function; answer in [ANS].\")"));
    REQUIRE(kept.tree.node("intro").mentions.size() == 1);
    CHECK(kept.tree.node("intro").mentions[0].literal == "[ANS]");

    MetaTemplate lost = apply_operation(
        mt, call_of("paraphrase_text(\"intro\", \"Run the function; answer below.\")"));
    // No current form occurs in the new text: the stale literal is kept so the
    // inconsistency stays detectable.
    REQUIRE(lost.tree.node("intro").mentions.size() == 1);
    CHECK(lost.tree.node("intro").mentions[0].literal == "[ANS]");
    CHECK_FALSE(check_consistency(lost).empty());
}

TEST_CASE("operation application is rejected when the render does not change") {
    MetaTemplate mt = cruxeval();
    CHECK_THROWS_AS(apply_operation(mt, call_of("paraphrase_text(\"ans_body\", \"\\n\")")),
                    NoOpError);
    CHECK_THROWS_AS(apply_operation(mt, call_of("change_tag_case(\"ANS\", upper)")), NoOpError);
}

TEST_CASE("change_format requires the footer argument when a footer is declared") {
    MetaTemplate mt = cruxeval();
    CHECK_THROWS_AS(apply_operation(mt, call_of("change_format(\"<{}>\")")), DomainError);
    MetaTemplate after = apply_operation(mt, call_of("change_format(\"<{}>\", \"</{}>\")"));
    std::string rendered = render_template(after.tree);
    CHECK(rendered.find("<PY>") != std::string::npos);
    CHECK(rendered.find("</ANS>") != std::string::npos);
}

TEST_CASE("tag rename leaves a detectable stale mention and a refinement fixes it") {
    MetaTemplate before = cruxeval();
    OpCall rename = call_of("paraphrase_tag(\"ANS\", \"RESULT\")");
    MetaTemplate after = apply_operation(before, rename);

    std::vector<Inconsistency> found = detect_inconsistencies(before, after, rename);
    REQUIRE(found.size() == 1);
    REQUIRE(found[0].stale_literals.size() == 1);
    CHECK(found[0].rule.dependent_node == "intro");
    CHECK(found[0].stale_literals[0].old_literal == "[ANS]");
    CHECK(found[0].stale_literals[0].new_literal == "[RESULT]");
    CHECK(found[0].reason.find("`[ANS]` -> `[RESULT]`") != std::string::npos);

    MetaTemplate fixed = apply_operation(
        after, call_of("paraphrase_text(\"intro\", \"You are given a Python function and an "
                       "input. Execute the function on the given input and write the output you "
                       "get in the [RESULT] section.\")"));
    CHECK(detect_inconsistencies(before, fixed, rename).empty());
    CHECK(check_consistency(fixed).empty());
    CHECK(fixed.tree.node("intro").mentions[0].literal == "[RESULT]");
}

TEST_CASE("format changes are watched through the GLOBAL id") {
    MetaTemplate before = cruxeval();
    OpCall fmt = call_of("change_format(\"<{}>\", \"</{}>\")");
    MetaTemplate after = apply_operation(before, fmt);
    std::vector<Inconsistency> found = detect_inconsistencies(before, after, fmt);
    REQUIRE(found.size() == 1);
    CHECK(found[0].stale_literals[0].old_literal == "[ANS]");
    CHECK(found[0].stale_literals[0].new_literal == "<ANS>");  // header-form match
}

TEST_CASE("operations outside the watched set trigger no rules") {
    MetaTemplate before = cruxeval();
    OpCall op = call_of("paraphrase_tag(\"PY\", \"CODE\")");
    MetaTemplate after = apply_operation(before, op);
    CHECK(detect_inconsistencies(before, after, op).empty());
    CHECK(check_consistency(after).empty());
}

TEST_CASE("reason templates without a slot get the change list appended") {
    json doc = load_doc("cruxeval_i.json");
    doc["consistency_rules"][0]["reason_template"] = "the referenced section markers changed";
    MetaTemplate before = parse_meta_template(doc);
    OpCall rename = call_of("paraphrase_tag(\"ANS\", \"OUT\")");
    MetaTemplate after = apply_operation(before, rename);
    std::vector<Inconsistency> found = detect_inconsistencies(before, after, rename);
    REQUIRE(found.size() == 1);
    CHECK(found[0].reason == "the referenced section markers changed: `[ANS]` -> `[OUT]`");
}
