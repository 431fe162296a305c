#include <doctest.h>

#include <filesystem>

#include "promptmut/errors.hpp"
#include "promptmut/template_model.hpp"

using namespace promptmut;

namespace {

std::filesystem::path asset(const std::string& rel) {
    return std::filesystem::path(PROMPTMUT_ASSETS_DIR) / rel;
}

json load_doc(const std::string& name) {
    return parse_json_file(asset("templates/" + name));
}

const std::vector<std::string> kCorpus = {
    "cruxeval_i.json",     "cruxeval_o.json",       "testeval_line.json",
    "coderujb_defect.json", "coderujb_testgen.json", "minimal.json",
};

}  // namespace

TEST_CASE("cruxeval_i reconstruction renders the expected prompt skeleton") {
    MetaTemplate mt = parse_meta_template(load_doc("cruxeval_i.json"));
    CHECK(render_template(mt.tree) ==
          "You are given a Python function and an input. Execute the function on the given input "
          "and write the output you get in the [ANS] section.\n"
          "[PY]\n{{code}}\n[\\PY]\n[ANS]\n[\\ANS]");
}

TEST_CASE("parse -> serialize -> parse is a fixed point across the corpus") {
    for (const std::string& name : kCorpus) {
        CAPTURE(name);
        std::string bytes = read_file(asset("templates/" + name));
        MetaTemplate mt = parse_meta_template(json::parse(bytes));
        std::string canonical = canonical_dump(serialize_meta_template(mt));
        CHECK(canonical == bytes);  // corpus files are stored canonically
        MetaTemplate reparsed = parse_meta_template(json::parse(canonical));
        CHECK(canonical_dump(serialize_meta_template(reparsed)) == canonical);
        CHECK(structurally_equal(mt, reparsed));
    }
}

TEST_CASE("renders are placeholder-stable and instantiation is one-pass") {
    MetaTemplate mt = parse_meta_template(load_doc("cruxeval_i.json"));
    std::string rendered = render_template(mt.tree);

    TaskInstance inst;
    inst.instance_id = "i0";
    inst.slot_values["code"] = "print('{{code}} stays literal')";
    std::string prompt = instantiate_prompt(rendered, inst);
    // The inserted value is not rescanned: the marker it contains survives.
    CHECK(prompt.find("print('{{code}} stays literal')") != std::string::npos);
    CHECK(prompt.find("\n[PY]\nprint(") != std::string::npos);

    TaskInstance empty;
    empty.instance_id = "i1";
    CHECK_THROWS_AS(instantiate_prompt(rendered, empty), MissingSlotError);
}

TEST_CASE("placeholder scanning distinguishes markers from occurrences") {
    std::string text = "{{a}} then {{b}} then {{a}} and {not-a-marker} {{9bad}}";
    CHECK(scan_placeholder_markers(text) == std::vector<std::string>{"a", "b"});
    CHECK(scan_placeholder_occurrences(text) == std::vector<std::string>{"a", "b", "a"});
}

TEST_CASE("node lookup resolves GLOBAL to the shared format node") {
    MetaTemplate mt = parse_meta_template(load_doc("cruxeval_i.json"));
    CHECK(mt.tree.node(kGlobalFormatId).kind == NodeKind::format);
    CHECK(mt.tree.node(kGlobalFormatId).content == "[{}]");
    CHECK_THROWS_AS(mt.tree.node("nope"), UnknownNodeError);
}

TEST_CASE("rendered forms cover header, footer, and raw content") {
    MetaTemplate mt = parse_meta_template(load_doc("cruxeval_i.json"));
    RenderedForms tag = rendered_forms(mt.tree, "tag_ans");
    CHECK(tag.has_header);
    CHECK(tag.header == "[ANS]");
    CHECK(tag.has_footer);
    CHECK(tag.footer == "[\\ANS]");
    CHECK(tag.raw == "ANS");

    RenderedForms text = rendered_forms(mt.tree, "intro");
    CHECK_FALSE(text.has_header);
    CHECK(text.raw == mt.tree.node("intro").content);
}

TEST_CASE("render_pattern substitutes exactly the first slot token") {
    CHECK(render_pattern("[{}]", "ANS") == "[ANS]");
    CHECK(render_pattern("{{}}:", "VERDICT") == "{VERDICT}:");
    CHECK(render_pattern("¿¡!{{}}¡¿?", "T") ==
          "¿¡!{T}¡¿?");
}

TEST_CASE("footer-less formats render sections without closing markers") {
    MetaTemplate mt = parse_meta_template(load_doc("coderujb_defect.json"));
    std::string rendered = render_template(mt.tree);
    CHECK(rendered.find("{CODE}:") != std::string::npos);
    CHECK(rendered.find("{VERDICT}:") != std::string::npos);
    CHECK(rendered.find("\\") == std::string::npos);
    for (const Segment& seg : mt.tree.segments) {
        if (seg.is_section) CHECK_FALSE(seg.has_footer);
    }
}

TEST_CASE("operation catalog is kind-major in tree order") {
    MetaTemplate mt = parse_meta_template(load_doc("cruxeval_i.json"));
    std::vector<std::pair<int, std::string>> got;
    for (const OpSpec& spec : mt.op_catalog) got.emplace_back(spec.kind, spec.target);
    std::vector<std::pair<int, std::string>> want = {
        {1, "intro"}, {1, "py_body"}, {1, "ans_body"},   // texts in tree order
        {2, "tag_py"}, {2, "tag_ans"},                   // tags
        {3, "tag_py"}, {3, "tag_ans"},
        {4, kGlobalFormatId},
        {5, "d1"}, {5, "d2"},
    };
    CHECK(got == want);

    const OpSpec& fmt = mt.find_spec("change_format", kGlobalFormatId);
    REQUIRE(fmt.args.size() == 2);  // footer declared, so both patterns are arguments
    CHECK(fmt.args[0].name == "header");
    CHECK(fmt.args[1].name == "footer");

    const OpSpec& cc = mt.find_spec("change_tag_case", "tag_ans");
    REQUIRE(cc.args.size() == 2);
    CHECK(cc.args[1].type == ArgType::enum_t);
    CHECK(cc.args[1].enum_values ==
          std::vector<std::string>{"upper", "lower", "title", "capitalize-first"});

    MetaTemplate nofooter = parse_meta_template(load_doc("coderujb_defect.json"));
    CHECK(nofooter.find_spec("change_format", kGlobalFormatId).args.size() == 1);
}

TEST_CASE("node multiset includes the shared format node") {
    MetaTemplate mt = parse_meta_template(load_doc("minimal.json"));
    auto ms = node_multiset(mt.tree);
    CHECK(ms == std::vector<std::pair<std::string, std::string>>{
                    {"GLOBAL", "format"}, {"body", "text"}});
}

TEST_CASE("schema violations are rejected with typed errors") {
    json base = load_doc("cruxeval_i.json");

    SUBCASE("wrong version") {
        json doc = base;
        doc["version"] = 2;
        CHECK_THROWS_AS(parse_meta_template(doc), SchemaError);
    }
    SUBCASE("format node smuggled into nodes[]") {
        json doc = base;
        doc["nodes"].push_back({{"id", "fmt"}, {"kind", "format"}, {"content", "[{}]"}});
        CHECK_THROWS_AS(parse_meta_template(doc), SchemaError);
    }
    SUBCASE("reserved GLOBAL id") {
        json doc = base;
        doc["nodes"].push_back({{"id", "GLOBAL"}, {"kind", "text"}, {"content", "x"}});
        CHECK_THROWS_AS(parse_meta_template(doc), SchemaError);
    }
    SUBCASE("duplicate node id") {
        json doc = base;
        doc["nodes"].push_back({{"id", "intro"}, {"kind", "text"}, {"content", "x"}});
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("mentions on a non-text node") {
        json doc = base;
        for (json& nj : doc["nodes"]) {
            if (nj["id"] == "tag_py") nj["mentions"] = json::array({{{"node", "intro"}, {"literal", "PY"}}});
        }
        CHECK_THROWS_AS(parse_meta_template(doc), SchemaError);
    }
    SUBCASE("mention literal absent from content") {
        json doc = base;
        for (json& nj : doc["nodes"]) {
            if (nj["id"] == "intro") nj["mentions"][0]["literal"] = "[NOPE]";
        }
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("header without a slot token") {
        json doc = base;
        doc["shared_format"]["header"] = "[]";
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("header with two slot tokens") {
        json doc = base;
        doc["shared_format"]["header"] = "{}{}";
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("tag content with a line break") {
        json doc = base;
        for (json& nj : doc["nodes"]) {
            if (nj["id"] == "tag_py") nj["content"] = "P\nY";
        }
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("delimiter containing the slot token") {
        json doc = base;
        for (json& nj : doc["nodes"]) {
            if (nj["id"] == "d1") nj["content"] = "-{}-";
        }
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("segments starting with a delimiter") {
        json doc = base;
        json segs = json::array();
        segs.push_back({{"kind", "delimiter"}, {"node", "d1"}});
        for (const json& s : doc["segments"]) segs.push_back(s);
        doc["segments"] = segs;
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("adjacent content segments without a delimiter") {
        json doc = base;
        json segs = json::array();
        for (const json& s : doc["segments"]) {
            if (s["kind"] != "delimiter") segs.push_back(s);
        }
        doc["segments"] = segs;
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("trailing delimiter") {
        json doc = base;
        doc["nodes"].push_back({{"id", "d3"}, {"kind", "delimiter"}, {"content", "\n"}});
        doc["segments"].push_back({{"kind", "delimiter"}, {"node", "d3"}});
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("node never referenced by a segment") {
        json doc = base;
        doc["nodes"].push_back({{"id", "orphan"}, {"kind", "text"}, {"content", "x"}});
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("node referenced twice") {
        json doc = base;
        doc["nodes"].push_back({{"id", "d3"}, {"kind", "delimiter"}, {"content", "\n"}});
        doc["segments"].push_back({{"kind", "delimiter"}, {"node", "d3"}});
        doc["segments"].push_back({{"kind", "text"}, {"node", "intro"}});
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("undeclared placeholder in a text node") {
        json doc = base;
        doc["placeholders"] = json::array({"code", "extra"});
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("marker present but not declared") {
        json doc = base;
        doc["placeholders"] = json::array();
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
    SUBCASE("consistency rule watching an unknown node") {
        json doc = base;
        doc["consistency_rules"][0]["watched_nodes"] = json::array({"nope"});
        CHECK_THROWS_AS(parse_meta_template(doc), UnknownNodeError);
    }
    SUBCASE("consistency rule with a non-text dependent") {
        json doc = base;
        doc["consistency_rules"][0]["dependent_node"] = "tag_ans";
        CHECK_THROWS_AS(parse_meta_template(doc), InvariantError);
    }
}
