#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

#include "promptmut/clients.hpp"
#include "promptmut/mutation_ops.hpp"

namespace promptmut::mock {

// Scripted stand-in for the mutator model. It reads everything it needs out of
// the prompt itself (operation name, signature, and the current component
// state embedded in the description), so it carries no shadow copy of the pool
// and stays valid no matter which member or operation the loop draws.
class ScriptedMutator : public MutatorClient {
public:
    std::string complete(const std::string& prompt, const DecodeParams&) override {
        ++calls_;
        const bool refinement = prompt.rfind("Below, you are provided with the text component", 0) == 0;
        std::string spec = spec_line(prompt, refinement);
        std::string name = spec.substr(0, spec.find('('));
        std::string desc = spec.substr(spec.find("): ") + 3);

        if (refinement) return refine(prompt, desc);
        if (name == "paraphrase_text") return paraphrase_text(desc);
        if (name == "paraphrase_tag") return paraphrase_tag(desc);
        if (name == "change_tag_case") return change_tag_case(desc);
        if (name == "change_format") return change_format(desc);
        if (name == "change_delimiter") return change_delimiter(desc);
        throw std::runtime_error("scripted mutator: unsupported operation " + name);
    }

    int calls() const { return calls_; }

private:
    // Between the fixed request framing; the description itself may span lines.
    static std::string spec_line(const std::string& prompt, bool refinement) {
        const std::string head = "The operation you are required to apply is:\n";
        const std::string tail = refinement ? "\nDo not include any extra information"
                                            : "\nPlease apply this operation only once.";
        std::size_t begin = prompt.find(head);
        std::size_t end = prompt.rfind(tail);
        if (begin == std::string::npos || end == std::string::npos)
            throw std::runtime_error("scripted mutator: prompt framing not recognized");
        begin += head.size();
        return prompt.substr(begin, end - begin);
    }

    static std::string slice(const std::string& text, const std::string& after,
                             const std::string& before) {
        std::size_t begin = text.find(after);
        if (begin == std::string::npos)
            throw std::runtime_error("scripted mutator: marker missing: " + after);
        begin += after.size();
        std::size_t end = text.find(before, begin);
        if (end == std::string::npos)
            throw std::runtime_error("scripted mutator: marker missing: " + before);
        return text.substr(begin, end - begin);
    }

    static std::string quote(const std::string& s) {
        std::string out = "'";
        for (unsigned char c : s) {
            switch (c) {
                case '\'': out += "\\'"; break;
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
        return out + "'";
    }

    std::string paraphrase_text(const std::string& desc) {
        std::string id = slice(desc, "text node with id \"", "\"");
        const std::string marker = "The node currently reads:\n";
        std::string content = desc.substr(desc.find(marker) + marker.size());
        std::string rewritten = content + " (take " + std::to_string(++counter_) + ")";
        return "paraphrase_text(" + quote(id) + ", " + quote(rewritten) + ")";
    }

    std::string paraphrase_tag(const std::string& desc) {
        std::string tag = slice(desc, "currently reading \"", "\"");
        return "paraphrase_tag(" + quote(tag) + ", " + quote(tag + "V" + std::to_string(++counter_)) +
               ")";
    }

    std::string change_tag_case(const std::string& desc) {
        std::string tag = slice(desc, "currently reading \"", "\"");
        bool has_upper = false;
        for (unsigned char c : tag) has_upper |= (c >= 'A' && c <= 'Z');
        return "change_tag_case(" + quote(tag) + ", " + (has_upper ? "'lower'" : "'upper'") + ")";
    }

    std::string change_format(const std::string& desc) {
        static const char* const kWraps[][2] = {{"<", ">"}, {"(", ")"}, {"*", "*"}, {"=", "="}};
        const auto& wrap = kWraps[counter_++ % 4];
        std::string header = wrap[0] + slice(desc, "header pattern \"", "\"") + wrap[1];
        std::string out = "change_format(" + quote(header);
        if (desc.find("and the footer pattern \"") != std::string::npos)
            out += ", " + quote(wrap[0] + slice(desc, "and the footer pattern \"", "\"") + wrap[1]);
        return out + ")";
    }

    std::string change_delimiter(const std::string& desc) {
        std::string id = slice(desc, "with id \"", "\"");
        std::string repr = slice(desc, "currently reading ", " with a different separator");
        std::string current = std::get<std::string>(parse_op_call("x(" + repr + ")").args[0]);
        static const char* const kChoices[] = {"\n", " | ", "; ", "\n\n", " -- ", ", "};
        std::string next = kChoices[counter_++ % 6];
        if (next == current) next = kChoices[counter_++ % 6];
        return "change_delimiter(" + quote(id) + ", " + quote(next) + ")";
    }

    // Refinements carry the stale component plus the reason's `old` -> `new`
    // pairs; apply each substitution (or re-add a dropped marker) and answer
    // with the rewritten text.
    std::string refine(const std::string& prompt, const std::string& desc) {
        std::string id = slice(desc, "text node with id \"", "\"");
        std::string content = slice(prompt, "of a prompt.\n", "\nThere are inconsistencies");
        std::string reason = slice(prompt, "because ", ". Your task is to fix");

        std::size_t pos = 0;
        while ((pos = reason.find('`', pos)) != std::string::npos) {
            std::size_t old_end = reason.find('`', pos + 1);
            if (old_end == std::string::npos) break;
            std::string old_lit = reason.substr(pos + 1, old_end - pos - 1);
            if (reason.compare(old_end + 1, 5, " -> `") != 0) {
                pos = old_end + 1;
                continue;
            }
            std::size_t new_begin = old_end + 6;
            std::size_t new_end = reason.find('`', new_begin);
            if (new_end == std::string::npos) break;
            std::string new_lit = reason.substr(new_begin, new_end - new_begin);
            if (old_lit != new_lit && content.find(old_lit) != std::string::npos) {
                std::size_t at = 0;
                while ((at = content.find(old_lit, at)) != std::string::npos) {
                    content.replace(at, old_lit.size(), new_lit);
                    at += new_lit.size();
                }
            } else if (content.find(new_lit) == std::string::npos) {
                content += " Refer to " + new_lit + ".";
            }
            pos = new_end + 1;
        }
        return "paraphrase_text(" + quote(id) + ", " + quote(content) + ")";
    }

    int calls_ = 0;
    int counter_ = 0;
};

}  // namespace promptmut::mock
