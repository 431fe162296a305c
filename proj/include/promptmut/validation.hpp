#pragma once

#include <optional>
#include <string>
#include <vector>

#include "promptmut/mutation_ops.hpp"
#include "promptmut/template_model.hpp"

namespace promptmut {

struct ValidationPolicy {
    double similarity_threshold = 0.85;
    int word_count_gate = 10;          // C2 applies only above this many words
    std::size_t max_delimiter_len = 16;
};

class EmbeddingClient {
public:
    virtual ~EmbeddingClient() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
};

// Deterministic offline embedder: L2-normalized term-frequency vector over
// lowercased alphanumeric tokens, bucketed by FNV-1a into a fixed dimension.
// Disjoint vocabularies give cosine 0 (absent bucket collisions), identical
// texts give 1.
class StubEmbedder : public EmbeddingClient {
public:
    static constexpr std::size_t kDimension = 4096;
    std::vector<double> embed(const std::string& text) override;
    static std::vector<std::string> tokenize(const std::string& text);
};

struct Verdict {
    bool accepted = false;
    std::string condition;  // "C1", "C2", or "C3" when rejected
    std::string detail;
    std::optional<double> similarity;  // set when C2 actually ran

    static Verdict ok() { return {true, "", "", std::nullopt}; }
    static Verdict reject(std::string cond, std::string why) {
        return {false, std::move(cond), std::move(why), std::nullopt};
    }
};

// C1: argument count and literal types against the operation signature.
Verdict check_arguments(const OpCall& call, const OpSpec& spec);

double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v);

int word_count(const std::string& text);

// C2: semantic similarity for text paraphrases. Texts whose original is at or
// under the word gate pass unchecked; otherwise cosine of the embeddings must
// reach the policy threshold.
Verdict check_semantics(const std::string& old_text, const std::string& new_text,
                        EmbeddingClient& client, const ValidationPolicy& policy);

// C3: per-kind description rules (identifier echo, real-change requirements,
// format/delimiter shape constraints, placeholder and mention preservation).
Verdict check_description(const OpCall& call, const OpSpec& spec, const MetaTemplate& mt,
                          const ValidationPolicy& policy = {});

bool delimiter_in_whitelist(const std::string& s, const ValidationPolicy& policy,
                            std::string* why);

// Full gate in the contractual order C1 -> C3 -> C2, short-circuiting; the
// embedder is only consulted when C1 and C3 both pass.
Verdict validate_op_call(const OpCall& call, const OpSpec& spec, const MetaTemplate& mt,
                         EmbeddingClient& client, const ValidationPolicy& policy);

}  // namespace promptmut
