#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "promptmut/clients.hpp"
#include "promptmut/eval_harness.hpp"
#include "promptmut/mutator_loop.hpp"
#include "promptmut/validation.hpp"

namespace promptmut {

struct ModelSpec {
    std::string model_id;
    std::string family;
};

struct OracleConfig {
    std::string type = "exact";  // exact | normalized | command | replay
    bool trim = true;
    bool case_insensitive = true;
    std::vector<std::string> command;
    int timeout_s = 30;
    std::string verdicts_path;  // replay oracle transcript
};

// One client slot of the config: a real HTTP endpoint, a replay transcript, or
// (embeddings only) the deterministic stub.
struct ClientSlot {
    std::string type;  // "http", "replay", "stub"
    HttpClientConfig http;
    std::string transcript_path;
};

struct RunConfig {
    std::string task_id;
    std::string meta_template_path;
    int threshold = 100;
    std::uint64_t seed = 0;
    int concurrency = 1;
    MetricKind metric{"accuracy", 1};
    SamplingParams sampling;
    DecodeParams mutator_decode;
    std::vector<ModelSpec> models;
    std::string instances_path;
    ClientSlot mutator{"replay", {}, ""};
    ClientSlot inference{"replay", {}, ""};
    ClientSlot embedding{"stub", {}, ""};
    OracleConfig oracle;
    ValidationPolicy validation;
    LoopBudget budget;
    std::string answer_tag_node;           // postprocess adapter; empty = generic
    std::string anova_observations_path;   // optional analyze input
};

RunConfig parse_run_config(const json& doc, const std::filesystem::path& config_dir);
json serialize_run_config(const RunConfig& config);

std::vector<TaskInstance> load_instances(const std::filesystem::path& path);

// Layout under runs/<run_id>/: config.json, pool/*.json, lineage.jsonl,
// records.jsonl, metrics.json, analysis.json, report/*.csv, manifest.json.
// Completed artifacts are hash-pinned in the manifest; the manifest itself is
// replaced atomically. records.jsonl is append-only while the run stage is
// open and rewritten sorted on completion.
class RunStore {
public:
    RunStore(std::filesystem::path runs_root, std::string run_id);

    const std::filesystem::path& dir() const { return dir_; }
    const std::string& run_id() const { return run_id_; }
    bool exists() const;

    void init(const RunConfig& config);  // creates the layout and the manifest
    RunConfig load_config() const;

    void write_pool(const Pool& pool);
    Pool load_pool() const;

    void append_transcript(const std::vector<LoopEvent>& events);
    std::vector<json> load_transcript() const;

    void append_records(const std::vector<EvalRecord>& records);
    // allow_partial tolerates an interrupted append (torn tail dropped) and a
    // missing file; otherwise gaps raise CorruptStore via hash verification.
    std::vector<EvalRecord> load_records(bool allow_partial) const;
    // Rewrites an in-progress records file (resume drops incomplete cells)
    // without pinning its hash; appends may continue afterwards.
    void rewrite_partial_records(const std::vector<EvalRecord>& records);
    void finalize_records(std::vector<EvalRecord> records);  // sort, rewrite, pin hash

    void write_metrics(const json& metrics);
    json load_metrics() const;
    void write_analysis(const json& analysis);
    json load_analysis() const;
    void write_top_level(const std::string& filename, const std::string& bytes);
    void write_report_file(const std::string& filename, const std::string& bytes);

    json manifest() const;
    bool stage_done(const std::string& stage) const;
    void mark_stage(const std::string& stage);

private:
    void write_manifest(const json& m) const;
    void pin_hash(const std::string& relpath);
    void verify_hash(const std::string& relpath) const;
    std::filesystem::path path_of(const std::string& relpath) const;

    std::filesystem::path dir_;
    std::string run_id_;
};

}  // namespace promptmut
