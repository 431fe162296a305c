#include "promptmut/store.hpp"

#include <algorithm>
#include <fstream>

#include "promptmut/errors.hpp"

namespace promptmut {

namespace fs = std::filesystem;

namespace {

constexpr int kSchemaVersion = 1;

void require_version(const json& doc, const std::string& what) {
    if (!doc.is_object() || !doc.contains("schema_version") ||
        !doc["schema_version"].is_number_integer() ||
        doc["schema_version"].get<int>() != kSchemaVersion) {
        throw SchemaError(what + ": unsupported or missing schema_version");
    }
}

std::string resolve_path(const std::string& p, const fs::path& base) {
    if (p.empty()) return p;
    fs::path fp(p);
    if (fp.is_absolute()) return fp.string();
    return (base / fp).lexically_normal().string();
}

std::string get_string(const json& j, const std::string& key, const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) throw ConfigError("config field '" + key + "' must be a string");
    return j[key].get<std::string>();
}

double get_number(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError("config field '" + key + "' must be a number");
    return j[key].get<double>();
}

long long get_integer(const json& j, const std::string& key, long long fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) {
        throw ConfigError("config field '" + key + "' must be an integer");
    }
    return j[key].get<long long>();
}

bool get_bool(const json& j, const std::string& key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError("config field '" + key + "' must be a boolean");
    return j[key].get<bool>();
}

ClientSlot parse_client_slot(const json& j, const std::string& slot_name,
                             const std::string& default_type, const fs::path& base) {
    ClientSlot slot;
    slot.type = default_type;
    if (j.is_null()) return slot;
    if (!j.is_object()) throw ConfigError("config field '" + slot_name + "' must be an object");
    slot.type = get_string(j, "type", default_type);
    if (slot.type == "http") {
        slot.http.base_url = get_string(j, "base_url", "");
        slot.http.model = get_string(j, "model", "");
        slot.http.api_key_env = get_string(j, "api_key_env", "");
        slot.http.retries = static_cast<int>(get_integer(j, "retries", slot.http.retries));
        slot.http.timeout_s = static_cast<int>(get_integer(j, "timeout_s", slot.http.timeout_s));
        if (slot.http.base_url.empty()) {
            throw ConfigError(slot_name + ": http client requires base_url");
        }
    } else if (slot.type == "replay") {
        slot.transcript_path = resolve_path(get_string(j, "transcript", ""), base);
    } else if (slot.type == "stub") {
        if (slot_name != "embedding") {
            throw ConfigError(slot_name + ": stub is only available for embeddings");
        }
    } else {
        throw ConfigError(slot_name + ": unknown client type '" + slot.type + "'");
    }
    return slot;
}

json serialize_client_slot(const ClientSlot& slot) {
    json j;
    j["type"] = slot.type;
    if (slot.type == "http") {
        j["base_url"] = slot.http.base_url;
        j["model"] = slot.http.model;
        j["api_key_env"] = slot.http.api_key_env;
        j["retries"] = slot.http.retries;
        j["timeout_s"] = slot.http.timeout_s;
    } else if (slot.type == "replay") {
        j["transcript"] = slot.transcript_path;
    }
    return j;
}

}  // namespace

RunConfig parse_run_config(const json& doc, const fs::path& config_dir) {
    require_version(doc, "run config");
    RunConfig cfg;
    cfg.task_id = get_string(doc, "task_id", "");
    if (cfg.task_id.empty()) throw ConfigError("run config requires task_id");
    cfg.meta_template_path = resolve_path(get_string(doc, "meta_template", ""), config_dir);
    if (cfg.meta_template_path.empty()) throw ConfigError("run config requires meta_template");
    cfg.instances_path = resolve_path(get_string(doc, "instances", ""), config_dir);
    cfg.threshold = static_cast<int>(get_integer(doc, "threshold", cfg.threshold));
    cfg.seed = static_cast<std::uint64_t>(get_integer(doc, "seed", 0));
    cfg.concurrency = static_cast<int>(get_integer(doc, "concurrency", cfg.concurrency));
    if (cfg.concurrency < 1) throw ConfigError("concurrency must be >= 1");

    if (doc.contains("metric")) {
        const json& m = doc["metric"];
        if (!m.is_object()) throw ConfigError("config field 'metric' must be an object");
        cfg.metric.kind = get_string(m, "kind", "accuracy");
        cfg.metric.k = static_cast<int>(get_integer(m, "k", 1));
        if (cfg.metric.kind != "accuracy" && cfg.metric.kind != "pass_at_k" &&
            cfg.metric.kind != "mean_pass_rate") {
            throw ConfigError("unknown metric kind '" + cfg.metric.kind + "'");
        }
    }
    if (doc.contains("sampling")) {
        const json& s = doc["sampling"];
        if (!s.is_object()) throw ConfigError("config field 'sampling' must be an object");
        cfg.sampling.temperature = get_number(s, "temperature", cfg.sampling.temperature);
        cfg.sampling.max_new_tokens =
            static_cast<int>(get_integer(s, "max_new_tokens", cfg.sampling.max_new_tokens));
        cfg.sampling.num_generations =
            static_cast<int>(get_integer(s, "num_generations", cfg.sampling.num_generations));
        if (cfg.sampling.num_generations < 1) throw ConfigError("num_generations must be >= 1");
    }
    if (doc.contains("mutator_decode")) {
        const json& d = doc["mutator_decode"];
        if (!d.is_object()) throw ConfigError("config field 'mutator_decode' must be an object");
        cfg.mutator_decode.temperature = get_number(d, "temperature", cfg.mutator_decode.temperature);
        cfg.mutator_decode.max_new_tokens = static_cast<int>(
            get_integer(d, "max_new_tokens", cfg.mutator_decode.max_new_tokens));
    }
    if (doc.contains("models")) {
        if (!doc["models"].is_array()) throw ConfigError("config field 'models' must be an array");
        for (const json& mj : doc["models"]) {
            if (!mj.is_object()) throw ConfigError("each model entry must be an object");
            ModelSpec spec;
            spec.model_id = get_string(mj, "model_id", "");
            spec.family = get_string(mj, "family", "");
            if (spec.model_id.empty()) throw ConfigError("model entry requires model_id");
            if (spec.family.empty()) spec.family = spec.model_id;
            cfg.models.push_back(std::move(spec));
        }
    }
    cfg.mutator = parse_client_slot(doc.contains("mutator") ? doc["mutator"] : json(),
                                    "mutator", "replay", config_dir);
    cfg.inference = parse_client_slot(doc.contains("inference") ? doc["inference"] : json(),
                                      "inference", "replay", config_dir);
    cfg.embedding = parse_client_slot(doc.contains("embedding") ? doc["embedding"] : json(),
                                      "embedding", "stub", config_dir);
    if (doc.contains("oracle")) {
        const json& o = doc["oracle"];
        if (!o.is_object()) throw ConfigError("config field 'oracle' must be an object");
        cfg.oracle.type = get_string(o, "type", cfg.oracle.type);
        if (cfg.oracle.type != "exact" && cfg.oracle.type != "normalized" &&
            cfg.oracle.type != "command" && cfg.oracle.type != "replay") {
            throw ConfigError("unknown oracle type '" + cfg.oracle.type + "'");
        }
        cfg.oracle.trim = get_bool(o, "trim", cfg.oracle.trim);
        cfg.oracle.case_insensitive = get_bool(o, "case_insensitive", cfg.oracle.case_insensitive);
        cfg.oracle.timeout_s = static_cast<int>(get_integer(o, "timeout_s", cfg.oracle.timeout_s));
        if (o.contains("command")) {
            if (!o["command"].is_array()) throw ConfigError("oracle command must be an array");
            for (const json& c : o["command"]) {
                if (!c.is_string()) throw ConfigError("oracle command entries must be strings");
                cfg.oracle.command.push_back(c.get<std::string>());
            }
        }
        cfg.oracle.verdicts_path = resolve_path(get_string(o, "verdicts", ""), config_dir);
    }
    if (doc.contains("validation")) {
        const json& v = doc["validation"];
        if (!v.is_object()) throw ConfigError("config field 'validation' must be an object");
        cfg.validation.similarity_threshold =
            get_number(v, "similarity_threshold", cfg.validation.similarity_threshold);
        cfg.validation.word_count_gate =
            static_cast<int>(get_integer(v, "word_count_gate", cfg.validation.word_count_gate));
        cfg.validation.max_delimiter_len = static_cast<std::size_t>(get_integer(
            v, "max_delimiter_len", static_cast<long long>(cfg.validation.max_delimiter_len)));
    }
    if (doc.contains("budget")) {
        const json& b = doc["budget"];
        if (!b.is_object()) throw ConfigError("config field 'budget' must be an object");
        cfg.budget.max_iterations =
            static_cast<int>(get_integer(b, "max_iterations", cfg.budget.max_iterations));
        cfg.budget.max_refinement_rounds = static_cast<int>(
            get_integer(b, "max_refinement_rounds", cfg.budget.max_refinement_rounds));
    }
    cfg.budget.rng_seed = cfg.seed;
    if (doc.contains("adapter")) {
        const json& a = doc["adapter"];
        if (!a.is_object()) throw ConfigError("config field 'adapter' must be an object");
        cfg.answer_tag_node = get_string(a, "answer_tag", "");
    }
    if (doc.contains("anova")) {
        const json& a = doc["anova"];
        if (!a.is_object()) throw ConfigError("config field 'anova' must be an object");
        cfg.anova_observations_path = resolve_path(get_string(a, "observations", ""), config_dir);
    }
    return cfg;
}

json serialize_run_config(const RunConfig& cfg) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["task_id"] = cfg.task_id;
    j["meta_template"] = cfg.meta_template_path;
    j["instances"] = cfg.instances_path;
    j["threshold"] = cfg.threshold;
    j["seed"] = cfg.seed;
    j["concurrency"] = cfg.concurrency;
    j["metric"] = json{{"kind", cfg.metric.kind}, {"k", cfg.metric.k}};
    j["sampling"] = json{{"temperature", cfg.sampling.temperature},
                         {"max_new_tokens", cfg.sampling.max_new_tokens},
                         {"num_generations", cfg.sampling.num_generations}};
    j["mutator_decode"] = json{{"temperature", cfg.mutator_decode.temperature},
                               {"max_new_tokens", cfg.mutator_decode.max_new_tokens}};
    json models = json::array();
    for (const ModelSpec& m : cfg.models) {
        models.push_back(json{{"model_id", m.model_id}, {"family", m.family}});
    }
    j["models"] = models;
    j["mutator"] = serialize_client_slot(cfg.mutator);
    j["inference"] = serialize_client_slot(cfg.inference);
    j["embedding"] = serialize_client_slot(cfg.embedding);
    json oracle;
    oracle["type"] = cfg.oracle.type;
    oracle["trim"] = cfg.oracle.trim;
    oracle["case_insensitive"] = cfg.oracle.case_insensitive;
    oracle["timeout_s"] = cfg.oracle.timeout_s;
    if (!cfg.oracle.command.empty()) oracle["command"] = cfg.oracle.command;
    if (!cfg.oracle.verdicts_path.empty()) oracle["verdicts"] = cfg.oracle.verdicts_path;
    j["oracle"] = oracle;
    j["validation"] = json{{"similarity_threshold", cfg.validation.similarity_threshold},
                           {"word_count_gate", cfg.validation.word_count_gate},
                           {"max_delimiter_len", cfg.validation.max_delimiter_len}};
    j["budget"] = json{{"max_iterations", cfg.budget.max_iterations},
                       {"max_refinement_rounds", cfg.budget.max_refinement_rounds}};
    if (!cfg.answer_tag_node.empty()) j["adapter"] = json{{"answer_tag", cfg.answer_tag_node}};
    if (!cfg.anova_observations_path.empty()) {
        j["anova"] = json{{"observations", cfg.anova_observations_path}};
    }
    return j;
}

std::vector<TaskInstance> load_instances(const fs::path& path) {
    std::vector<TaskInstance> out;
    for (const json& row : read_jsonl(path)) {
        require_version(row, "instance row");
        TaskInstance inst;
        inst.instance_id = get_string(row, "instance_id", "");
        if (inst.instance_id.empty()) throw SchemaError("instance row requires instance_id");
        if (row.contains("slot_values")) {
            if (!row["slot_values"].is_object()) {
                throw SchemaError("instance slot_values must be an object");
            }
            for (const auto& [k, v] : row["slot_values"].items()) {
                if (!v.is_string()) throw SchemaError("slot value for '" + k + "' must be a string");
                inst.slot_values[k] = v.get<std::string>();
            }
        }
        inst.judge_payload = row.contains("judge_payload") ? row["judge_payload"] : json::object();
        out.push_back(std::move(inst));
    }
    return out;
}

RunStore::RunStore(fs::path runs_root, std::string run_id)
    : dir_(runs_root / run_id), run_id_(std::move(run_id)) {
    if (run_id_.empty()) throw ConfigError("run id must be non-empty");
}

bool RunStore::exists() const { return fs::exists(dir_ / "manifest.json"); }

fs::path RunStore::path_of(const std::string& relpath) const { return dir_ / relpath; }

void RunStore::init(const RunConfig& config) {
    fs::create_directories(dir_ / "pool");
    fs::create_directories(dir_ / "report");
    json cfg = serialize_run_config(config);
    atomic_write_file(path_of("config.json"), canonical_dump(cfg));
    json m;
    m["schema_version"] = kSchemaVersion;
    m["run_id"] = run_id_;
    m["task_id"] = config.task_id;
    m["seed"] = config.seed;
    m["config_hash"] = fnv1a64_hex(canonical_dump(cfg));
    m["stages"] = json::object();
    m["files"] = json{{"config.json", fnv1a64_hex(canonical_dump(cfg))}};
    write_manifest(m);
}

RunConfig RunStore::load_config() const {
    verify_hash("config.json");
    return parse_run_config(parse_json_file(path_of("config.json")), dir_);
}

void RunStore::write_manifest(const json& m) const {
    atomic_write_file(path_of("manifest.json"), canonical_dump(m));
}

json RunStore::manifest() const {
    if (!exists()) throw CorruptStoreError("missing manifest for run '" + run_id_ + "'");
    json m = parse_json_file(path_of("manifest.json"));
    require_version(m, "manifest");
    return m;
}

void RunStore::pin_hash(const std::string& relpath) {
    json m = manifest();
    m["files"][relpath] = fnv1a64_hex(read_file(path_of(relpath)));
    write_manifest(m);
}

void RunStore::verify_hash(const std::string& relpath) const {
    json m = manifest();
    if (!m["files"].contains(relpath)) {
        throw CorruptStoreError("artifact '" + relpath + "' is not recorded in the manifest");
    }
    if (!fs::exists(path_of(relpath))) {
        throw CorruptStoreError("artifact '" + relpath + "' is missing on disk");
    }
    std::string actual = fnv1a64_hex(read_file(path_of(relpath)));
    std::string expected = m["files"][relpath].get<std::string>();
    if (actual != expected) {
        throw CorruptStoreError("artifact '" + relpath + "' hash mismatch (expected " + expected +
                                ", got " + actual + ")");
    }
}

bool RunStore::stage_done(const std::string& stage) const {
    json m = manifest();
    return m["stages"].contains(stage) && m["stages"][stage].is_boolean() &&
           m["stages"][stage].get<bool>();
}

void RunStore::mark_stage(const std::string& stage) {
    json m = manifest();
    if (fs::exists(path_of("lineage.jsonl")) && !m["files"].contains("lineage.jsonl")) {
        m["files"]["lineage.jsonl"] = fnv1a64_hex(read_file(path_of("lineage.jsonl")));
    }
    m["stages"][stage] = true;
    write_manifest(m);
}

void RunStore::write_pool(const Pool& pool) {
    json m = manifest();
    for (std::size_t i = 0; i < pool.members.size(); ++i) {
        std::string rel = "pool/" + template_id_for_index(i) + ".json";
        std::string bytes = canonical_dump(serialize_meta_template(pool.members[i]));
        atomic_write_file(path_of(rel), bytes);
        m["files"][rel] = fnv1a64_hex(bytes);
    }
    m["pool_size"] = pool.members.size();
    m["threshold"] = pool.threshold;
    write_manifest(m);
}

Pool RunStore::load_pool() const {
    json m = manifest();
    if (!m.contains("pool_size") || !m["pool_size"].is_number_integer()) {
        throw CorruptStoreError("manifest has no pool for run '" + run_id_ + "'");
    }
    Pool pool;
    pool.threshold = m.contains("threshold") ? m["threshold"].get<int>() : 0;
    std::size_t n = m["pool_size"].get<std::size_t>();
    for (std::size_t i = 0; i < n; ++i) {
        std::string rel = "pool/" + template_id_for_index(i) + ".json";
        verify_hash(rel);
        pool.members.push_back(parse_meta_template(parse_json_file(path_of(rel))));
    }
    return pool;
}

void RunStore::append_transcript(const std::vector<LoopEvent>& events) {
    for (const LoopEvent& e : events) {
        append_jsonl_line(path_of("lineage.jsonl"), e.to_json());
    }
}

std::vector<json> RunStore::load_transcript() const {
    json m = manifest();
    if (m["files"].contains("lineage.jsonl")) verify_hash("lineage.jsonl");
    if (!fs::exists(path_of("lineage.jsonl"))) return {};
    std::vector<json> rows = read_jsonl(path_of("lineage.jsonl"));
    for (const json& row : rows) require_version(row, "lineage row");
    return rows;
}

void RunStore::append_records(const std::vector<EvalRecord>& records) {
    for (const EvalRecord& r : records) {
        append_jsonl_line(path_of("records.jsonl"), r.to_json());
    }
}

std::vector<EvalRecord> RunStore::load_records(bool allow_partial) const {
    json m = manifest();
    bool pinned = m["files"].contains("records.jsonl");
    if (pinned) {
        verify_hash("records.jsonl");
    } else if (!allow_partial) {
        throw CorruptStoreError("records.jsonl is not finalized for run '" + run_id_ + "'");
    }
    if (!fs::exists(path_of("records.jsonl"))) {
        if (allow_partial) return {};
        throw CorruptStoreError("records.jsonl is missing for run '" + run_id_ + "'");
    }
    std::vector<EvalRecord> out;
    for (const json& row : read_jsonl(path_of("records.jsonl"), !pinned && allow_partial)) {
        require_version(row, "record row");
        out.push_back(EvalRecord::from_json(row));
    }
    return out;
}

void RunStore::rewrite_partial_records(const std::vector<EvalRecord>& records) {
    std::string bytes;
    for (const EvalRecord& r : records) {
        bytes += canonical_line(r.to_json());
        bytes += '\n';
    }
    atomic_write_file(path_of("records.jsonl"), bytes);
}

void RunStore::finalize_records(std::vector<EvalRecord> records) {
    std::sort(records.begin(), records.end(), record_coord_less);
    std::string bytes;
    for (const EvalRecord& r : records) {
        bytes += canonical_line(r.to_json());
        bytes += '\n';
    }
    atomic_write_file(path_of("records.jsonl"), bytes);
    json m = manifest();
    m["files"]["records.jsonl"] = fnv1a64_hex(bytes);
    write_manifest(m);
}

void RunStore::write_metrics(const json& metrics) {
    atomic_write_file(path_of("metrics.json"), canonical_dump(metrics));
    pin_hash("metrics.json");
}

json RunStore::load_metrics() const {
    verify_hash("metrics.json");
    json m = parse_json_file(path_of("metrics.json"));
    require_version(m, "metrics");
    return m;
}

void RunStore::write_analysis(const json& analysis) {
    atomic_write_file(path_of("analysis.json"), canonical_dump(analysis));
    pin_hash("analysis.json");
}

json RunStore::load_analysis() const {
    verify_hash("analysis.json");
    json a = parse_json_file(path_of("analysis.json"));
    require_version(a, "analysis");
    return a;
}

void RunStore::write_top_level(const std::string& filename, const std::string& bytes) {
    atomic_write_file(path_of(filename), bytes);
    pin_hash(filename);
}

void RunStore::write_report_file(const std::string& filename, const std::string& bytes) {
    std::string rel = "report/" + filename;
    atomic_write_file(path_of(rel), bytes);
    pin_hash(rel);
}

}  // namespace promptmut
