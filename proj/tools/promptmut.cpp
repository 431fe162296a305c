#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "promptmut/clients.hpp"
#include "promptmut/errors.hpp"
#include "promptmut/eval_harness.hpp"
#include "promptmut/jsonio.hpp"
#include "promptmut/mutation_ops.hpp"
#include "promptmut/mutator_loop.hpp"
#include "promptmut/review.hpp"
#include "promptmut/stats.hpp"
#include "promptmut/store.hpp"
#include "promptmut/template_model.hpp"
#include "promptmut/validation.hpp"

namespace fs = std::filesystem;
using namespace promptmut;

namespace {

struct Args {
    std::string config_path;
    std::string run_id;
    std::string runs_dir = "runs";
    std::string meta_path;       // validate-meta positional
    std::string canonical_out;   // validate-meta
    int threshold = 0;
    std::uint64_t seed = 0;
    int concurrency = 0;
    std::string mock_mutator;
    std::string mock_inference;
    std::string oracle_override;
    int count = 10;
    bool has_threshold = false;
    bool has_seed = false;
    bool has_concurrency = false;
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

RunConfig load_config_file(const std::string& path) {
    if (path.empty()) throw ConfigError("--config is required for this command");
    // Absolutize before parsing so the paths stored in the run's config.json
    // stay valid no matter where later stages are invoked from.
    fs::path p = fs::absolute(path).lexically_normal();
    return parse_run_config(parse_json_file(p), p.parent_path());
}

std::unique_ptr<MutatorClient> make_mutator_client(const ClientSlot& slot) {
    if (slot.type == "http") return std::make_unique<HttpMutatorClient>(slot.http);
    if (slot.transcript_path.empty()) {
        throw ConfigError("replay mutator requires a transcript (see --mock-mutator)");
    }
    return std::make_unique<ReplayMutatorClient>(ReplayMutatorClient::from_file(slot.transcript_path));
}

std::unique_ptr<InferenceClient> make_inference_client(const ClientSlot& slot,
                                                       const std::string& model_id) {
    if (slot.type == "http") {
        HttpClientConfig http = slot.http;
        http.model = model_id;
        return std::make_unique<HttpInferenceClient>(http);
    }
    if (slot.transcript_path.empty()) {
        throw ConfigError("replay inference requires a transcript (see --mock-inference)");
    }
    return std::make_unique<ReplayInferenceClient>(
        ReplayInferenceClient::from_file(slot.transcript_path));
}

std::unique_ptr<EmbeddingClient> make_embedder(const ClientSlot& slot) {
    if (slot.type == "http") return std::make_unique<HttpEmbeddingClient>(slot.http);
    return std::make_unique<StubEmbedder>();
}

std::unique_ptr<Oracle> make_oracle(const OracleConfig& oc) {
    if (oc.type == "exact") return std::make_unique<ExactOracle>();
    if (oc.type == "normalized") {
        return std::make_unique<NormalizedOracle>(oc.trim, oc.case_insensitive);
    }
    if (oc.type == "command") {
        if (oc.command.empty()) throw ConfigError("command oracle requires a command array");
        return std::make_unique<CommandOracle>(oc.command, oc.timeout_s);
    }
    if (oc.verdicts_path.empty()) throw ConfigError("replay oracle requires a verdicts file");
    return std::make_unique<ReplayOracle>(ReplayOracle::from_file(oc.verdicts_path));
}

std::vector<std::string> pool_template_ids(std::size_t pool_size) {
    std::vector<std::string> ids;
    ids.reserve(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) ids.push_back(template_id_for_index(i));
    return ids;
}

void require_stage(const RunStore& store, const std::string& stage, const std::string& cmd) {
    if (!store.exists()) {
        throw ConfigError(cmd + ": run '" + store.run_id() + "' does not exist under " +
                          store.dir().parent_path().string());
    }
    if (!store.stage_done(stage)) {
        throw ConfigError(cmd + ": run '" + store.run_id() + "' has no completed '" + stage +
                          "' stage");
    }
}

// ---------------------------------------------------------------- validate-meta

int cmd_validate_meta(const Args& args) {
    std::string path = args.meta_path;
    if (path.empty() && !args.config_path.empty()) {
        path = load_config_file(args.config_path).meta_template_path;
    }
    if (path.empty()) throw ConfigError("validate-meta needs a template path or --config");

    std::string original_bytes = read_file(path);
    MetaTemplate mt = parse_meta_template(parse_json_file(path));
    std::string canonical = canonical_dump(serialize_meta_template(mt));
    MetaTemplate reparsed = parse_meta_template(json::parse(canonical));
    std::string canonical2 = canonical_dump(serialize_meta_template(reparsed));
    if (canonical != canonical2) {
        throw InvariantError("serialization is not a parse fixed point");
    }
    std::vector<Inconsistency> issues = check_consistency(mt);
    if (!issues.empty()) {
        throw InvariantError("template has " + std::to_string(issues.size()) +
                             " unresolved mention inconsistencies: " + issues.front().reason);
    }
    if (!args.canonical_out.empty()) atomic_write_file(args.canonical_out, canonical);

    std::size_t texts = 0, tags = 0, delims = 0, mentions = 0;
    for (const auto& [id, node] : mt.tree.nodes) {
        if (node.kind == NodeKind::text) {
            ++texts;
            mentions += node.mentions.size();
        } else if (node.kind == NodeKind::tag) {
            ++tags;
        } else {
            ++delims;
        }
    }
    std::cout << "task_id: " << mt.task_id << "\n"
              << "nodes: " << texts << " text, " << tags << " tag, " << delims
              << " delimiter, 1 shared format\n"
              << "segments: " << mt.tree.segments.size() << ", mentions: " << mentions
              << ", placeholders: " << mt.tree.placeholders.size() << "\n"
              << "operation catalog: " << mt.op_catalog.size() << " entries, consistency rules: "
              << mt.consistency_rules.size() << "\n"
              << "canonical: " << (original_bytes == canonical ? "yes" : "no (valid, but not in canonical form)")
              << "\n"
              << "validate-meta: OK\n";
    return 0;
}

// ------------------------------------------------------------------------ mutate

int cmd_mutate(const Args& args) {
    if (args.run_id.empty()) throw ConfigError("mutate requires --run-id");
    RunStore store(args.runs_dir, args.run_id);
    if (store.exists() && store.stage_done("mutate")) {
        std::cout << "mutate: run '" << args.run_id << "' already has a completed pool\n";
        return 0;
    }
    RunConfig cfg = load_config_file(args.config_path);
    if (args.has_threshold) cfg.threshold = args.threshold;
    if (args.has_seed) {
        cfg.seed = args.seed;
        cfg.budget.rng_seed = args.seed;
    }
    if (!args.mock_mutator.empty()) {
        cfg.mutator = ClientSlot{"replay", {}, fs::absolute(args.mock_mutator).string()};
    }
    store.init(cfg);
    for (const char* stale : {"lineage.jsonl", "records.jsonl"}) {
        fs::remove(store.dir() / stale);
    }

    MetaTemplate seed = parse_meta_template(parse_json_file(cfg.meta_template_path));
    std::unique_ptr<MutatorClient> mutator = make_mutator_client(cfg.mutator);
    std::unique_ptr<EmbeddingClient> embedder = make_embedder(cfg.embedding);
    LoopResult result = run_mutation_loop(seed, *mutator, cfg.mutator_decode, *embedder,
                                          cfg.validation, cfg.budget, cfg.threshold);
    store.append_transcript(result.transcript);
    store.write_pool(result.pool);
    store.mark_stage("mutate");
    std::cout << "mutate: pool grown to " << result.pool.members.size() << " members in "
              << result.iterations << " iterations (" << result.accepted << " accepted)\n";
    return 0;
}

// ------------------------------------------------------------------------ review

int cmd_review(const Args& args) {
    if (args.run_id.empty()) throw ConfigError("review requires --run-id");
    RunStore store(args.runs_dir, args.run_id);
    require_stage(store, "mutate", "review");
    RunConfig cfg = store.load_config();
    Pool pool = store.load_pool();
    std::unique_ptr<EmbeddingClient> embedder = make_embedder(cfg.embedding);
    ReviewReport report = build_review_report(pool, *embedder, cfg.validation);
    store.write_top_level("review.json", canonical_dump(report.to_json()));
    store.write_top_level("review.txt", report.to_text());
    std::size_t paraphrases = 0;
    for (const TemplateReview& tr : report.templates) paraphrases += tr.paraphrases.size();
    std::cout << "review: " << report.templates.size() << " templates, " << paraphrases
              << " paraphrase operations -> " << (store.dir() / "review.txt").string() << "\n";
    return 0;
}

// --------------------------------------------------------------------------- run

int cmd_run(const Args& args) {
    if (args.run_id.empty()) throw ConfigError("run requires --run-id");
    RunStore store(args.runs_dir, args.run_id);
    require_stage(store, "mutate", "run");
    if (store.stage_done("run")) {
        std::cout << "run: records already complete for '" << args.run_id << "'\n";
        return 0;
    }
    RunConfig cfg = store.load_config();
    if (args.has_concurrency) cfg.concurrency = args.concurrency;
    if (!args.mock_inference.empty()) {
        cfg.inference = ClientSlot{"replay", {}, fs::absolute(args.mock_inference).string()};
    }
    if (cfg.models.empty()) throw ConfigError("run requires at least one model in the config");
    if (cfg.instances_path.empty()) throw ConfigError("run requires an instances file");

    Pool pool = store.load_pool();
    std::vector<std::pair<std::string, std::string>> templates;
    for (std::size_t i = 0; i < pool.members.size(); ++i) {
        templates.emplace_back(template_id_for_index(i), render_template(pool.members[i].tree));
    }
    std::vector<TaskInstance> instances = load_instances(cfg.instances_path);
    if (instances.empty()) throw ConfigError("instances file is empty");
    int n = cfg.sampling.num_generations;

    // Resume: a (model, template, instance) cell counts as present only when
    // all of its samples were persisted; partial cells are refetched whole.
    std::vector<EvalRecord> existing = store.load_records(true);
    std::map<std::string, std::set<int>> samples_present;
    for (const EvalRecord& r : existing) {
        samples_present[coord_key(r.model_id, r.template_id, r.instance_id, 0)].insert(r.sample_idx);
    }
    auto cell_complete = [&](const std::string& model, const std::string& tpl,
                             const std::string& inst) {
        auto it = samples_present.find(coord_key(model, tpl, inst, 0));
        if (it == samples_present.end() || static_cast<int>(it->second.size()) != n) return false;
        return *it->second.begin() >= 0 && *it->second.rbegin() < n;
    };
    std::vector<EvalRecord> kept;
    for (EvalRecord& r : existing) {
        if (cell_complete(r.model_id, r.template_id, r.instance_id)) kept.push_back(std::move(r));
    }
    if (kept.size() != existing.size()) store.rewrite_partial_records(kept);
    std::size_t resumed_from = kept.size();

    std::size_t issued = 0, failures = 0;
    for (const ModelSpec& model : cfg.models) {
        std::unique_ptr<InferenceClient> client = make_inference_client(cfg.inference, model.model_id);
        for (const auto& tpl : templates) {
            std::vector<TaskInstance> missing;
            for (const TaskInstance& inst : instances) {
                if (!cell_complete(model.model_id, tpl.first, inst.instance_id)) {
                    missing.push_back(inst);
                }
            }
            if (missing.empty()) continue;
            std::vector<EvalRecord> batch = run_task({tpl}, missing, *client, cfg.sampling,
                                                     cfg.task_id, model.model_id, cfg.concurrency);
            for (const EvalRecord& r : batch) {
                if (r.transport_failed) ++failures;
            }
            issued += batch.size();
            store.append_records(batch);
        }
    }
    std::vector<EvalRecord> all = store.load_records(true);
    std::size_t expected = cfg.models.size() * templates.size() * instances.size() *
                           static_cast<std::size_t>(n);
    if (all.size() != expected) {
        throw InvariantError("record store holds " + std::to_string(all.size()) +
                             " records, expected " + std::to_string(expected));
    }
    store.finalize_records(std::move(all));
    store.mark_stage("run");
    std::cout << "run: " << expected << " records (" << issued << " new, " << resumed_from
              << " resumed, " << failures << " transport failures)\n";
    return 0;
}

// ------------------------------------------------------------------------- score

json build_metrics(const RunConfig& cfg, const std::vector<EvalRecord>& records,
                   const std::vector<std::string>& template_ids,
                   const std::vector<std::string>& instance_ids) {
    json metrics;
    metrics["schema_version"] = 1;
    metrics["task_id"] = cfg.task_id;
    metrics["metric"] = json{{"kind", cfg.metric.kind}, {"k", cfg.metric.k}};
    metrics["num_generations"] = cfg.sampling.num_generations;
    metrics["template_ids"] = template_ids;
    metrics["instance_ids"] = instance_ids;
    json model_order = json::array();
    json series = json::object();
    json families = json::object();
    for (const ModelSpec& model : cfg.models) {
        model_order.push_back(model.model_id);
        series[model.model_id] = compute_metric_series(records, model.model_id, template_ids,
                                                       instance_ids,
                                                       cfg.sampling.num_generations, cfg.metric);
        families[model.model_id] = model.family;
    }
    metrics["model_order"] = model_order;
    metrics["series"] = series;
    metrics["families"] = families;
    return metrics;
}

int cmd_score(const Args& args) {
    if (args.run_id.empty()) throw ConfigError("score requires --run-id");
    RunStore store(args.runs_dir, args.run_id);
    require_stage(store, "run", "score");
    RunConfig cfg = store.load_config();
    if (!args.oracle_override.empty()) {
        if (args.oracle_override != "exact" && args.oracle_override != "normalized" &&
            args.oracle_override != "command" && args.oracle_override != "replay") {
            throw ConfigError("unknown oracle type '" + args.oracle_override + "'");
        }
        cfg.oracle.type = args.oracle_override;
    }
    Pool pool = store.load_pool();
    std::map<std::string, PostprocessAdapter> adapters;
    for (std::size_t i = 0; i < pool.members.size(); ++i) {
        adapters[template_id_for_index(i)] =
            adapter_for_template(pool.members[i].tree, cfg.answer_tag_node);
    }
    std::vector<TaskInstance> instances = load_instances(cfg.instances_path);
    std::map<std::string, const TaskInstance*> by_id;
    std::vector<std::string> instance_ids;
    for (const TaskInstance& inst : instances) {
        by_id[inst.instance_id] = &inst;
        instance_ids.push_back(inst.instance_id);
    }
    std::unique_ptr<Oracle> oracle = make_oracle(cfg.oracle);

    std::vector<EvalRecord> records = store.load_records(false);
    std::size_t misses = 0, failures = 0, passed = 0;
    for (EvalRecord& rec : records) {
        rec.judged = true;
        if (rec.transport_failed) {
            rec.score = 0.0;
            rec.passed = false;
            ++failures;
            continue;
        }
        auto ad = adapters.find(rec.template_id);
        if (ad == adapters.end()) {
            throw CorruptStoreError("record references unknown template '" + rec.template_id + "'");
        }
        bool miss = false;
        rec.extracted = postprocess(rec.raw_response, ad->second, &miss);
        rec.extraction_miss = miss;
        if (miss) {
            rec.score = 0.0;
            rec.passed = false;
            ++misses;
            continue;
        }
        auto inst = by_id.find(rec.instance_id);
        if (inst == by_id.end()) {
            throw ConfigError("record references unknown instance '" + rec.instance_id + "'");
        }
        rec.score = oracle->judge(rec, *inst->second);
        rec.passed = rec.score == 1.0;
        if (rec.passed) ++passed;
    }
    json metrics =
        build_metrics(cfg, records, pool_template_ids(pool.members.size()), instance_ids);
    store.finalize_records(std::move(records));
    store.write_metrics(metrics);
    store.mark_stage("score");
    std::cout << "score: " << passed << " passed, " << misses << " extraction misses, "
              << failures << " transport failures\n";
    for (const ModelSpec& model : cfg.models) {
        const json& s = metrics["series"][model.model_id];
        std::cout << "  " << model.model_id << " " << cfg.metric.kind << ":";
        for (const json& v : s) std::cout << " " << fmt_double(v.get<double>());
        std::cout << "\n";
    }
    return 0;
}

// ----------------------------------------------------------------------- analyze

MetricTable table_from_metrics(const json& metrics) {
    MetricTable table;
    for (const json& m : metrics["model_order"]) {
        std::string id = m.get<std::string>();
        table.model_ids.push_back(id);
        table.values.push_back(metrics["series"][id].get<std::vector<double>>());
    }
    return table;
}

json anova_to_json(const AnovaResult& r) {
    return json{{"f_template", r.f_template},
                {"f_temperature", r.f_temperature},
                {"f_interaction", r.f_interaction},
                {"p_template", r.p_template},
                {"p_temperature", r.p_temperature},
                {"p_interaction", r.p_interaction},
                {"df_template", r.df_template},
                {"df_temperature", r.df_temperature},
                {"df_interaction", r.df_interaction},
                {"df_error", r.df_error}};
}

int cmd_analyze(const Args& args) {
    if (args.run_id.empty()) throw ConfigError("analyze requires --run-id");
    RunStore store(args.runs_dir, args.run_id);
    require_stage(store, "score", "analyze");
    RunConfig cfg = store.load_config();
    json metrics = store.load_metrics();
    MetricTable table = table_from_metrics(metrics);

    json analysis;
    analysis["schema_version"] = 1;
    analysis["task_id"] = metrics["task_id"];
    analysis["models"] = metrics["model_order"];
    json notes = json::array();

    json z_scores = json::object();
    json mpis = json::object();
    for (std::size_t m = 0; m < table.models(); ++m) {
        const std::string& id = table.model_ids[m];
        try {
            z_scores[id] = z_score(table.values[m]);
        } catch (const Error& e) {
            z_scores[id] = nullptr;
            notes.push_back("z_score(" + id + "): " + e.what());
        }
        try {
            mpis[id] = mpi(table.values[m]);
        } catch (const Error& e) {
            mpis[id] = nullptr;
            notes.push_back("mpi(" + id + "): " + e.what());
        }
    }
    analysis["z_scores"] = z_scores;
    analysis["mpi"] = mpis;

    // Kendall's W across all models and per family (computed on the family's
    // own rank matrix).
    json kendall = json::object();
    auto w_of = [&](const std::vector<std::size_t>& model_idx) -> json {
        MetricTable sub;
        for (std::size_t m : model_idx) {
            sub.model_ids.push_back(table.model_ids[m]);
            sub.values.push_back(table.values[m]);
        }
        AgreementLabel al = kendalls_w(rank_models(sub));
        return json{{"w", al.w}, {"label", al.label}, {"models", sub.model_ids}};
    };
    if (table.models() >= 2) {
        std::vector<std::size_t> all_idx(table.models());
        for (std::size_t m = 0; m < table.models(); ++m) all_idx[m] = m;
        kendall["overall"] = w_of(all_idx);
    } else {
        kendall["overall"] = nullptr;
        notes.push_back("kendalls_w(overall): needs at least two models");
    }
    std::map<std::string, std::vector<std::size_t>> by_family;
    for (std::size_t m = 0; m < table.models(); ++m) {
        by_family[metrics["families"][table.model_ids[m]].get<std::string>()].push_back(m);
    }
    json families = json::object();
    for (const auto& [family, idx] : by_family) {
        if (idx.size() >= 2) {
            families[family] = w_of(idx);
        } else {
            families[family] = nullptr;
            notes.push_back("kendalls_w(" + family + "): needs at least two models");
        }
    }
    kendall["families"] = families;
    analysis["kendalls_w"] = kendall;

    // Top-k IoU; requested k beyond the pool size is capped.
    json iou = json::object();
    int templates = static_cast<int>(table.templates());
    for (int k : {1, 5, 10, 20}) {
        int effective = std::min(k, templates);
        if (table.models() < 2 || effective < 1) {
            iou[std::to_string(k)] = nullptr;
            notes.push_back("iou(k=" + std::to_string(k) + "): needs two models and templates");
            continue;
        }
        IouResult res = top_k_iou(table, effective);
        iou[std::to_string(k)] = json{{"requested_k", k},
                                      {"effective_k", effective},
                                      {"mean", res.mean},
                                      {"pairwise", res.pairwise}};
    }
    analysis["iou"] = iou;

    json pearson = json::object();
    for (std::size_t i = 0; i < table.models(); ++i) {
        for (std::size_t j = i + 1; j < table.models(); ++j) {
            std::string key = table.model_ids[i] + "|" + table.model_ids[j];
            try {
                pearson[key] = pearson_r(table.values[i], table.values[j]);
            } catch (const Error& e) {
                pearson[key] = nullptr;
                notes.push_back("pearson(" + key + "): " + e.what());
            }
        }
    }
    analysis["pearson"] = pearson;

    if (!cfg.anova_observations_path.empty()) {
        json obs_doc = parse_json_file(cfg.anova_observations_path);
        if (!obs_doc.is_object() || !obs_doc.contains("observations")) {
            throw ConfigError("anova observations file needs an 'observations' field");
        }
        auto obs = obs_doc["observations"].get<std::vector<std::vector<std::vector<double>>>>();
        analysis["anova"] = anova_to_json(two_way_anova(obs));
    }
    analysis["notes"] = notes;
    analysis["thresholds"] = json{{"w_strong", 0.85}};
    store.write_analysis(analysis);

    // CSV companions.
    std::ostringstream heat;
    heat << "model,template_id,value,model_z,model_mpi\n";
    for (std::size_t m = 0; m < table.models(); ++m) {
        const std::string& id = table.model_ids[m];
        std::string z = z_scores[id].is_null() ? "" : fmt_double(z_scores[id].get<double>());
        std::string mp = mpis[id].is_null() ? "" : fmt_double(mpis[id].get<double>());
        for (std::size_t t = 0; t < table.templates(); ++t) {
            heat << csv_field(id) << "," << template_id_for_index(t) << ","
                 << fmt_double(table.values[m][t]) << "," << z << "," << mp << "\n";
        }
    }
    store.write_report_file("heatmap.csv", heat.str());

    std::ostringstream kcsv;
    kcsv << "scope,w,label,models\n";
    auto kendall_row = [&](const std::string& scope, const json& entry) {
        if (entry.is_null()) return;
        std::string models;
        for (const json& m : entry["models"]) {
            if (!models.empty()) models += " ";
            models += m.get<std::string>();
        }
        kcsv << csv_field(scope) << "," << fmt_double(entry["w"].get<double>()) << ","
             << entry["label"].get<std::string>() << "," << csv_field(models) << "\n";
    };
    kendall_row("overall", kendall["overall"]);
    for (const auto& [family, entry] : kendall["families"].items()) kendall_row(family, entry);
    store.write_report_file("kendall.csv", kcsv.str());

    std::ostringstream icsv;
    icsv << "requested_k,effective_k,model_a,model_b,iou\n";
    for (const auto& [key, entry] : iou.items()) {
        if (entry.is_null()) continue;
        icsv << key << "," << entry["effective_k"].get<int>() << ",mean,,"
             << fmt_double(entry["mean"].get<double>()) << "\n";
        for (std::size_t i = 0; i < table.models(); ++i) {
            for (std::size_t j = i + 1; j < table.models(); ++j) {
                icsv << key << "," << entry["effective_k"].get<int>() << ","
                     << csv_field(table.model_ids[i]) << "," << csv_field(table.model_ids[j])
                     << "," << fmt_double(entry["pairwise"][i][j].get<double>()) << "\n";
            }
        }
    }
    store.write_report_file("iou.csv", icsv.str());

    std::ostringstream mcsv;
    mcsv << "template_id";
    for (const std::string& id : table.model_ids) mcsv << "," << csv_field(id);
    mcsv << "\n";
    for (std::size_t t = 0; t < table.templates(); ++t) {
        mcsv << template_id_for_index(t);
        for (std::size_t m = 0; m < table.models(); ++m) {
            mcsv << "," << fmt_double(table.values[m][t]);
        }
        mcsv << "\n";
    }
    store.write_report_file("metrics.csv", mcsv.str());

    store.mark_stage("analyze");
    std::cout << "analyze: " << table.models() << " models x " << table.templates()
              << " templates -> " << (store.dir() / "analysis.json").string() << "\n";
    if (!kendall["overall"].is_null()) {
        std::cout << "  kendalls_w overall: " << fmt_double(kendall["overall"]["w"].get<double>())
                  << " (" << kendall["overall"]["label"].get<std::string>() << ")\n";
    }
    return 0;
}

// ------------------------------------------------------------------------ subset

int cmd_subset(const Args& args) {
    if (args.run_id.empty()) throw ConfigError("subset requires --run-id");
    RunStore store(args.runs_dir, args.run_id);
    require_stage(store, "score", "subset");
    Pool pool = store.load_pool();
    json metrics = store.load_metrics();
    MetricTable table = table_from_metrics(metrics);
    if (table.templates() != pool.members.size()) {
        throw CorruptStoreError("metric series length does not match the pool size");
    }

    // Mean metric across models per template; delta vs the original.
    std::vector<double> mean_series(table.templates(), 0.0);
    for (std::size_t t = 0; t < table.templates(); ++t) {
        for (std::size_t m = 0; m < table.models(); ++m) mean_series[t] += table.values[m][t];
        mean_series[t] /= static_cast<double>(table.models());
    }
    std::vector<double> deltas(table.templates(), 0.0);
    std::vector<int> kind_counts(table.templates(), 0);
    for (std::size_t t = 0; t < table.templates(); ++t) {
        deltas[t] = mean_series[t] - mean_series[0];
        kind_counts[t] = distinct_op_kinds(pool.members[t].lineage);
    }
    std::vector<int> selected = select_diverse_subset(kind_counts, deltas, args.count);
    std::set<int> selected_set(selected.begin(), selected.end());

    json subset;
    subset["schema_version"] = 1;
    subset["task_id"] = metrics["task_id"];
    subset["count"] = args.count;
    subset["selected_indices"] = selected;
    json ids = json::array();
    for (int idx : selected) ids.push_back(template_id_for_index(static_cast<std::size_t>(idx)));
    subset["selected_template_ids"] = ids;
    store.write_top_level("subset.json", canonical_dump(subset));

    std::ostringstream csv;
    csv << "template_id,distinct_kinds,delta,selected\n";
    for (std::size_t t = 0; t < table.templates(); ++t) {
        csv << template_id_for_index(t) << "," << kind_counts[t] << "," << fmt_double(deltas[t])
            << "," << (selected_set.count(static_cast<int>(t)) ? 1 : 0) << "\n";
    }
    store.write_report_file("subset.csv", csv.str());
    store.mark_stage("subset");

    std::cout << "subset: selected " << selected.size() << " of " << table.templates()
              << " templates:";
    for (const json& id : ids) std::cout << " " << id.get<std::string>();
    std::cout << "\n";
    return 0;
}

// ------------------------------------------------------------------------ report

int cmd_report(const Args& args) {
    if (args.run_id.empty()) throw ConfigError("report requires --run-id");
    RunStore store(args.runs_dir, args.run_id);
    require_stage(store, "analyze", "report");
    json metrics = store.load_metrics();
    json analysis = store.load_analysis();
    MetricTable table = table_from_metrics(metrics);

    std::ostringstream os;
    os << "Run " << store.run_id() << " - task " << metrics["task_id"].get<std::string>() << "\n";
    os << "metric: " << metrics["metric"]["kind"].get<std::string>();
    if (metrics["metric"]["kind"].get<std::string>() == "pass_at_k") {
        os << " (k=" << metrics["metric"]["k"].get<int>() << ")";
    }
    os << ", " << table.templates() << " templates, " << table.models() << " models\n\n";

    os << "per-model series (t000 is the original):\n";
    for (std::size_t m = 0; m < table.models(); ++m) {
        const std::string& id = table.model_ids[m];
        os << "  " << id << ":";
        for (double v : table.values[m]) os << " " << fmt_double(v);
        os << "\n";
        const json& z = analysis["z_scores"][id];
        const json& mp = analysis["mpi"][id];
        os << "    z: " << (z.is_null() ? "n/a" : fmt_double(z.get<double>()))
           << ", mpi: " << (mp.is_null() ? "n/a" : fmt_double(mp.get<double>())) << "\n";
    }
    os << "\nranking agreement:\n";
    const json& kendall = analysis["kendalls_w"];
    if (!kendall["overall"].is_null()) {
        os << "  overall: W=" << fmt_double(kendall["overall"]["w"].get<double>()) << " ("
           << kendall["overall"]["label"].get<std::string>() << ")\n";
    }
    for (const auto& [family, entry] : kendall["families"].items()) {
        if (entry.is_null()) continue;
        os << "  family " << family << ": W=" << fmt_double(entry["w"].get<double>()) << " ("
           << entry["label"].get<std::string>() << ")\n";
    }
    os << "\ntop-k overlap (mean IoU):\n";
    for (const auto& [key, entry] : analysis["iou"].items()) {
        if (entry.is_null()) continue;
        os << "  k=" << key << " (effective " << entry["effective_k"].get<int>()
           << "): " << fmt_double(entry["mean"].get<double>()) << "\n";
    }
    if (analysis.contains("anova")) {
        const json& a = analysis["anova"];
        os << "\nanova (template x temperature):\n";
        os << "  F_template=" << fmt_double(a["f_template"].get<double>())
           << " p=" << fmt_double(a["p_template"].get<double>()) << "\n";
        os << "  F_temperature=" << fmt_double(a["f_temperature"].get<double>())
           << " p=" << fmt_double(a["p_temperature"].get<double>()) << "\n";
        os << "  F_interaction=" << fmt_double(a["f_interaction"].get<double>())
           << " p=" << fmt_double(a["p_interaction"].get<double>()) << "\n";
    }
    if (fs::exists(store.dir() / "subset.json")) {
        json subset = parse_json_file(store.dir() / "subset.json");
        os << "\nselected subset:";
        for (const json& id : subset["selected_template_ids"]) {
            os << " " << id.get<std::string>();
        }
        os << "\n";
    }
    std::string text = os.str();
    store.write_report_file("summary.txt", text);
    store.mark_stage("report");
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prompt-template mutation, evaluation, and sensitivity analysis"};
    app.require_subcommand(1);
    Args args;

    auto add_store_opts = [&](CLI::App* sub) {
        sub->add_option("--run-id", args.run_id, "Run identifier under the runs directory");
        sub->add_option("--runs-dir", args.runs_dir, "Runs directory (default: runs)");
    };

    CLI::App* validate = app.add_subcommand("validate-meta", "Validate a meta-template document");
    validate->add_option("path", args.meta_path, "Meta-template JSON document");
    validate->add_option("--config", args.config_path, "Run config naming the template");
    validate->add_option("--canonical-out", args.canonical_out,
                         "Write the canonical serialization here");

    CLI::App* mutate = app.add_subcommand("mutate", "Grow the template pool via the mutator");
    mutate->add_option("--config", args.config_path, "Run config JSON")->required();
    add_store_opts(mutate);
    mutate->add_option("--threshold", args.threshold, "Pool size to reach (default: config)");
    mutate->add_option("--seed", args.seed, "RNG seed override");
    mutate->add_option("--mock-mutator", args.mock_mutator, "Replay transcript for the mutator");

    CLI::App* review = app.add_subcommand("review", "Manual-review report for a grown pool");
    add_store_opts(review);

    CLI::App* run = app.add_subcommand("run", "Collect model responses for the pool");
    add_store_opts(run);
    run->add_option("--concurrency", args.concurrency, "Worker threads for transport requests");
    run->add_option("--mock-inference", args.mock_inference,
                    "Replay transcript for the inference transport");

    CLI::App* score = app.add_subcommand("score", "Judge records and compute metric series");
    add_store_opts(score);
    score->add_option("--oracle", args.oracle_override, "Oracle override")
        ->check(CLI::IsMember({"exact", "normalized", "command", "replay"}));

    CLI::App* analyze = app.add_subcommand("analyze", "Sensitivity statistics over the series");
    add_store_opts(analyze);

    CLI::App* subset = app.add_subcommand("subset", "Pick a diverse template subset");
    add_store_opts(subset);
    subset->add_option("--count", args.count, "Subset size (default: 10)");

    CLI::App* report = app.add_subcommand("report", "Human-readable run summary");
    add_store_opts(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    args.has_threshold = mutate->count("--threshold") > 0;
    args.has_seed = mutate->count("--seed") > 0;
    args.has_concurrency = run->count("--concurrency") > 0;

    try {
        if (validate->parsed()) return cmd_validate_meta(args);
        if (mutate->parsed()) return cmd_mutate(args);
        if (review->parsed()) return cmd_review(args);
        if (run->parsed()) return cmd_run(args);
        if (score->parsed()) return cmd_score(args);
        if (analyze->parsed()) return cmd_analyze(args);
        if (subset->parsed()) return cmd_subset(args);
        if (report->parsed()) return cmd_report(args);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        ErrorCode code = e.code();
        return (code == ErrorCode::budget_exhausted || code == ErrorCode::client) ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
