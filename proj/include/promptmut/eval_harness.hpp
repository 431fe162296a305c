#pragma once

#include <memory>
#include <string>
#include <vector>

#include "promptmut/clients.hpp"
#include "promptmut/template_model.hpp"

namespace promptmut {

struct EvalRecord {
    std::string task_id;
    std::string model_id;
    std::string template_id;
    std::string instance_id;
    int sample_idx = 0;
    std::string raw_response;
    std::string extracted;
    bool judged = false;
    bool extraction_miss = false;
    bool transport_failed = false;
    double score = 0.0;   // judged records only; oracles may grade fractionally
    bool passed = false;  // score == 1 for boolean oracles
    json judge_meta = json::object();

    json to_json() const;
    static EvalRecord from_json(const json& row);
};

// Stable order of the persisted record store.
bool record_coord_less(const EvalRecord& a, const EvalRecord& b);

// Answer-extraction rules for one template: a tagged answer section when the
// template declares one, else the first fenced code block, else trimmed text.
struct PostprocessAdapter {
    bool has_markers = false;
    std::string begin;
    std::string end;
    bool has_end = false;
};

// Builds the adapter from a template's own rendering of `answer_tag_node`
// (empty id: no tagged section, generic extraction only).
PostprocessAdapter adapter_for_template(const SyntaxTree& tree, const std::string& answer_tag_node);

// Deterministic extraction; *miss is set when nothing non-empty could be
// extracted (the record is then judged not-passed).
std::string postprocess(const std::string& raw_response, const PostprocessAdapter& adapter,
                        bool* miss);

// Unbiased estimator 1 - C(n-c, k)/C(n, k), evaluated in product form.
double pass_at_k(int n, int c, int k);

struct MetricKind {
    std::string kind;  // "accuracy", "pass_at_k", "mean_pass_rate"
    int k = 1;         // pass_at_k only
};

class Oracle {
public:
    virtual ~Oracle() = default;
    virtual double judge(const EvalRecord& record, const TaskInstance& instance) = 0;
};

class ExactOracle : public Oracle {
public:
    double judge(const EvalRecord& record, const TaskInstance& instance) override;
};

class NormalizedOracle : public Oracle {
public:
    NormalizedOracle(bool trim, bool case_insensitive)
        : trim_(trim), case_insensitive_(case_insensitive) {}
    double judge(const EvalRecord& record, const TaskInstance& instance) override;
    static std::string normalize(const std::string& s, bool trim, bool case_insensitive);

private:
    bool trim_;
    bool case_insensitive_;
};

// Spawns a judge program per record, feeding {extracted, judge_payload,
// coordinates} as JSON on stdin; exit status 0 is a pass. The child is killed
// after the timeout and the record counts as not-passed.
class CommandOracle : public Oracle {
public:
    CommandOracle(std::vector<std::string> argv, int timeout_s)
        : argv_(std::move(argv)), timeout_s_(timeout_s) {}
    double judge(const EvalRecord& record, const TaskInstance& instance) override;

private:
    std::vector<std::string> argv_;
    int timeout_s_;
};

// Replays canned verdicts keyed by record coordinates (model-specific entries
// win over wildcard ones; a "default" row answers the rest).
class ReplayOracle : public Oracle {
public:
    static ReplayOracle from_file(const std::string& path);
    static ReplayOracle from_rows(const std::vector<json>& rows);
    double judge(const EvalRecord& record, const TaskInstance& instance) override;

private:
    std::map<std::string, double> by_key_;
    bool has_default_ = false;
    double default_score_ = 0.0;
};

// Issues |templates| x |instances| x num_generations requests for one model
// and returns the (unjudged) records. Temperature-0 requests collapse to one
// transport call per (template, instance), logically duplicated across
// samples. Transport failures after retries mark the record failed; nothing
// is dropped.
std::vector<EvalRecord> run_task(
    const std::vector<std::pair<std::string, std::string>>& rendered_templates,  // (id, text)
    const std::vector<TaskInstance>& instances, InferenceClient& client,
    const SamplingParams& params, const std::string& task_id, const std::string& model_id,
    int concurrency);

// Metric for one (task, model, template) coordinate; `instance_ids` is the
// complete expected instance set. Raises IncompleteDataError on gaps.
double aggregate_metric(const std::vector<EvalRecord>& records,
                        const std::vector<std::string>& instance_ids, int num_generations,
                        const MetricKind& metric);

// Per-template metric values in pool order for one model.
std::vector<double> compute_metric_series(const std::vector<EvalRecord>& records,
                                          const std::string& model_id,
                                          const std::vector<std::string>& template_ids,
                                          const std::vector<std::string>& instance_ids,
                                          int num_generations, const MetricKind& metric);

}  // namespace promptmut
