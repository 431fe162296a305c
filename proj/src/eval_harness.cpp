#include "promptmut/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <set>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "promptmut/errors.hpp"

namespace promptmut {

json EvalRecord::to_json() const {
    json row;
    row["schema_version"] = 1;
    row["task_id"] = task_id;
    row["model_id"] = model_id;
    row["template_id"] = template_id;
    row["instance_id"] = instance_id;
    row["sample_idx"] = sample_idx;
    row["raw_response"] = raw_response;
    row["extracted"] = extracted;
    row["judged"] = judged;
    row["extraction_miss"] = extraction_miss;
    row["transport_failed"] = transport_failed;
    row["score"] = score;
    row["passed"] = passed;
    row["judge_meta"] = judge_meta;
    return row;
}

EvalRecord EvalRecord::from_json(const json& row) {
    EvalRecord r;
    r.task_id = row.value("task_id", std::string());
    r.model_id = row.value("model_id", std::string());
    r.template_id = row.value("template_id", std::string());
    r.instance_id = row.value("instance_id", std::string());
    r.sample_idx = row.value("sample_idx", 0);
    r.raw_response = row.value("raw_response", std::string());
    r.extracted = row.value("extracted", std::string());
    r.judged = row.value("judged", false);
    r.extraction_miss = row.value("extraction_miss", false);
    r.transport_failed = row.value("transport_failed", false);
    r.score = row.value("score", 0.0);
    r.passed = row.value("passed", false);
    r.judge_meta = row.value("judge_meta", json::object());
    return r;
}

bool record_coord_less(const EvalRecord& a, const EvalRecord& b) {
    if (a.model_id != b.model_id) return a.model_id < b.model_id;
    if (a.template_id != b.template_id) return a.template_id < b.template_id;
    if (a.instance_id != b.instance_id) return a.instance_id < b.instance_id;
    return a.sample_idx < b.sample_idx;
}

PostprocessAdapter adapter_for_template(const SyntaxTree& tree,
                                        const std::string& answer_tag_node) {
    PostprocessAdapter adapter;
    if (answer_tag_node.empty()) return adapter;
    RenderedForms forms = rendered_forms(tree, answer_tag_node);
    if (!forms.has_header) return adapter;
    adapter.has_markers = true;
    adapter.begin = forms.header;
    if (forms.has_footer) {
        adapter.has_end = true;
        adapter.end = forms.footer;
    }
    return adapter;
}

namespace {

std::string trim_copy(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// First complete ``` fenced block; the opening fence's rest-of-line (language
// tag) is skipped. Returns false when no closed block exists.
bool first_fenced_block(const std::string& s, std::string* out) {
    std::size_t open = s.find("```");
    if (open == std::string::npos) return false;
    std::size_t line_end = s.find('\n', open + 3);
    if (line_end == std::string::npos) return false;
    std::size_t close = s.find("```", line_end + 1);
    if (close == std::string::npos) return false;
    *out = s.substr(line_end + 1, close - line_end - 1);
    return true;
}

}  // namespace

std::string postprocess(const std::string& raw_response, const PostprocessAdapter& adapter,
                        bool* miss) {
    *miss = false;
    std::string extracted;
    if (adapter.has_markers) {
        std::size_t begin = raw_response.find(adapter.begin);
        if (begin != std::string::npos) {
            std::size_t content = begin + adapter.begin.size();
            std::size_t end = std::string::npos;
            if (adapter.has_end) end = raw_response.find(adapter.end, content);
            extracted = end == std::string::npos ? raw_response.substr(content)
                                                 : raw_response.substr(content, end - content);
            extracted = trim_copy(extracted);
            if (extracted.empty()) *miss = true;
            return extracted;
        }
    }
    std::string block;
    if (first_fenced_block(raw_response, &block)) {
        extracted = trim_copy(block);
        if (extracted.empty()) *miss = true;
        return extracted;
    }
    extracted = trim_copy(raw_response);
    if (extracted.empty()) *miss = true;
    return extracted;
}

double pass_at_k(int n, int c, int k) {
    if (c < 0 || c > n) throw DomainError("pass@k requires 0 <= c <= n");
    if (k < 1 || k > n) throw DomainError("pass@k requires 1 <= k <= n");
    if (n - c < k) return 1.0;
    double miss = 1.0;
    for (int i = 0; i < k; ++i) miss *= static_cast<double>(n - c - i) / (n - i);
    return 1.0 - miss;
}

double ExactOracle::judge(const EvalRecord& record, const TaskInstance& instance) {
    if (!instance.judge_payload.is_object() || !instance.judge_payload.contains("expected") ||
        !instance.judge_payload["expected"].is_string())
        throw ConfigError("exact oracle needs a string judge_payload.expected for instance " +
                          instance.instance_id);
    return record.extracted == instance.judge_payload["expected"].get<std::string>() ? 1.0 : 0.0;
}

std::string NormalizedOracle::normalize(const std::string& s, bool trim, bool case_insensitive) {
    std::string out = trim ? trim_copy(s) : s;
    // Internal whitespace runs compare equal regardless of kind or length.
    std::string squeezed;
    bool in_ws = false;
    for (unsigned char c : out) {
        if (std::isspace(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !squeezed.empty()) squeezed += ' ';
        in_ws = false;
        squeezed += case_insensitive ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
    }
    return squeezed;
}

double NormalizedOracle::judge(const EvalRecord& record, const TaskInstance& instance) {
    if (!instance.judge_payload.is_object() || !instance.judge_payload.contains("expected") ||
        !instance.judge_payload["expected"].is_string())
        throw ConfigError("normalized oracle needs a string judge_payload.expected for instance " +
                          instance.instance_id);
    std::string expected = instance.judge_payload["expected"].get<std::string>();
    return normalize(record.extracted, trim_, case_insensitive_) ==
                   normalize(expected, trim_, case_insensitive_)
               ? 1.0
               : 0.0;
}

double CommandOracle::judge(const EvalRecord& record, const TaskInstance& instance) {
    if (argv_.empty()) throw ConfigError("command oracle has no argv configured");

    json input = {{"extracted", record.extracted},
                  {"judge_payload", instance.judge_payload},
                  {"task_id", record.task_id},
                  {"model_id", record.model_id},
                  {"template_id", record.template_id},
                  {"instance_id", record.instance_id},
                  {"sample_idx", record.sample_idx}};
    std::string payload = input.dump();

    int in_pipe[2];
    if (pipe(in_pipe) != 0) throw ClientError("command oracle: pipe failed");
    pid_t pid = fork();
    if (pid < 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw ClientError("command oracle: fork failed");
    }
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        std::vector<char*> argv;
        argv.reserve(argv_.size() + 1);
        for (const std::string& a : argv_) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        execvp(argv[0], argv.data());
        _exit(127);
    }
    close(in_pipe[0]);
    ssize_t ignored = write(in_pipe[1], payload.data(), payload.size());
    (void)ignored;
    close(in_pipe[1]);

    // Poll for exit with a deadline; on timeout the child is killed and the
    // record counts as not-passed.
    int status = 0;
    const int poll_ms = 10;
    long waited_ms = 0;
    const long deadline_ms = static_cast<long>(timeout_s_) * 1000;
    while (true) {
        pid_t done = waitpid(pid, &status, WNOHANG);
        if (done == pid) break;
        if (done < 0) throw ClientError("command oracle: waitpid failed");
        if (waited_ms >= deadline_ms) {
            kill(pid, SIGKILL);
            waitpid(pid, &status, 0);
            return 0.0;
        }
        usleep(poll_ms * 1000);
        waited_ms += poll_ms;
    }
    return (WIFEXITED(status) && WEXITSTATUS(status) == 0) ? 1.0 : 0.0;
}

ReplayOracle ReplayOracle::from_file(const std::string& path) {
    return from_rows(read_jsonl(path));
}

ReplayOracle ReplayOracle::from_rows(const std::vector<json>& rows) {
    ReplayOracle oracle;
    for (const json& row : rows) {
        if (!row.is_object() || !row.contains("score") || !row["score"].is_number())
            throw ConfigError("verdict transcript rows need a numeric score field");
        double score = row["score"].get<double>();
        if (row.value("default", false)) {
            oracle.has_default_ = true;
            oracle.default_score_ = score;
            continue;
        }
        if (!row.contains("template_id") || !row.contains("instance_id") ||
            !row.contains("sample_idx"))
            throw ConfigError("verdict transcript rows need template_id, instance_id, sample_idx");
        std::string key = coord_key(row.value("model_id", std::string()),
                                    row["template_id"].get<std::string>(),
                                    row["instance_id"].get<std::string>(),
                                    row["sample_idx"].get<int>());
        oracle.by_key_[key] = score;
    }
    return oracle;
}

double ReplayOracle::judge(const EvalRecord& record, const TaskInstance&) {
    auto it = by_key_.find(
        coord_key(record.model_id, record.template_id, record.instance_id, record.sample_idx));
    if (it != by_key_.end()) return it->second;
    it = by_key_.find(coord_key("", record.template_id, record.instance_id, record.sample_idx));
    if (it != by_key_.end()) return it->second;
    if (has_default_) return default_score_;
    throw ConfigError("no canned verdict for " + record.template_id + "/" + record.instance_id +
                      "#" + std::to_string(record.sample_idx));
}

std::vector<EvalRecord> run_task(
    const std::vector<std::pair<std::string, std::string>>& rendered_templates,
    const std::vector<TaskInstance>& instances, InferenceClient& client,
    const SamplingParams& params, const std::string& task_id, const std::string& model_id,
    int concurrency) {
    if (rendered_templates.empty()) throw DomainError("run_task needs a non-empty pool");
    if (instances.empty()) throw DomainError("run_task needs a non-empty instance set");
    if (params.num_generations < 1) throw DomainError("num_generations must be >= 1");

    // Transport requests: one per sample, except that temperature 0 collapses
    // to a single request per (template, instance) whose response is shared.
    bool collapse = params.temperature == 0.0;
    int samples_per_request = collapse ? params.num_generations : 1;
    int requests_per_pair = collapse ? 1 : params.num_generations;

    struct Request {
        std::size_t template_idx;
        std::size_t instance_idx;
        int first_sample;
        std::string prompt;
    };
    std::vector<Request> requests;
    requests.reserve(rendered_templates.size() * instances.size() * requests_per_pair);
    for (std::size_t t = 0; t < rendered_templates.size(); ++t) {
        for (std::size_t i = 0; i < instances.size(); ++i) {
            std::string prompt = instantiate_prompt(rendered_templates[t].second, instances[i]);
            for (int r = 0; r < requests_per_pair; ++r)
                requests.push_back({t, i, r, prompt});
        }
    }

    struct Result {
        std::string response;
        bool failed = false;
        std::string error;
    };
    std::vector<Result> results(requests.size());

    auto worker_body = [&](std::size_t idx) {
        const Request& req = requests[idx];
        RequestCoord coord{model_id, rendered_templates[req.template_idx].first,
                           instances[req.instance_idx].instance_id, req.first_sample};
        try {
            results[idx].response = client.complete(coord, req.prompt, params);
        } catch (const Error& e) {
            results[idx].failed = true;
            results[idx].error = e.what();
        }
    };

    if (concurrency <= 1 || requests.size() <= 1) {
        for (std::size_t i = 0; i < requests.size(); ++i) worker_body(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::size_t workers = std::min<std::size_t>(concurrency, requests.size());
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                while (true) {
                    std::size_t idx = next.fetch_add(1);
                    if (idx >= requests.size()) return;
                    worker_body(idx);
                }
            });
        }
        for (std::thread& t : threads) t.join();
    }

    std::vector<EvalRecord> records;
    records.reserve(rendered_templates.size() * instances.size() * params.num_generations);
    for (std::size_t idx = 0; idx < requests.size(); ++idx) {
        const Request& req = requests[idx];
        const Result& res = results[idx];
        for (int dup = 0; dup < samples_per_request; ++dup) {
            EvalRecord rec;
            rec.task_id = task_id;
            rec.model_id = model_id;
            rec.template_id = rendered_templates[req.template_idx].first;
            rec.instance_id = instances[req.instance_idx].instance_id;
            rec.sample_idx = req.first_sample + dup;
            rec.raw_response = res.failed ? std::string() : res.response;
            rec.transport_failed = res.failed;
            if (res.failed) rec.judge_meta["transport_error"] = res.error;
            if (collapse && dup > 0) rec.judge_meta["collapsed_from_sample"] = 0;
            records.push_back(std::move(rec));
        }
    }
    std::sort(records.begin(), records.end(), record_coord_less);
    return records;
}

double aggregate_metric(const std::vector<EvalRecord>& records,
                        const std::vector<std::string>& instance_ids, int num_generations,
                        const MetricKind& metric) {
    if (instance_ids.empty()) throw DomainError("metric aggregation needs instances");

    std::map<std::string, std::map<int, const EvalRecord*>> by_instance;
    for (const EvalRecord& r : records) {
        if (!by_instance[r.instance_id].emplace(r.sample_idx, &r).second)
            throw IncompleteDataError("duplicate record for instance " + r.instance_id +
                                      " sample " + std::to_string(r.sample_idx));
    }
    for (const std::string& id : instance_ids) {
        auto it = by_instance.find(id);
        for (int s = 0; s < num_generations; ++s) {
            if (it == by_instance.end() || !it->second.count(s))
                throw IncompleteDataError("missing record for instance " + id + " sample " +
                                          std::to_string(s));
        }
    }

    double total = 0.0;
    for (const std::string& id : instance_ids) {
        const auto& samples = by_instance.at(id);
        if (metric.kind == "accuracy") {
            total += samples.at(0)->passed ? 1.0 : 0.0;
        } else if (metric.kind == "pass_at_k") {
            int c = 0;
            for (int s = 0; s < num_generations; ++s)
                if (samples.at(s)->passed) ++c;
            total += pass_at_k(num_generations, c, metric.k);
        } else if (metric.kind == "mean_pass_rate") {
            double sum = 0.0;
            for (int s = 0; s < num_generations; ++s) sum += samples.at(s)->score;
            total += sum / num_generations;
        } else {
            throw ConfigError("unknown metric kind " + metric.kind);
        }
    }
    return total / static_cast<double>(instance_ids.size());
}

std::vector<double> compute_metric_series(const std::vector<EvalRecord>& records,
                                          const std::string& model_id,
                                          const std::vector<std::string>& template_ids,
                                          const std::vector<std::string>& instance_ids,
                                          int num_generations, const MetricKind& metric) {
    std::map<std::string, std::vector<EvalRecord>> by_template;
    for (const EvalRecord& r : records) {
        if (r.model_id != model_id) continue;
        by_template[r.template_id].push_back(r);
    }
    std::vector<double> series;
    series.reserve(template_ids.size());
    for (const std::string& tid : template_ids) {
        auto it = by_template.find(tid);
        if (it == by_template.end())
            throw IncompleteDataError("no records for template " + tid + " of model " + model_id);
        series.push_back(aggregate_metric(it->second, instance_ids, num_generations, metric));
    }
    return series;
}

}  // namespace promptmut
