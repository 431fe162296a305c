#include "promptmut/clients.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "promptmut/errors.hpp"

namespace promptmut {

namespace {

// POSTs a JSON body, retrying transient failures, and returns the parsed JSON
// response. Throws ClientError once the retry budget is spent.
json post_json(const HttpClientConfig& config, const std::string& path, const json& body) {
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= config.retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(250 * attempt));
        httplib::Client cli(config.base_url);
        cli.set_connection_timeout(config.timeout_s);
        cli.set_read_timeout(config.timeout_s);
        httplib::Headers headers;
        if (!config.api_key_env.empty()) {
            const char* key = std::getenv(config.api_key_env.c_str());
            if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
        }
        auto res = cli.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded()) {
            last_error = "response body is not JSON";
            continue;
        }
        return parsed;
    }
    throw ClientError(config.base_url + path + ": " + last_error);
}

std::string extract_chat_content(const json& response) {
    if (response.contains("choices") && response["choices"].is_array() &&
        !response["choices"].empty()) {
        const json& choice = response["choices"][0];
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string())
            return choice["message"]["content"].get<std::string>();
        if (choice.contains("text") && choice["text"].is_string())
            return choice["text"].get<std::string>();
    }
    throw ClientError("chat response carries no completion text");
}

}  // namespace

std::string HttpMutatorClient::complete(const std::string& prompt, const DecodeParams& params) {
    json body = {{"model", config_.model},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", params.temperature},
                 {"max_tokens", params.max_new_tokens},
                 {"n", 1}};
    return extract_chat_content(post_json(config_, "/v1/chat/completions", body));
}

ReplayMutatorClient ReplayMutatorClient::from_file(const std::string& path) {
    std::vector<std::string> responses;
    for (const json& row : read_jsonl(path)) {
        if (!row.is_object() || !row.contains("response") || !row["response"].is_string())
            throw ConfigError("mutator transcript rows need a string response field");
        responses.push_back(row["response"].get<std::string>());
    }
    return ReplayMutatorClient(std::move(responses));
}

std::string ReplayMutatorClient::complete(const std::string&, const DecodeParams&) {
    if (next_ >= responses_.size())
        throw ClientError("mutator transcript exhausted after " + std::to_string(next_) +
                          " responses");
    return responses_[next_++];
}

std::string coord_key(const std::string& model_id, const std::string& template_id,
                      const std::string& instance_id, int sample_idx) {
    return model_id + "\x1f" + template_id + "\x1f" + instance_id + "\x1f" +
           std::to_string(sample_idx);
}

std::string HttpInferenceClient::complete(const RequestCoord& coord, const std::string& prompt,
                                          const SamplingParams& params) {
    json body = {{"model", coord.model_id.empty() ? config_.model : coord.model_id},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", params.temperature},
                 {"max_tokens", params.max_new_tokens},
                 {"n", 1}};
    return extract_chat_content(post_json(config_, "/v1/chat/completions", body));
}

ReplayInferenceClient ReplayInferenceClient::from_file(const std::string& path) {
    return from_rows(read_jsonl(path));
}

ReplayInferenceClient ReplayInferenceClient::from_rows(const std::vector<json>& rows) {
    ReplayInferenceClient client;
    for (const json& row : rows) {
        if (!row.is_object() || !row.contains("response") || !row["response"].is_string())
            throw ConfigError("inference transcript rows need a string response field");
        std::string response = row["response"].get<std::string>();
        if (row.value("default", false)) {
            client.has_default_ = true;
            client.default_response_ = std::move(response);
            continue;
        }
        if (!row.contains("template_id") || !row.contains("instance_id") ||
            !row.contains("sample_idx"))
            throw ConfigError(
                "inference transcript rows need template_id, instance_id, sample_idx");
        std::string key = coord_key(row.value("model_id", std::string()),
                                    row["template_id"].get<std::string>(),
                                    row["instance_id"].get<std::string>(),
                                    row["sample_idx"].get<int>());
        client.by_key_[key] = std::move(response);
    }
    return client;
}

std::string ReplayInferenceClient::complete(const RequestCoord& coord, const std::string&,
                                            const SamplingParams&) {
    auto it = by_key_.find(
        coord_key(coord.model_id, coord.template_id, coord.instance_id, coord.sample_idx));
    if (it != by_key_.end()) return it->second;
    it = by_key_.find(coord_key("", coord.template_id, coord.instance_id, coord.sample_idx));
    if (it != by_key_.end()) return it->second;
    if (has_default_) return default_response_;
    throw ClientError("no transcript entry for " + coord.model_id + "/" + coord.template_id +
                      "/" + coord.instance_id + "#" + std::to_string(coord.sample_idx));
}

std::vector<double> HttpEmbeddingClient::embed(const std::string& text) {
    json body = {{"model", config_.model}, {"input", json::array({text})}};
    json response = post_json(config_, "/v1/embeddings", body);
    if (response.contains("data") && response["data"].is_array() && !response["data"].empty() &&
        response["data"][0].contains("embedding") &&
        response["data"][0]["embedding"].is_array()) {
        return response["data"][0]["embedding"].get<std::vector<double>>();
    }
    throw ClientError("embedding response carries no vector");
}

}  // namespace promptmut
