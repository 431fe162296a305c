#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "promptmut/jsonio.hpp"
#include "promptmut/validation.hpp"

namespace promptmut {

struct DecodeParams {
    double temperature = 0.7;
    int max_new_tokens = 512;
};

struct SamplingParams {
    double temperature = 0.0;
    int max_new_tokens = 256;
    int num_generations = 1;
};

// Transport configuration shared by the HTTP clients. Credentials are looked
// up from the named environment variable at request time and never persisted.
struct HttpClientConfig {
    std::string base_url;
    std::string model;
    std::string api_key_env;
    int retries = 2;
    int timeout_s = 120;
};

class MutatorClient {
public:
    virtual ~MutatorClient() = default;
    // Returns raw completion text; throws ClientError after exhausting retries.
    virtual std::string complete(const std::string& prompt, const DecodeParams& params) = 0;
};

// Chat-completions endpoint client.
class HttpMutatorClient : public MutatorClient {
public:
    explicit HttpMutatorClient(HttpClientConfig config) : config_(std::move(config)) {}
    std::string complete(const std::string& prompt, const DecodeParams& params) override;

private:
    HttpClientConfig config_;
};

// Replays canned responses in request order from a transcript: one JSON object
// per line with a "response" field. Running past the end raises ClientError.
class ReplayMutatorClient : public MutatorClient {
public:
    explicit ReplayMutatorClient(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}
    static ReplayMutatorClient from_file(const std::string& path);
    std::string complete(const std::string& prompt, const DecodeParams& params) override;
    std::size_t consumed() const { return next_; }

private:
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

// Adapter for scripted tests: delegates to a callable and lets the script see
// each prompt.
class FunctionMutatorClient : public MutatorClient {
public:
    using Fn = std::function<std::string(const std::string&)>;
    explicit FunctionMutatorClient(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const std::string& prompt, const DecodeParams&) override {
        return fn_(prompt);
    }

private:
    Fn fn_;
};

struct RequestCoord {
    std::string model_id;
    std::string template_id;
    std::string instance_id;
    int sample_idx = 0;
};

class InferenceClient {
public:
    virtual ~InferenceClient() = default;
    // One sample per call; the coordinate identifies the request for replay
    // transports and diagnostics. Throws ClientError after retries.
    virtual std::string complete(const RequestCoord& coord, const std::string& prompt,
                                 const SamplingParams& params) = 0;
};

class HttpInferenceClient : public InferenceClient {
public:
    explicit HttpInferenceClient(HttpClientConfig config) : config_(std::move(config)) {}
    std::string complete(const RequestCoord& coord, const std::string& prompt,
                         const SamplingParams& params) override;

private:
    HttpClientConfig config_;
};

// Keyed replay from a transcript of lines carrying template_id, instance_id,
// sample_idx, optional model_id, and response. A line with "default": true
// answers any coordinate that has no specific entry; with no match at all the
// request counts as a transport failure (ClientError).
class ReplayInferenceClient : public InferenceClient {
public:
    static ReplayInferenceClient from_file(const std::string& path);
    static ReplayInferenceClient from_rows(const std::vector<json>& rows);
    std::string complete(const RequestCoord& coord, const std::string& prompt,
                         const SamplingParams& params) override;

private:
    std::map<std::string, std::string> by_key_;
    bool has_default_ = false;
    std::string default_response_;
};

class HttpEmbeddingClient : public EmbeddingClient {
public:
    explicit HttpEmbeddingClient(HttpClientConfig config) : config_(std::move(config)) {}
    std::vector<double> embed(const std::string& text) override;

private:
    HttpClientConfig config_;
};

// Key used by the replay inference/oracle maps: model and sample-specific
// entries take precedence over wildcard ones.
std::string coord_key(const std::string& model_id, const std::string& template_id,
                      const std::string& instance_id, int sample_idx);

}  // namespace promptmut
