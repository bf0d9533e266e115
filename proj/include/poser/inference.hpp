#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "poser/prompts.hpp"

namespace poser {

/// Where and how to reach a chat-completion server.
struct InferenceEndpoint {
    std::string base_url;
    std::string model_name;
    std::optional<std::string> api_key;
    std::chrono::milliseconds timeout{120000};
    int max_retries = 3;
    std::size_t concurrency_limit = 8;
    std::chrono::milliseconds backoff_base{500};

    /// Throws ParameterError on an empty URL, non-positive timeout, negative
    /// retries or a zero concurrency limit.
    void validate() const;
};

struct SamplingParams {
    double temperature = 1.0;
    double top_p = 0.99;
    int n = 1;
    int max_tokens = 4096;

    /// Training-rollout regime: temperature 1.0, top_p 0.99.
    static SamplingParams rollout(int n = 1);
    /// Evaluation regime: temperature 0.6, top_p 0.95.
    static SamplingParams evaluation(int n = 1);

    void validate() const;
};

/// Anything that turns a message list into n completion texts.
class CompletionService {
public:
    virtual ~CompletionService() = default;

    /// Returns exactly params.n texts or throws.
    virtual std::vector<std::string> complete(const std::vector<Message>& messages,
                                              const SamplingParams& params) = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// HTTP client for POST {base_url}/chat/completions.
///
/// Transient failures (no response, 408, 429, 5xx) are retried up to
/// max_retries times; the k-th retry waits backoff_base * 2^(k-1). Other
/// statuses fail at once with TransportError. At most concurrency_limit
/// requests are in flight at a time across all threads sharing the client.
/// Short responses are topped up with further requests; extra choices are
/// dropped.
class ChatClient final : public CompletionService {
public:
    explicit ChatClient(InferenceEndpoint endpoint, Sleeper sleeper = {});
    ~ChatClient() override;

    std::vector<std::string> complete(const std::vector<Message>& messages,
                                      const SamplingParams& params) override;

    const InferenceEndpoint& endpoint() const noexcept { return endpoint_; }

private:
    std::vector<std::string> request_once(const std::vector<Message>& messages,
                                          const SamplingParams& params, int n);

    InferenceEndpoint endpoint_;
    Sleeper sleeper_;
    std::string scheme_host_port_;
    std::string path_;
    std::unique_ptr<std::counting_semaphore<>> slots_;
};

/// Convenience wrapper: one-shot client, one call.
std::vector<std::string> sample_completions(const InferenceEndpoint& endpoint,
                                            const std::vector<Message>& messages,
                                            const SamplingParams& params);

}  // namespace poser
