#include "poser/inference.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "poser/error.hpp"

namespace poser {
namespace {

using nlohmann::json;

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

struct Attempt {
    int status = 0;
    std::string body;
};

}  // namespace

void InferenceEndpoint::validate() const {
    if (base_url.empty()) throw ParameterError("endpoint base_url is empty");
    if (timeout.count() <= 0) throw ParameterError("endpoint timeout must be > 0");
    if (max_retries < 0) throw ParameterError("endpoint max_retries must be >= 0");
    if (concurrency_limit == 0) throw ParameterError("endpoint concurrency_limit must be >= 1");
    if (backoff_base.count() < 0) throw ParameterError("endpoint backoff must be >= 0");
}

SamplingParams SamplingParams::rollout(int n) { return SamplingParams{1.0, 0.99, n, 4096}; }

SamplingParams SamplingParams::evaluation(int n) { return SamplingParams{0.6, 0.95, n, 4096}; }

void SamplingParams::validate() const {
    if (!(temperature >= 0.0)) throw ParameterError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ParameterError("top_p must lie in (0, 1]");
    if (n < 1) throw ParameterError("n must be >= 1");
    if (max_tokens < 1) throw ParameterError("max_tokens must be >= 1");
}

ChatClient::ChatClient(InferenceEndpoint endpoint, Sleeper sleeper)
    : endpoint_(std::move(endpoint)), sleeper_(std::move(sleeper)) {
    endpoint_.validate();
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

    const std::string& url = endpoint_.base_url;
    std::size_t scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    std::size_t path_start = url.find('/', host_start);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? std::string() : url.substr(path_start);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";

    slots_ = std::make_unique<std::counting_semaphore<>>(
        static_cast<std::ptrdiff_t>(endpoint_.concurrency_limit));
}

ChatClient::~ChatClient() = default;

std::vector<std::string> ChatClient::request_once(const std::vector<Message>& messages,
                                                  const SamplingParams& params, int n) {
    json body;
    body["model"] = endpoint_.model_name;
    body["messages"] = json::array();
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    body["n"] = n;
    body["max_tokens"] = params.max_tokens;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (endpoint_.api_key) headers.emplace("Authorization", "Bearer " + *endpoint_.api_key);

    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - secs);

    Attempt last;
    const int max_attempts = endpoint_.max_retries + 1;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) sleeper_(endpoint_.backoff_base * (1LL << (attempt - 2)));
        {
            slots_->acquire();
            struct Release {
                std::counting_semaphore<>* s;
                ~Release() { s->release(); }
            } release{slots_.get()};

            httplib::Client client(scheme_host_port_);
            client.set_connection_timeout(secs.count(), usecs.count());
            client.set_read_timeout(secs.count(), usecs.count());
            client.set_write_timeout(secs.count(), usecs.count());
            auto res = client.Post(path_, headers, payload, "application/json");
            last = res ? Attempt{res->status, res->body} : Attempt{0, httplib::to_string(res.error())};
        }
        if (last.status == 200) break;
        if (!retryable(last.status) || attempt == max_attempts) {
            std::string what = last.status == 0 ? "connection failed: " + last.body
                                                : "HTTP " + std::to_string(last.status);
            throw TransportError(what, last.status, attempt);
        }
    }

    json parsed = json::parse(last.body, nullptr, false);
    if (parsed.is_discarded()) throw ProtocolError("response body is not JSON");
    if (!parsed.is_object() || !parsed.contains("choices") || !parsed["choices"].is_array()) {
        throw ProtocolError("response has no choices array");
    }
    std::vector<std::string> out;
    for (const auto& choice : parsed["choices"]) {
        if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
            throw ProtocolError("choice has no message");
        }
        const auto& content = choice["message"].value("content", json());
        if (content.is_null()) {
            out.emplace_back();
        } else if (content.is_string()) {
            out.push_back(content.get<std::string>());
        } else {
            throw ProtocolError("message content is not a string");
        }
    }
    return out;
}

std::vector<std::string> ChatClient::complete(const std::vector<Message>& messages,
                                              const SamplingParams& params) {
    params.validate();
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(params.n));
    while (out.size() < static_cast<std::size_t>(params.n)) {
        const int missing = params.n - static_cast<int>(out.size());
        auto batch = request_once(messages, params, missing);
        if (batch.empty()) throw ProtocolError("response has no choices");
        for (auto& text : batch) {
            if (out.size() == static_cast<std::size_t>(params.n)) break;
            out.push_back(std::move(text));
        }
    }
    return out;
}

std::vector<std::string> sample_completions(const InferenceEndpoint& endpoint,
                                            const std::vector<Message>& messages,
                                            const SamplingParams& params) {
    ChatClient client(endpoint);
    return client.complete(messages, params);
}

}  // namespace poser
