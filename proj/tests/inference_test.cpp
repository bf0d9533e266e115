#include <chrono>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>

#include "poser/error.hpp"
#include "poser/inference.hpp"
#include "poser/orchestrator.hpp"
#include "support/mock_server.hpp"

namespace poser {
namespace {

using testing::MockReply;
using testing::MockServer;
using namespace std::chrono_literals;

InferenceEndpoint endpoint_for(const MockServer& server) {
    InferenceEndpoint ep;
    ep.base_url = server.base_url();
    ep.model_name = "mock-model";
    ep.timeout = 5000ms;
    ep.backoff_base = 10ms;
    return ep;
}

struct SleepLog {
    std::mutex mu;
    std::vector<std::chrono::milliseconds> waits;
    Sleeper sleeper() {
        return [this](std::chrono::milliseconds d) {
            std::lock_guard lock(mu);
            waits.push_back(d);
        };
    }
};

const std::vector<Message> kMessages{{"user", "hi"}};

TEST(SamplingParams, Regimes) {
    auto r = SamplingParams::rollout(4);
    EXPECT_DOUBLE_EQ(r.temperature, 1.0);
    EXPECT_DOUBLE_EQ(r.top_p, 0.99);
    EXPECT_EQ(r.n, 4);
    auto e = SamplingParams::evaluation();
    EXPECT_DOUBLE_EQ(e.temperature, 0.6);
    EXPECT_DOUBLE_EQ(e.top_p, 0.95);
    EXPECT_THROW(SamplingParams::rollout(0).validate(), ParameterError);
}

TEST(InferenceEndpoint, Validation) {
    InferenceEndpoint ep;
    EXPECT_THROW(ep.validate(), ParameterError);
    ep.base_url = "http://localhost";
    EXPECT_NO_THROW(ep.validate());
    ep.concurrency_limit = 0;
    EXPECT_THROW(ep.validate(), ParameterError);
}

TEST(ChatClient, ReturnsExactlyNAndSendsParams) {
    MockServer server(MockServer::constant("\\boxed{4}"));
    auto ep = endpoint_for(server);
    ep.api_key = "secret";
    ChatClient client(ep);
    auto out = client.complete(kMessages, SamplingParams::rollout(5));
    ASSERT_EQ(out.size(), 5u);
    for (const auto& s : out) EXPECT_EQ(s, "\\boxed{4}");
    auto bodies = server.bodies();
    ASSERT_EQ(bodies.size(), 1u);
    EXPECT_EQ(bodies[0]["model"], "mock-model");
    EXPECT_EQ(bodies[0]["n"], 5);
    EXPECT_DOUBLE_EQ(bodies[0]["top_p"].get<double>(), 0.99);
    EXPECT_EQ(bodies[0]["messages"][0]["content"], "hi");
}

TEST(ChatClient, TopsUpShortResponses) {
    MockServer server([](const nlohmann::json& req, std::size_t) {
        const int n = req.value("n", 1);
        return MockReply{200, std::vector<std::string>(static_cast<std::size_t>(std::min(n, 3)), "x"), {}, {}};
    });
    ChatClient client(endpoint_for(server));
    auto out = client.complete(kMessages, SamplingParams::rollout(8));
    EXPECT_EQ(out.size(), 8u);
    EXPECT_EQ(server.requests(), 3u);
    EXPECT_EQ(server.total_n(), 8u + 5u + 2u);
}

TEST(ChatClient, DropsExtraChoices) {
    MockServer server([](const nlohmann::json&, std::size_t) {
        return MockReply{200, {"a", "b", "c"}, {}, {}};
    });
    ChatClient client(endpoint_for(server));
    EXPECT_EQ(client.complete(kMessages, SamplingParams::rollout(2)), (std::vector<std::string>{"a", "b"}));
}

TEST(ChatClient, RetriesTransientWithBackoff) {
    MockServer server([](const nlohmann::json&, std::size_t i) {
        if (i < 2) return MockReply{429, {}, "{}", {}};
        return MockReply{200, {"ok"}, {}, {}};
    });
    SleepLog log;
    ChatClient client(endpoint_for(server), log.sleeper());
    auto out = client.complete(kMessages, SamplingParams::rollout(1));
    EXPECT_EQ(out, std::vector<std::string>{"ok"});
    EXPECT_EQ(server.requests(), 3u);
    EXPECT_EQ(log.waits, (std::vector<std::chrono::milliseconds>{10ms, 20ms}));
}

TEST(ChatClient, GivesUpAfterMaxRetries) {
    MockServer server([](const nlohmann::json&, std::size_t) { return MockReply{500, {}, "{}", {}}; });
    auto ep = endpoint_for(server);
    ep.max_retries = 2;
    SleepLog log;
    ChatClient client(ep, log.sleeper());
    try {
        client.complete(kMessages, SamplingParams::rollout(1));
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.status(), 500);
        EXPECT_EQ(e.attempts(), 3);
    }
    EXPECT_EQ(server.requests(), 3u);
    EXPECT_EQ(log.waits.size(), 2u);
}

TEST(ChatClient, NonRetryableFailsAtOnce) {
    MockServer server([](const nlohmann::json&, std::size_t) { return MockReply{401, {}, "{}", {}}; });
    SleepLog log;
    ChatClient client(endpoint_for(server), log.sleeper());
    try {
        client.complete(kMessages, SamplingParams::rollout(1));
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.status(), 401);
        EXPECT_EQ(e.attempts(), 1);
    }
    EXPECT_TRUE(log.waits.empty());
}

TEST(ChatClient, ConnectionRefusedIsTransport) {
    InferenceEndpoint ep;
    {
        MockServer server(MockServer::constant("x"));
        ep = endpoint_for(server);
    }
    ep.max_retries = 1;
    SleepLog log;
    ChatClient client(ep, log.sleeper());
    try {
        client.complete(kMessages, SamplingParams::rollout(1));
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.status(), 0);
        EXPECT_EQ(e.attempts(), 2);
    }
}

TEST(ChatClient, MalformedBodyIsProtocolError) {
    for (std::string body : {"not json", "{\"choices\": 3}", "{\"choices\": [{}]}",
                             "{\"choices\": [{\"message\": {\"content\": 7}}]}", "{\"choices\": []}"}) {
        MockServer server([body](const nlohmann::json&, std::size_t) { return MockReply{200, {}, body, {}}; });
        ChatClient client(endpoint_for(server));
        EXPECT_THROW(client.complete(kMessages, SamplingParams::rollout(1)), ProtocolError) << body;
    }
}

TEST(ChatClient, ConcurrencyCeiling) {
    MockServer server([](const nlohmann::json& req, std::size_t) {
        return MockReply{200, std::vector<std::string>(req.value("n", 1), "x"), {}, 30ms};
    });
    auto ep = endpoint_for(server);
    ep.concurrency_limit = 3;
    ChatClient client(ep);
    parallel_for(24, 12, [&](std::size_t) { client.complete(kMessages, SamplingParams::rollout(1)); });
    EXPECT_EQ(server.requests(), 24u);
    EXPECT_LE(server.max_in_flight(), 3);
    EXPECT_GE(server.max_in_flight(), 2);
}

TEST(SampleCompletions, OneShot) {
    MockServer server(MockServer::constant("y"));
    auto out = sample_completions(endpoint_for(server), kMessages, SamplingParams::evaluation(2));
    EXPECT_EQ(out.size(), 2u);
    EXPECT_DOUBLE_EQ(server.bodies()[0]["temperature"].get<double>(), 0.6);
}

}  // namespace
}  // namespace poser
