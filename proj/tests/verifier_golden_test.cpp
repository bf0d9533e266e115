#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "poser/answer.hpp"

namespace poser {
namespace {

TEST(VerifierGolden, AllCasesMatch) {
    std::ifstream in(std::string(POSER_TEST_DATA) + "/verifier_golden.jsonl");
    ASSERT_TRUE(in) << "golden file missing";
    std::string line;
    int count = 0;
    int positives = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        const std::string response = j["response"];
        const std::string label = j["label"];
        const int expected = j["expected"];
        EXPECT_EQ(verifiable_reward(response, label), expected) << response << " | " << label;
        positives += expected;
        ++count;
    }
    EXPECT_EQ(count, 200);
    EXPECT_GT(positives, 50);
}

}  // namespace
}  // namespace poser
