#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "poser/cli.hpp"
#include "poser/error.hpp"
#include "support/mock_server.hpp"

namespace poser {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "poser");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "poser_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& body) { std::ofstream(p) << body; }

std::string read(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

TEST(Cli, GradeScoresAndFlags) {
    auto d = scratch("grade");
    write(d / "answers.jsonl",
          "{\"id\": \"1\", \"response\": \"so \\\\boxed{\\\\frac{1}{2}}\"}\n"
          "{\"id\": \"2\", \"response\": \"I give up\"}\n");
    write(d / "labels.jsonl", "{\"id\": \"1\", \"answer\": \"0.5\"}\n{\"id\": \"2\", \"answer\": \"3\"}\n");
    auto r = run({"grade", (d / "answers.jsonl").string(), (d / "labels.jsonl").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "1\t1\n2\t0\tno boxed answer\naccuracy: 50.00\n");
}

TEST(Cli, GradeIdMismatch) {
    auto d = scratch("mismatch");
    write(d / "a.jsonl", "{\"id\": \"1\", \"response\": \"\\\\boxed{1}\"}\n");
    write(d / "l.jsonl", "{\"id\": \"2\", \"answer\": \"1\"}\n");
    auto r = run({"grade", (d / "a.jsonl").string(), (d / "l.jsonl").string()});
    EXPECT_EQ(r.code, 2);
    auto e = json::parse(r.err);
    EXPECT_EQ(e["kind"], "parse");
}

TEST(Cli, UsageErrors) {
    auto r = run({"grade"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["kind"], "usage");
    r = run({"simulate", "--reward-mode", "nope"});
    EXPECT_EQ(r.code, 2);
    r = run({"--config", "/nonexistent.ini", "simulate"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["kind"], "io");
    r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("synthesize"), std::string::npos);
}

TEST(Cli, SimulateWritesCsvAndSummary) {
    auto d = scratch("sim");
    auto r = run({"--seed", "3", "simulate", "--steps", "60", "--csv", (d / "e.csv").string(), "--jsonl",
                  (d / "e.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto summary = json::parse(r.out);
    EXPECT_EQ(summary["steps"], 60);
    EXPECT_EQ(summary["reward_mode"], "full");
    EXPECT_GT(summary["consistency_correlation"].get<double>(), 0.8);
    auto csv = read(d / "e.csv");
    EXPECT_EQ(csv.rfind("# schema_version=1 config_hash=", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 62);
    auto first = json::parse(read(d / "e.jsonl").substr(0, read(d / "e.jsonl").find('\n')));
    EXPECT_EQ(first["schema_version"], 1);
    EXPECT_EQ(first["config_hash"], summary["config_hash"]);
}

TEST(Cli, SynthesizeEndToEndAndResume) {
    testing::MockServer server([](const json& req, std::size_t) {
        const std::string prompt = req["messages"].back()["content"];
        const int n = req.value("n", 1);
        std::vector<std::string> texts;
        for (int i = 0; i < n; ++i) {
            if (prompt.find("create a novel") != std::string::npos) {
                texts.push_back("<think>plan</think><question>What is 6*7?</question>");
            } else if (prompt.find("6*7") != std::string::npos) {
                texts.push_back(i % 2 == 0 ? "\\boxed{42}" : "\\boxed{41}");
            } else {
                texts.push_back(i < 3 ? "\\boxed{4}" : "\\boxed{" + std::to_string(i + 10) + "}");
            }
        }
        return testing::MockReply{200, texts, {}, {}};
    });
    auto d = scratch("synth");
    write(d / "cfg.ini", "[generator]\nbase_url = " + server.base_url() + "\n[solver]\nbase_url = " +
                             server.base_url() + "\n[annotator]\nbase_url = " + server.base_url() + "\n");
    write(d / "seeds.jsonl",
          "{\"id\": \"a\", \"question\": \"What is 2+2?\", \"answer\": \"4\"}\n"
          "{\"id\": \"b\", \"question\": \"What is 1+3?\", \"answer\": \"4\"}\n");
    const std::vector<std::string> args{"--config", (d / "cfg.ini").string(), "synthesize",
                                        "--seeds", (d / "seeds.jsonl").string(),
                                        "--records", (d / "records.jsonl").string(),
                                        "--training-set", (d / "train.jsonl").string(),
                                        "--manifest", (d / "manifest.json").string()};
    auto r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    auto manifest = json::parse(read(d / "manifest.json"));
    EXPECT_EQ(manifest["counts"]["seeds"], 2);
    EXPECT_EQ(manifest["counts"]["valid"], 2);
    EXPECT_EQ(manifest["counts"]["kept"], 2);
    EXPECT_EQ(manifest["counts"]["training_set"], 3);
    const auto before = server.requests();
    r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(server.requests(), before);

    r = run({"--config", (d / "cfg.ini").string(), "report", "--records", (d / "records.jsonl").string(),
             "--csv", (d / "report.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto summary = json::parse(r.out);
    EXPECT_EQ(summary["records"], 2);
    EXPECT_EQ(summary["reward_mismatches"], 0);
    EXPECT_NEAR(summary["flip_success_rate"].get<double>(), 1.0, 1e-12);
}

TEST(Cli, CorpusBuildsSftRecords) {
    testing::MockServer server(testing::MockServer::constant("Start from the derivative; change the condition."));
    auto d = scratch("corpus");
    write(d / "cfg.ini", "[annotator]\nbase_url = " + server.base_url() + "\n");
    write(d / "raw.jsonl",
          "{\"id\": \"q1\", \"text\": \"Let f(x) = x^3 - 3x. (1) Find f'(x). (2) Find the local maxima of f.\"}\n"
          "{\"id\": \"q2\", \"text\": \"Prove that sqrt 2 is irrational, using contradiction.\"}\n"
          "not json\n"
          "{\"id\": \"q3\", \"text\": \"Compute the value of 17 * 23 without a calculator.\"}\n");
    auto r = run({"--config", (d / "cfg.ini").string(), "corpus", "--input", (d / "raw.jsonl").string(),
                  "--output", (d / "sft.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto report = json::parse(r.out);
    EXPECT_EQ(report["items"], 3);
    EXPECT_EQ(report["pairs"], 1);
    EXPECT_EQ(report["records"], 1);
    EXPECT_EQ(report["not_multipart"], 1);
    EXPECT_EQ(report["malformed_lines"], json::array({3}));
    auto rec = json::parse(read(d / "sft.jsonl"));
    EXPECT_EQ(rec["pair_id"], "q1#1");
    EXPECT_NE(rec["target"].get<std::string>().find("<question>Let f(x) = x^3 - 3x. Find the local maxima of f.</question>"),
              std::string::npos);
}

TEST(RunManifest, Validation) {
    RunManifest m;
    m.seeds = 3;
    m.valid = 2;
    m.kept = 1;
    EXPECT_NO_THROW(m.validate());
    m.kept = 3;
    EXPECT_THROW(m.validate(), ParameterError);
    EXPECT_EQ(utc_timestamp().size(), 20u);
}

}  // namespace
}  // namespace poser
