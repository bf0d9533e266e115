// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "poser/answer.hpp"
#include "poser/consistency.hpp"
#include "poser/error.hpp"
#include "poser/grpo.hpp"
#include "poser/inference.hpp"
#include "poser/orchestrator.hpp"
#include "poser/records.hpp"
#include "poser/reward.hpp"
#include "poser/sim.hpp"
#include "support/mock_server.hpp"

namespace {

using namespace poser;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

// ---------------------------------------------------------------- 1

Outcome reward_geometry() {
    Outcome o;
    for (int i = 0; i <= 10; ++i) {
        const double a_ori = i / 10.0;
        const double t = 1.0 - a_ori;
        const double lo = std::min(t, 0.5);
        const double hi = std::max(t, 0.5);
        const double peak = 1.0 + std::min(a_ori, 1.0 - a_ori);
        double best = -1.0;
        for (int j = 0; j <= 100; ++j) {
            const double a_new = j / 100.0;
            const double r = accuracy_reward({a_ori, a_new});
            best = std::max(best, r);
            const bool inside = a_new >= lo - 1e-12 && a_new <= hi + 1e-12;
            if (inside) {
                o.require(std::abs(r - peak) <= 1e-12, "value off the plateau inside the interval");
            } else {
                o.require(r < peak - 1e-12, "plateau value reached outside the interval");
            }
        }
        o.require(std::abs(best - peak) <= 1e-12, "grid maximum differs from 1 + min(a_ori, 1 - a_ori)");
    }
    return o;
}

// ---------------------------------------------------------------- 2

std::optional<std::string> oracle_question(const std::string& s) {
    static const std::regex block(R"(<question>((?:(?!<question>)[\s\S])*?)</question>)");
    for (auto it = std::sregex_iterator(s.begin(), s.end(), block); it != std::sregex_iterator(); ++it) {
        std::string body = (*it)[1].str();
        const auto b = body.find_first_not_of(" \t\r\n\v\f");
        if (b == std::string::npos) continue;
        const auto e = body.find_last_not_of(" \t\r\n\v\f");
        return body.substr(b, e - b + 1);
    }
    return std::nullopt;
}

int oracle_format(const std::string& s) {
    static const std::string n = R"((?:(?!</?think>|</?question>)[\s\S]))";
    static const std::regex strict("^" + n + "*<think>" + n + "*</think>" + n + "*<question>" + n +
                                   "*</question>\\s*$");
    return std::regex_match(s, strict) ? 1 : 0;
}

Outcome generator_gating() {
    Outcome o;
    std::mt19937_64 rng(2024);
    const std::vector<std::string> atoms = {"<think>", "</think>", "<question>", "</question>", "<questio",
                                            "question>", "Find x.", "plan", " ", "\n", "2+2=?", "<q>"};
    std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
    std::uniform_int_distribution<int> len(0, 12);
    std::uniform_int_distribution<int> grid(0, 20);
    int valid_seen = 0;
    int formatted_seen = 0;
    for (int i = 0; i < 1000; ++i) {
        std::string s;
        if (i % 4 == 0) {
            s = "<think>plan</think><question>Q" + std::to_string(i) + "</question>";
            if (i % 8 == 0) s += atoms[pick(rng)];
        } else {
            const int k = len(rng);
            for (int j = 0; j < k; ++j) s += atoms[pick(rng)];
        }
        const AccuracyPair pair(grid(rng) / 20.0, grid(rng) / 20.0);
        const FormatCheck fmt = check_format(s);
        const auto oracle_q = oracle_question(s);
        o.require(fmt.valid == oracle_q.has_value(), "validity disagrees with regex oracle");
        o.require(fmt.question == oracle_q, "extracted question disagrees with regex oracle");
        const int rf = oracle_q ? oracle_format(s) : 0;
        o.require(fmt.r_format == rf, "format bit disagrees with regex oracle");
        const RewardBreakdown r = fmt.valid ? generator_reward(pair, fmt.r_format)
                                            : generator_reward(false, 0.0, 0);
        if (!oracle_q) {
            o.require(r.r_gen == -1.0, "invalid output not scored -1");
        } else {
            ++valid_seen;
            formatted_seen += rf;
            const double r_acc = 1.0 - std::abs(pair.a_new() - (1.0 - pair.a_ori())) +
                                 std::min(pair.a_new(), 1.0 - pair.a_new());
            o.require(r.r_gen == 0.9 * r_acc + 0.1 * rf, "valid output reward mismatch");
        }
    }
    o.require(valid_seen > 100 && formatted_seen > 50 && valid_seen < 1000, "fuzzer lacks coverage");
    return o;
}

// ---------------------------------------------------------------- 3

Outcome hoeffding_soundness() {
    Outcome o;
    SyntheticSolver solver;
    const auto tasks = spread_tasks(solver, 500, 0.05, 0.95);
    const double c1 = hoeffding_coverage(solver, tasks, 10, 0.1, 10000, 11);
    const double c2 = hoeffding_coverage(solver, tasks, 50, 0.05, 10000, 12);
    o.require(c1 >= 0.9, "coverage at m=10 below 0.9");
    o.require(c2 >= 0.95, "coverage at m=50 below 0.95");
    std::ostringstream d;
    d << "coverage " << c1 << " / " << c2;
    if (o.pass) o.detail = d.str();
    return o;
}

// ---------------------------------------------------------------- 4

Outcome consistency_correlation() {
    Outcome o;
    SyntheticSolver solver;
    const auto tasks = spread_tasks(solver, 500, 0.05, 0.95);
    const double r10 = correlation_study(solver, tasks, 10, 21);
    const double r200 = correlation_study(solver, tasks, 200, 21);
    o.require(r10 >= 0.85, "Pearson at m=10 below 0.85");
    o.require(r200 >= r10, "correlation does not grow with m");
    std::ostringstream d;
    d << "pearson m=10 " << r10 << ", m=200 " << r200;
    if (o.pass) o.detail = d.str();
    return o;
}

// ---------------------------------------------------------------- 5

bool near_kink(double ratio, const ClipConfig& c) {
    return std::abs(ratio - (1.0 - c.eps_low)) < 1e-4 || std::abs(ratio - (1.0 + c.eps_high)) < 1e-4;
}

Outcome grpo_math() {
    Outcome o;
    const ClipConfig cfg;
    const double levels[3] = {0.0, 0.5, 1.0};
    for (std::size_t g = 2; g <= 5; ++g) {
        std::size_t combos = 1;
        for (std::size_t k = 0; k < g; ++k) combos *= 3;
        for (std::size_t code = 0; code < combos; ++code) {
            std::vector<double> r(g);
            std::size_t c = code;
            for (auto& v : r) {
                v = levels[c % 3];
                c /= 3;
            }
            const auto adv = group_advantages(r, cfg.eps_std);
            double sum = 0.0;
            for (double a : adv) sum += a;
            o.require(std::abs(sum) <= 1e-10, "advantages do not sum to zero");
            double mean = 0.0;
            for (double v : r) mean += v;
            mean /= static_cast<double>(g);
            double var = 0.0;
            for (double v : r) var += (v - mean) * (v - mean);
            const double sd = std::max(std::sqrt(var / static_cast<double>(g)), cfg.eps_std);
            for (std::size_t i = 0; i < g; ++i) {
                const double expected = var == 0.0 ? 0.0 : (r[i] - mean) / sd;
                o.require(std::abs(adv[i] - expected) <= 1e-12, "advantage differs from hand oracle");
                if (var == 0.0) o.require(adv[i] == 0.0, "flat group not exactly zero");
            }
        }
    }

    struct Row {
        double ratio;
        double adv;
        double expected;
    };
    for (const Row& row : {Row{1.5, 1.0, 1.28}, Row{1.0, 0.37, 0.37}, Row{1.0, -2.5, -2.5}, Row{0.5, -1.0, -0.8}}) {
        o.require(clipped_surrogate(row.ratio, row.adv, cfg) == row.expected, "surrogate table mismatch");
    }

    std::mt19937_64 rng(99);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    int checked = 0;
    double worst = 0.0;
    while (checked < 100) {
        const std::size_t obs = 1 + static_cast<std::size_t>(u01(rng) * 3);
        const std::size_t acts = 2 + static_cast<std::size_t>(u01(rng) * 5);
        std::vector<double> old_l(obs * acts);
        std::vector<double> ref_l(obs * acts);
        for (auto& v : old_l) v = n01(rng);
        for (auto& v : ref_l) v = n01(rng);
        const ToyPolicy old(obs, acts, old_l);
        const ToyPolicy ref(obs, acts, ref_l);
        std::vector<double> cur_l = old_l;
        for (auto& v : cur_l) v += 0.3 * n01(rng);
        const ToyPolicy cur(obs, acts, cur_l);
        ClipConfig c = cfg;
        c.kl_coeff = 0.1 * u01(rng);
        PolicyBatch batch(1 + static_cast<std::size_t>(u01(rng) * 3));
        bool kink = false;
        for (auto& group : batch) {
            const std::size_t size = 2 + static_cast<std::size_t>(u01(rng) * 4);
            std::vector<double> rewards(size);
            for (auto& rw : rewards) rw = u01(rng);
            const auto adv = group_advantages(rewards, c.eps_std);
            for (std::size_t i = 0; i < size; ++i) {
                const std::size_t ob = static_cast<std::size_t>(u01(rng) * static_cast<double>(obs));
                const std::size_t a = old.sample(ob, u01(rng));
                const double lp_old = old.log_prob(ob, a);
                kink = kink || near_kink(importance_ratio(cur.log_prob(ob, a), lp_old), c);
                group.push_back({ob, a, adv[i], lp_old});
            }
        }
        if (kink) continue;
        const auto grad = toy_gradient(cur, ref, batch, c);
        for (std::size_t k = 0; k < cur_l.size(); ++k) {
            ToyPolicy plus = cur;
            ToyPolicy minus = cur;
            plus.logits()[k] += 1e-6;
            minus.logits()[k] -= 1e-6;
            const double fd = (toy_objective(plus, ref, batch, c) - toy_objective(minus, ref, batch, c)) / 2e-6;
            const double rel = std::abs(grad[k] - fd) / std::max({std::abs(grad[k]), std::abs(fd), 1e-4});
            worst = std::max(worst, rel);
        }
        ++checked;
    }
    o.require(worst <= 1e-5, "finite-difference gradient mismatch");
    std::ostringstream d;
    d << "worst gradient rel. error " << worst;
    if (o.pass) o.detail = d.str();
    return o;
}

// ---------------------------------------------------------------- 6, 7, 10

std::vector<double> window_means(const CoevolutionResult& r, double EpisodeLog::*field) {
    std::vector<double> values;
    for (const auto& e : r.log) values.push_back(e.*field);
    std::vector<double> out;
    for (std::size_t b = 0; b + kMetricWindow <= values.size(); b += kMetricWindow) {
        out.push_back(window_mean(values, b, kMetricWindow));
    }
    return out;
}

Outcome training_dynamics() {
    Outcome o;
    CoevolutionConfig cfg;
    const auto r = run_coevolution(cfg, RewardMode::full);
    const auto reward = window_means(r, &EpisodeLog::mean_reward);
    const auto flips = window_means(r, &EpisodeLog::flip_success_rate);
    const auto change = window_means(r, &EpisodeLog::mean_difficulty_change);
    o.require(reward.size() == 8, "expected 8 windows");
    for (std::size_t i = 1; i < reward.size(); ++i) {
        o.require(reward[i] > reward[i - 1], "windowed reward not strictly increasing");
    }
    o.require(flips.back() >= flips.front() + 0.1, "flip rate did not rise by 0.1");
    o.require(change.back() <= change.front(), "difficulty change did not fall");
    std::ostringstream d;
    d << "reward " << reward.front() << " -> " << reward.back() << ", flips " << flips.front() << " -> "
      << flips.back() << ", change " << change.front() << " -> " << change.back();
    if (o.pass) o.detail = d.str();
    return o;
}

Outcome reward_ablation() {
    Outcome o;
    CoevolutionConfig cfg;
    auto tail = [&](RewardMode mode) {
        return window_means(run_coevolution(cfg, mode), &EpisodeLog::mean_plateau_distance).back();
    };
    const double full = tail(RewardMode::full);
    const double boundary = tail(RewardMode::boundary_only);
    const double inversion = tail(RewardMode::inversion_only);
    o.require(full < boundary, "full not below boundary-only");
    o.require(full < inversion, "full not below inversion-only");
    std::ostringstream d;
    d << "plateau distance full " << full << ", boundary " << boundary << ", inversion " << inversion;
    if (o.pass) o.detail = d.str();
    return o;
}

Outcome coevolution() {
    Outcome o;
    CoevolutionConfig cfg;
    cfg.iterations = 3;
    cfg.steps = 100;
    const auto r = run_coevolution(cfg, RewardMode::full);
    o.require(r.competence.size() == 4 && r.iteration_final_reward.size() == 3, "wrong iteration count");
    for (std::size_t i = 1; i < r.competence.size(); ++i) {
        o.require(r.competence[i] >= r.competence[i - 1], "competence decreased");
    }
    for (std::size_t i = 1; i < r.iteration_final_reward.size(); ++i) {
        o.require(r.iteration_final_reward[i] >= r.iteration_final_reward[i - 1], "final reward decreased");
    }
    std::ostringstream d;
    d << "competence";
    for (double c : r.competence) d << ' ' << c;
    d << "; final reward";
    for (double v : r.iteration_final_reward) d << ' ' << v;
    if (o.pass) o.detail = d.str();
    return o;
}

// ---------------------------------------------------------------- 8

Outcome verifier_corpus() {
    Outcome o;
    std::ifstream in(std::string(POSER_TEST_DATA) + "/verifier_golden.jsonl");
    o.require(static_cast<bool>(in), "golden file missing");
    std::string line;
    int n = 0;
    int wrong = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        if (verifiable_reward(j["response"].get<std::string>(), j["label"].get<std::string>()) !=
            j["expected"].get<int>()) {
            ++wrong;
        }
        ++n;
    }
    o.require(n == 200, "golden file does not hold 200 cases");
    o.require(wrong == 0, std::to_string(wrong) + " golden cases differ");
    return o;
}

// ---------------------------------------------------------------- 9

using testing::MockReply;
using testing::MockServer;

InferenceEndpoint endpoint(const MockServer& s, std::size_t limit) {
    InferenceEndpoint e;
    e.base_url = s.base_url();
    e.model_name = "mock";
    e.timeout = std::chrono::milliseconds(5000);
    e.concurrency_limit = limit;
    e.backoff_base = std::chrono::milliseconds(100);
    return e;
}

Outcome orchestrator_integration() {
    Outcome o;
    namespace fs = std::filesystem;
    using namespace std::chrono_literals;
    constexpr std::size_t kSeeds = 12;
    constexpr std::size_t kM = 10;
    constexpr std::size_t kLimit = 3;

    MockServer gen_server([](const nlohmann::json&, std::size_t) {
        return MockReply{200, {"<think>p</think><question>What is 6*7?</question>"}, {}, 15ms};
    });
    MockServer solver_server([](const nlohmann::json& req, std::size_t) {
        std::vector<std::string> texts;
        for (int i = 0; i < req.value("n", 1); ++i) texts.push_back(i % 3 ? "\\boxed{42}" : "\\boxed{41}");
        return MockReply{200, texts, {}, 15ms};
    });
    MockServer annot_server(MockServer::constant("\\boxed{42}"));

    ChatClient generator(endpoint(gen_server, kLimit));
    ChatClient solver(endpoint(solver_server, kLimit));
    ChatClient annotator(endpoint(annot_server, kLimit));

    std::vector<Problem> seeds;
    std::map<std::string, double> a_ori;
    for (std::size_t i = 0; i < kSeeds; ++i) {
        seeds.push_back({"seed-" + std::to_string(i), "Question " + std::to_string(i), "1", {}});
        a_ori["seed-" + std::to_string(i)] = 0.5;
    }
    OrchestratorConfig cfg;
    cfg.m = kM;
    cfg.workers = 16;

    const fs::path store_path = fs::temp_directory_path() / "poser_acceptance_records.jsonl";
    fs::remove(store_path);
    std::vector<SynthesisRecord> first;
    {
        RecordStore store(store_path);
        first = label_and_filter(annotator, synthesize_batch(generator, solver, seeds, a_ori, cfg, &store), cfg,
                                 &store);
    }
    o.require(gen_server.requests() == kSeeds, "generator calls differ from seed count");
    o.require(solver_server.total_n() <= kSeeds * kM, "solver samples exceed S*m");
    o.require(std::all_of(first.begin(), first.end(), [](const auto& r) { return !r.error && r.kept; }),
              "batch records not all kept");
    o.require(gen_server.max_in_flight() <= static_cast<int>(kLimit) &&
                  solver_server.max_in_flight() <= static_cast<int>(kLimit) &&
                  annot_server.max_in_flight() <= static_cast<int>(kLimit),
              "concurrency ceiling exceeded");

    const std::size_t g0 = gen_server.requests();
    const std::size_t s0 = solver_server.requests();
    const std::size_t a0 = annot_server.requests();
    {
        RecordStore store(store_path);
        label_and_filter(annotator, synthesize_batch(generator, solver, seeds, a_ori, cfg, &store), cfg, &store);
    }
    o.require(gen_server.requests() == g0 && solver_server.requests() == s0 && annot_server.requests() == a0,
              "resume issued new calls");
    fs::remove(store_path);

    std::vector<std::chrono::milliseconds> waits;
    std::mutex mu;
    Sleeper sleeper = [&](std::chrono::milliseconds d) {
        std::lock_guard lock(mu);
        waits.push_back(d);
    };
    MockServer flaky([](const nlohmann::json&, std::size_t i) {
        return i < 2 ? MockReply{429, {}, "{}", {}} : MockReply{200, {"ok"}, {}, {}};
    });
    ChatClient retrying(endpoint(flaky, 1), sleeper);
    const auto got = retrying.complete({{"user", "x"}}, SamplingParams::rollout(1));
    o.require(got == std::vector<std::string>{"ok"} && flaky.requests() == 3, "scripted 429s not retried");
    o.require(waits == std::vector<std::chrono::milliseconds>{100ms, 200ms}, "backoff schedule differs");

    waits.clear();
    MockServer down([](const nlohmann::json&, std::size_t) { return MockReply{500, {}, "{}", {}}; });
    auto e = endpoint(down, 1);
    e.max_retries = 2;
    ChatClient failing(e, sleeper);
    int attempts = 0;
    try {
        failing.complete({{"user", "x"}}, SamplingParams::rollout(1));
    } catch (const TransportError& err) {
        attempts = err.attempts();
    }
    o.require(attempts == 3 && down.requests() == 3 && waits.size() == 2, "retry cap not honored");
    std::ostringstream d;
    d << "peak in flight " << solver_server.max_in_flight() << "/" << kLimit << ", solver samples "
      << solver_server.total_n();
    if (o.pass) o.detail = d.str();
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
        double budget_s;
    };
    const std::vector<Criterion> criteria = {
        {1, "reward geometry plateau law", reward_geometry, 1},
        {2, "generator reward gating", generator_gating, 1},
        {3, "Hoeffding coverage", hoeffding_soundness, 30},
        {4, "consistency-accuracy correlation", consistency_correlation, 30},
        {5, "GRPO advantages, surrogate and gradient", grpo_math, 10},
        {6, "training dynamics", training_dynamics, 120},
        {7, "reward ablation ordering", reward_ablation, 300},
        {8, "verifier golden corpus", verifier_corpus, 1},
        {9, "orchestrator against mock server", orchestrator_integration, 60},
        {10, "co-evolution monotonicity", coevolution, 300},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        if (secs > c.budget_s) {
            o.detail += (o.detail.empty() ? "" : "; ") + std::string("over time budget");
            o.pass = false;
        }
        std::printf("[%s] %2d %s (%.2fs)%s%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    o.detail.empty() ? "" : ": ", o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
