#include "poser/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <set>
#include <thread>

#include "poser/error.hpp"
#include "poser/reward.hpp"

namespace poser {
namespace {

std::string collapse(const std::string& s) {
    std::string out;
    bool gap = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            gap = !out.empty();
            continue;
        }
        if (gap) out.push_back(' ');
        gap = false;
        out.push_back(c);
    }
    return out;
}

std::vector<Message> synthesis_prompt(PromptKind kind, const Problem& seed, double a_ori) {
    Slots slots{{"Seed Question", seed.question}};
    if (kind == PromptKind::solver_feedback) slots["Accuracy"] = format_accuracy(a_ori);
    return render_prompt(kind, slots);
}

}  // namespace

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    workers = std::max<std::size_t>(1, std::min(workers, n));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto run = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
        run();
    }
    if (failure) std::rethrow_exception(failure);
}

ConsistencyEstimate estimate_difficulty(CompletionService& solver, const std::string& problem_id,
                                        const std::string& question, std::size_t m,
                                        const SamplingParams& params) {
    if (m == 0) throw ParameterError("m must be >= 1");
    SamplingParams p = params;
    p.n = static_cast<int>(m);
    auto texts = solver.complete(render_prompt(PromptKind::solve, {{"Question", question}}), p);
    if (texts.size() != m) throw ProtocolError("solver returned the wrong number of samples");
    return majority_vote(SolverSampleSet::from_responses(problem_id, std::move(texts)));
}

RewardBreakdown recompute_reward(const SynthesisRecord& record) {
    FormatCheck fmt = check_format(record.generator_raw);
    if (!fmt.valid || !record.estimate) return generator_reward(false, 0.0, 0);
    return generator_reward(AccuracyPair(record.a_ori, record.estimate->a_hat), fmt.r_format);
}

std::vector<SynthesisRecord> synthesize_batch(CompletionService& generator,
                                              CompletionService& solver,
                                              const std::vector<Problem>& seeds,
                                              std::map<std::string, double>& a_ori_cache,
                                              const OrchestratorConfig& cfg, RecordStore* store) {
    std::vector<SynthesisRecord> out(seeds.size());
    std::mutex cache_mu;

    parallel_for(seeds.size(), cfg.workers, [&](std::size_t i) {
        const Problem& seed = seeds[i];
        if (store) {
            if (auto existing = store->find(seed.id)) {
                out[i] = std::move(*existing);
                return;
            }
        }
        SynthesisRecord rec;
        rec.seed = seed;
        rec.config_hash = cfg.config_hash;
        try {
            std::optional<double> a_ori;
            {
                std::lock_guard lock(cache_mu);
                if (auto it = a_ori_cache.find(seed.id); it != a_ori_cache.end()) a_ori = it->second;
            }
            if (!a_ori) {
                a_ori = estimate_difficulty(solver, seed.id, seed.question, cfg.m, cfg.solver_params).a_hat;
                std::lock_guard lock(cache_mu);
                a_ori_cache.emplace(seed.id, *a_ori);
            }
            rec.a_ori = *a_ori;

            SamplingParams gp = cfg.generator_params;
            gp.n = 1;
            rec.generator_raw = generator.complete(synthesis_prompt(cfg.prompt_kind, seed, rec.a_ori), gp).at(0);
            FormatCheck fmt = check_format(rec.generator_raw);
            rec.question = fmt.question;
            if (fmt.valid) {
                rec.estimate = estimate_difficulty(solver, seed.id + ":new", *fmt.question, cfg.m,
                                                   cfg.solver_params);
            }
            rec.reward = recompute_reward(rec);
        } catch (const Error& e) {
            rec.error = e.what();
        }
        if (store && !rec.error) store->append(rec);
        out[i] = std::move(rec);
    });
    return out;
}

std::vector<SynthesisRecord> label_and_filter(CompletionService& annotator,
                                              std::vector<SynthesisRecord> records,
                                              const OrchestratorConfig& cfg, RecordStore* store) {
    if (cfg.annotator_votes == 0) throw ParameterError("annotator votes must be >= 1");
    parallel_for(records.size(), cfg.workers, [&](std::size_t i) {
        SynthesisRecord& rec = records[i];
        if (rec.stage == "labeled" || rec.error) return;
        rec.kept = false;
        rec.label.reset();
        if (rec.reward.valid && rec.question) {
            try {
                auto est = estimate_difficulty(annotator, rec.seed.id + ":label", *rec.question,
                                               cfg.annotator_votes, cfg.annotator_params);
                if (est.pseudo_label && est.a_hat > 0.5) {
                    rec.label = est.pseudo_label;
                    rec.kept = true;
                }
            } catch (const Error& e) {
                rec.error = e.what();
                return;
            }
        }
        rec.stage = "labeled";
        if (store) store->append(rec);
    });
    return records;
}

std::vector<Problem> build_solver_training_set(const std::vector<Problem>& seeds,
                                               const std::vector<SynthesisRecord>& records) {
    std::vector<Problem> out;
    std::set<std::string> seen;
    auto add = [&](Problem p) {
        if (seen.insert(collapse(p.question)).second) out.push_back(std::move(p));
    };
    for (const auto& s : seeds) {
        if (s.answer) add(s);
    }
    for (const auto& r : records) {
        if (!r.kept || !r.question || !r.label) continue;
        add(Problem{r.seed.id + ":syn", *r.question, r.label->canonical_text, r.seed.id});
    }
    return out;
}

}  // namespace poser
