#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "poser/consistency.hpp"
#include "poser/inference.hpp"
#include "poser/prompts.hpp"
#include "poser/records.hpp"

namespace poser {

struct OrchestratorConfig {
    std::size_t m = 10;
    SamplingParams generator_params = SamplingParams::rollout();
    SamplingParams solver_params = SamplingParams::rollout();
    SamplingParams annotator_params = SamplingParams::evaluation();
    std::size_t annotator_votes = 3;
    PromptKind prompt_kind = PromptKind::solver_feedback;
    std::string config_hash;
    /// Seeds processed concurrently; endpoint limits still cap requests.
    std::size_t workers = 16;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Samples m solutions with the solve prompt in one request and majority
/// votes them. Responses without a boxed answer count as absent.
ConsistencyEstimate estimate_difficulty(CompletionService& solver, const std::string& problem_id,
                                        const std::string& question, std::size_t m,
                                        const SamplingParams& params);

/// Rebuilds the reward of a record from generator_raw, a_ori and the stored
/// estimate.
RewardBreakdown recompute_reward(const SynthesisRecord& record);

/// One synthesis per seed. Seeds already in `store` are returned as stored
/// without any network call. Missing a_ori values are measured once and
/// written into `a_ori_cache`. A failed call yields a record with `error`
/// set; it is not persisted so a rerun retries it.
std::vector<SynthesisRecord> synthesize_batch(CompletionService& generator,
                                              CompletionService& solver,
                                              const std::vector<Problem>& seeds,
                                              std::map<std::string, double>& a_ori_cache,
                                              const OrchestratorConfig& cfg,
                                              RecordStore* store = nullptr);

/// Labels each valid record by majority over `votes` annotator samples.
/// Kept requires a label backed by a strict majority of votes. Records
/// already labeled are passed through untouched.
std::vector<SynthesisRecord> label_and_filter(CompletionService& annotator,
                                              std::vector<SynthesisRecord> records,
                                              const OrchestratorConfig& cfg,
                                              RecordStore* store = nullptr);

/// Labeled seeds followed by kept synthesized problems, deduplicated by
/// whitespace-collapsed question text. Seeds without an answer are dropped.
std::vector<Problem> build_solver_training_set(const std::vector<Problem>& seeds,
                                               const std::vector<SynthesisRecord>& records);

}  // namespace poser
