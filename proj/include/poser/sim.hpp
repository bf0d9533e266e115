#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "poser/consistency.hpp"
#include "poser/grpo.hpp"
#include "poser/reward.hpp"

namespace poser {

/// Solver whose answer distribution is known in closed form. On difficulty d
/// the correct label has probability 1 / (1 + exp(-slope (competence - d)));
/// the rest is spread over the wrong labels by `error_kernel` (uniform when
/// empty, normalized otherwise).
struct SyntheticSolver {
    double competence = 0.0;
    double slope = 1.0;
    std::size_t answer_space = 25;
    std::vector<double> error_kernel;
    std::uint64_t rng_seed = 0;

    void validate() const;
    double p_correct(double difficulty) const noexcept;
};

struct SyntheticTask {
    double difficulty = 0.0;
    std::size_t true_answer = 0;
};

/// Full label distribution for a task.
std::vector<double> answer_distribution(const SyntheticSolver& solver, const SyntheticTask& task);

/// Probability of the most likely label.
double top_probability(const SyntheticSolver& solver, const SyntheticTask& task);

/// Deterministic generator for (rng_seed, stream).
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

/// Uniform in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng) noexcept;

/// m i.i.d. labels from the solver's distribution, as normalized answers.
SolverSampleSet simulate_solver(const SyntheticSolver& solver, const SyntheticTask& task,
                                std::size_t m, std::uint64_t stream = 0);

/// Mode frequency of m draws from `dist`, without materializing answers.
double sample_consistency(std::span<const double> dist, std::size_t m, std::mt19937_64& rng);

/// Tasks whose correct-answer probability is evenly spaced in log-odds over
/// [p_lo, p_hi].
std::vector<SyntheticTask> spread_tasks(const SyntheticSolver& solver, std::size_t count,
                                        double p_lo, double p_hi);

/// Pearson correlation between each task's true accuracy and its consistency
/// estimate at m samples.
double correlation_study(const SyntheticSolver& solver, std::span<const SyntheticTask> tasks,
                         std::size_t m, std::uint64_t stream = 0);

/// Fraction of `trials` in which |a_hat - p*| <= hoeffding_half_width(m, delta),
/// each trial drawing a task uniformly from `tasks`.
double hoeffding_coverage(const SyntheticSolver& solver, std::span<const SyntheticTask> tasks,
                          std::size_t m, double delta, std::size_t trials,
                          std::uint64_t stream = 0);

enum class RewardMode { full, boundary_only, inversion_only };

RewardMode parse_reward_mode(std::string_view name);
std::string_view reward_mode_name(RewardMode mode) noexcept;

double mode_reward(RewardMode mode, const AccuracyPair& pair) noexcept;

/// Distance from a_new to the maximizing interval of the full reward.
double plateau_distance(const AccuracyPair& pair) noexcept;

struct CoevolutionConfig {
    std::size_t steps = 400;
    std::size_t iterations = 1;
    std::size_t m = 10;
    std::size_t group_size = 4;
    std::size_t seeds_per_step = 64;
    std::size_t seed_pool = 256;
    /// Seed difficulties are competence - seed_offset + seed_spread * N(0, 1).
    double seed_offset = 0.0;
    double seed_spread = 0.4;
    std::vector<double> edits{-6, -4, -3, -2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2, 3, 4, 6};
    std::size_t buckets = 11;
    double edit_prior = 1.0;
    double learning_rate = 0.5;
    std::size_t updates_per_batch = 2;
    double competence_gain = 0.5;
    ClipConfig clip;
    SyntheticSolver solver;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One training step of the toy generator.
struct EpisodeLog {
    std::size_t iteration = 0;
    std::size_t step = 0;
    double mean_reward = 0.0;
    double flip_success_rate = 0.0;
    double mean_difficulty_change = 0.0;
    double mean_plateau_distance = 0.0;
    double competence = 0.0;
};

struct CoevolutionResult {
    std::vector<EpisodeLog> log;
    /// Competence before the first iteration and after each one.
    std::vector<double> competence;
    /// Mean reward over the last window of each iteration.
    std::vector<double> iteration_final_reward;
    /// Pairs produced in the last window of the last iteration.
    std::vector<AccuracyPair> final_pairs;
    ToyPolicy policy{1, 1};
};

inline constexpr std::size_t kMetricWindow = 50;

/// Trains a tabular generator that picks a difficulty edit per a_ori bucket.
/// Each step samples seeds, draws group_size edits per seed, measures a_new
/// with the synthetic solver at m samples, scores 0.9 R + 0.1 under `mode`
/// and applies GRPO updates. After each iteration the solver's competence
/// grows by competence_gain times the share of produced tasks with a_new in
/// [0.3, 0.7], and a_ori is re-measured. Throws DivergenceError with the
/// global step index on non-finite logits.
CoevolutionResult run_coevolution(const CoevolutionConfig& cfg, RewardMode mode);

/// Mean of `values[begin, begin + count)`.
double window_mean(std::span<const double> values, std::size_t begin, std::size_t count);

}  // namespace poser
