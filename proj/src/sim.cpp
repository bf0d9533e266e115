#include "poser/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "poser/error.hpp"

namespace poser {

void SyntheticSolver::validate() const {
    if (!std::isfinite(competence)) throw ParameterError("competence must be finite");
    if (!(slope > 0.0) || !std::isfinite(slope)) throw ParameterError("slope must be > 0");
    if (answer_space < 2) throw ParameterError("answer space needs at least 2 labels");
    if (!error_kernel.empty()) {
        if (error_kernel.size() != answer_space - 1) {
            throw ParameterError("error kernel must have one weight per wrong label");
        }
        double total = 0.0;
        for (double w : error_kernel) {
            if (!(w >= 0.0)) throw ParameterError("error kernel weights must be >= 0");
            total += w;
        }
        if (!(total > 0.0)) throw ParameterError("error kernel has no mass");
    }
}

double SyntheticSolver::p_correct(double difficulty) const noexcept {
    return 1.0 / (1.0 + std::exp(-slope * (competence - difficulty)));
}

std::vector<double> answer_distribution(const SyntheticSolver& solver, const SyntheticTask& task) {
    solver.validate();
    if (!std::isfinite(task.difficulty)) throw ParameterError("task difficulty must be finite");
    if (task.true_answer >= solver.answer_space) throw ParameterError("true answer outside answer space");
    const double p = solver.p_correct(task.difficulty);
    const std::size_t wrong = solver.answer_space - 1;
    std::vector<double> kernel = solver.error_kernel;
    if (kernel.empty()) kernel.assign(wrong, 1.0);
    const double total = std::accumulate(kernel.begin(), kernel.end(), 0.0);

    std::vector<double> dist(solver.answer_space, 0.0);
    std::size_t j = 0;
    for (std::size_t label = 0; label < solver.answer_space; ++label) {
        if (label == task.true_answer) {
            dist[label] = p;
        } else {
            dist[label] = (1.0 - p) * kernel[j++] / total;
        }
    }
    return dist;
}

double top_probability(const SyntheticSolver& solver, const SyntheticTask& task) {
    auto d = answer_distribution(solver, task);
    return *std::max_element(d.begin(), d.end());
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

double uniform01(std::mt19937_64& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace {

std::size_t draw(std::span<const double> dist, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        if (u < acc) return i;
    }
    return dist.size() - 1;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

SolverSampleSet simulate_solver(const SyntheticSolver& solver, const SyntheticTask& task,
                                std::size_t m, std::uint64_t stream) {
    if (m == 0) throw ParameterError("m must be >= 1");
    const auto dist = answer_distribution(solver, task);
    auto rng = make_rng(solver.rng_seed, stream);
    SolverSampleSet out;
    out.problem_id = "task";
    for (std::size_t i = 0; i < m; ++i) {
        std::string label = std::to_string(draw(dist, rng));
        out.raw_texts.push_back("\\boxed{" + label + "}");
        out.answers.emplace_back(NormalizedAnswer{label, Rational(static_cast<long long>(std::stoll(label)))});
    }
    return out;
}

double sample_consistency(std::span<const double> dist, std::size_t m, std::mt19937_64& rng) {
    if (m == 0) throw ParameterError("m must be >= 1");
    thread_local std::vector<std::size_t> counts;
    counts.assign(dist.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < m; ++i) best = std::max(best, ++counts[draw(dist, rng)]);
    return static_cast<double>(best) / static_cast<double>(m);
}

std::vector<SyntheticTask> spread_tasks(const SyntheticSolver& solver, std::size_t count,
                                        double p_lo, double p_hi) {
    solver.validate();
    if (count < 2) throw ParameterError("spread_tasks needs at least 2 tasks");
    if (!(p_lo > 0.0 && p_lo < p_hi && p_hi < 1.0)) throw ParameterError("need 0 < p_lo < p_hi < 1");
    std::vector<SyntheticTask> tasks(count);
    const double lo = logit(p_lo);
    const double hi = logit(p_hi);
    for (std::size_t i = 0; i < count; ++i) {
        const double z = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        tasks[i].difficulty = solver.competence - z / solver.slope;
        tasks[i].true_answer = 0;
    }
    return tasks;
}

double correlation_study(const SyntheticSolver& solver, std::span<const SyntheticTask> tasks,
                         std::size_t m, std::uint64_t stream) {
    auto rng = make_rng(solver.rng_seed, stream);
    std::vector<double> accuracy;
    std::vector<double> consistency;
    for (const auto& task : tasks) {
        const auto dist = answer_distribution(solver, task);
        accuracy.push_back(dist[task.true_answer]);
        consistency.push_back(sample_consistency(dist, m, rng));
    }
    return pearson_correlation(accuracy, consistency);
}

double hoeffding_coverage(const SyntheticSolver& solver, std::span<const SyntheticTask> tasks,
                          std::size_t m, double delta, std::size_t trials, std::uint64_t stream) {
    if (tasks.empty() || trials == 0) throw ParameterError("coverage needs tasks and trials");
    const double width = hoeffding_half_width(m, delta);
    std::vector<std::vector<double>> dists;
    std::vector<double> p_star;
    for (const auto& t : tasks) {
        dists.push_back(answer_distribution(solver, t));
        p_star.push_back(*std::max_element(dists.back().begin(), dists.back().end()));
    }
    auto rng = make_rng(solver.rng_seed, stream);
    std::size_t covered = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(tasks.size()));
        const double a_hat = sample_consistency(dists[k], m, rng);
        if (std::abs(a_hat - p_star[k]) <= width) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(trials);
}

RewardMode parse_reward_mode(std::string_view name) {
    if (name == "full") return RewardMode::full;
    if (name == "boundary_only") return RewardMode::boundary_only;
    if (name == "inversion_only") return RewardMode::inversion_only;
    throw ParameterError("unknown reward mode: " + std::string(name));
}

std::string_view reward_mode_name(RewardMode mode) noexcept {
    switch (mode) {
        case RewardMode::full: return "full";
        case RewardMode::boundary_only: return "boundary_only";
        case RewardMode::inversion_only: return "inversion_only";
    }
    return "unknown";
}

double mode_reward(RewardMode mode, const AccuracyPair& pair) noexcept {
    switch (mode) {
        case RewardMode::full: return accuracy_reward(pair);
        case RewardMode::boundary_only: return boundary_reward(pair);
        case RewardMode::inversion_only: return inversion_reward(pair);
    }
    return 0.0;
}

double plateau_distance(const AccuracyPair& pair) noexcept {
    const double target = 1.0 - pair.a_ori();
    const double lo = std::min(target, 0.5);
    const double hi = std::max(target, 0.5);
    return std::max({lo - pair.a_new(), 0.0, pair.a_new() - hi});
}

void CoevolutionConfig::validate() const {
    if (steps == 0 || iterations == 0) throw ParameterError("steps and iterations must be >= 1");
    if (m == 0) throw ParameterError("m must be >= 1");
    if (group_size < 2) throw ParameterError("group size must be >= 2");
    if (seeds_per_step == 0 || seed_pool == 0) throw ParameterError("seed counts must be >= 1");
    if (edits.size() < 2) throw ParameterError("need at least 2 edits");
    if (buckets < 2) throw ParameterError("need at least 2 buckets");
    if (!std::isfinite(seed_offset) || !(seed_spread >= 0.0) || !(learning_rate > 0.0) || !(competence_gain >= 0.0)) {
        throw ParameterError("sim rates must be non-negative");
    }
    clip.validate();
    solver.validate();
}

double window_mean(std::span<const double> values, std::size_t begin, std::size_t count) {
    if (count == 0 || begin + count > values.size()) throw ParameterError("window out of range");
    double s = 0.0;
    for (std::size_t i = begin; i < begin + count; ++i) s += values[i];
    return s / static_cast<double>(count);
}

CoevolutionResult run_coevolution(const CoevolutionConfig& cfg, RewardMode mode) {
    cfg.validate();
    auto rng = make_rng(cfg.seed, 0x5eed);
    SyntheticSolver solver = cfg.solver;

    std::normal_distribution<double> spread(0.0, 1.0);
    std::vector<double> seed_difficulty(cfg.seed_pool);
    for (double& d : seed_difficulty) d = solver.competence - cfg.seed_offset + cfg.seed_spread * spread(rng);

    const double max_edit = std::abs(*std::max_element(
        cfg.edits.begin(), cfg.edits.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }));
    std::vector<double> initial(cfg.buckets * cfg.edits.size());
    for (std::size_t b = 0; b < cfg.buckets; ++b) {
        for (std::size_t a = 0; a < cfg.edits.size(); ++a) {
            initial[b * cfg.edits.size() + a] = cfg.edit_prior * std::abs(cfg.edits[a]) / max_edit;
        }
    }
    ToyPolicy policy(cfg.buckets, cfg.edits.size(), initial);
    const ToyPolicy reference = policy;

    CoevolutionResult result;
    result.competence.push_back(solver.competence);
    std::size_t global_step = 0;
    std::vector<double> dist;

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::vector<double> a_ori(cfg.seed_pool);
        std::vector<std::size_t> bucket(cfg.seed_pool);
        for (std::size_t s = 0; s < cfg.seed_pool; ++s) {
            a_ori[s] = sample_consistency(answer_distribution(solver, {seed_difficulty[s], 0}), cfg.m, rng);
            bucket[s] = static_cast<std::size_t>(std::lround(a_ori[s] * static_cast<double>(cfg.buckets - 1)));
        }

        std::size_t produced = 0;
        std::size_t near_boundary = 0;
        std::vector<double> rewards_this_iter;

        for (std::size_t step = 0; step < cfg.steps; ++step, ++global_step) {
            const ToyPolicy old = policy;
            PolicyBatch batch;
            batch.reserve(cfg.seeds_per_step);
            double reward_sum = 0.0;
            std::vector<AccuracyPair> pairs;
            pairs.reserve(cfg.seeds_per_step * cfg.group_size);

            for (std::size_t k = 0; k < cfg.seeds_per_step; ++k) {
                const std::size_t s = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(cfg.seed_pool));
                const std::size_t obs = bucket[s];
                std::vector<PolicySample> group(cfg.group_size);
                std::vector<double> rewards(cfg.group_size);
                for (std::size_t g = 0; g < cfg.group_size; ++g) {
                    const std::size_t action = old.sample(obs, uniform01(rng));
                    dist = answer_distribution(solver, {seed_difficulty[s] + cfg.edits[action], 0});
                    const AccuracyPair pair(a_ori[s], sample_consistency(dist, cfg.m, rng));
                    rewards[g] = generator_reward(true, mode_reward(mode, pair), 1).r_gen;
                    group[g] = PolicySample{obs, action, 0.0, old.log_prob(obs, action)};
                    pairs.push_back(pair);
                    reward_sum += rewards[g];
                    ++produced;
                    if (pair.a_new() >= 0.3 && pair.a_new() <= 0.7) ++near_boundary;
                }
                const auto adv = group_advantages(rewards, cfg.clip.eps_std);
                for (std::size_t g = 0; g < cfg.group_size; ++g) group[g].advantage = adv[g];
                batch.push_back(std::move(group));
            }

            for (std::size_t u = 0; u < cfg.updates_per_batch; ++u) {
                policy = policy_gradient_step(policy, reference, batch, cfg.clip, cfg.learning_rate, global_step);
            }

            const auto metrics = dynamics_metrics(pairs);
            double distance = 0.0;
            for (const auto& p : pairs) distance += plateau_distance(p);
            EpisodeLog row;
            row.iteration = it;
            row.step = global_step;
            row.mean_reward = reward_sum / static_cast<double>(pairs.size());
            row.flip_success_rate = metrics.flip_success_rate;
            row.mean_difficulty_change = metrics.mean_difficulty_change;
            row.mean_plateau_distance = distance / static_cast<double>(pairs.size());
            row.competence = solver.competence;
            result.log.push_back(row);
            rewards_this_iter.push_back(row.mean_reward);

            if (it + 1 == cfg.iterations && step + std::min(kMetricWindow, cfg.steps) >= cfg.steps) {
                result.final_pairs.insert(result.final_pairs.end(), pairs.begin(), pairs.end());
            }
        }

        const std::size_t w = std::min(kMetricWindow, cfg.steps);
        result.iteration_final_reward.push_back(window_mean(rewards_this_iter, cfg.steps - w, w));
        solver.competence += cfg.competence_gain * static_cast<double>(near_boundary) /
                             static_cast<double>(std::max<std::size_t>(produced, 1));
        result.competence.push_back(solver.competence);
    }
    result.policy = policy;
    return result;
}

}  // namespace poser
