#include "poser/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "poser/error.hpp"

namespace poser {

void ClipConfig::validate() const {
    if (!(eps_low > 0.0)) throw ParameterError("eps_low must be > 0");
    if (!(eps_high >= eps_low)) throw ParameterError("eps_high must be >= eps_low");
    if (!(kl_coeff >= 0.0)) throw ParameterError("kl_coeff must be >= 0");
    if (!(eps_std > 0.0)) throw ParameterError("eps_std must be > 0");
}

std::vector<double> group_advantages(std::span<const double> rewards, double eps_std) {
    if (rewards.size() < 2) throw ParameterError("degenerate group");
    if (!(eps_std > 0.0)) throw ParameterError("eps_std must be > 0");
    std::vector<double> out(rewards.size(), 0.0);
    if (std::all_of(rewards.begin(), rewards.end(),
                    [&](double r) { return r == rewards.front(); })) {
        return out;
    }
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double scale = std::max(std::sqrt(var / n), eps_std);
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / scale;
    return out;
}

RolloutGroup make_rollout_group(std::string seed_id, std::vector<double> rewards,
                                const ClipConfig& cfg) {
    RolloutGroup g;
    g.advantages = group_advantages(rewards, cfg.eps_std);
    g.seed_id = std::move(seed_id);
    g.rewards = std::move(rewards);
    return g;
}

double clipped_surrogate(double ratio, double advantage, const ClipConfig& cfg) noexcept {
    const double clipped = std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
    return std::min(ratio * advantage, clipped * advantage);
}

double importance_ratio(double logp_new, double logp_old) noexcept {
    return std::exp(logp_new - logp_old);
}

double kl_penalty(std::span<const double> p, std::span<const double> ref) {
    if (p.size() != ref.size()) throw ParameterError("kl_penalty: size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (ref[i] <= 0.0) throw ParameterError("unsupported support");
        kl += p[i] * std::log(p[i] / ref[i]);
    }
    return std::max(kl, 0.0);
}

double grpo_objective(std::span<const RolloutGroup> groups,
                      const std::vector<std::vector<double>>& ratios, const ClipConfig& cfg,
                      double kl) {
    if (groups.empty()) throw ParameterError("grpo_objective: no groups");
    if (ratios.size() != groups.size()) throw ParameterError("grpo_objective: shape mismatch");
    double total = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& adv = groups[g].advantages;
        if (adv.empty() || ratios[g].size() != adv.size()) {
            throw ParameterError("grpo_objective: shape mismatch");
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < adv.size(); ++i) {
            sum += clipped_surrogate(ratios[g][i], adv[i], cfg);
        }
        total += sum / static_cast<double>(adv.size());
    }
    return total / static_cast<double>(groups.size()) - cfg.kl_coeff * kl;
}

ToyPolicy::ToyPolicy(std::size_t observations, std::size_t actions, double init_logit)
    : ToyPolicy(observations, actions, std::vector<double>(observations * actions, init_logit)) {}

ToyPolicy::ToyPolicy(std::size_t observations, std::size_t actions, std::vector<double> logits)
    : observations_(observations), actions_(actions), logits_(std::move(logits)) {
    if (observations == 0 || actions == 0) throw ParameterError("toy policy needs a non-empty table");
    if (logits_.size() != observations * actions) throw ParameterError("toy policy: logit table size");
}

void ToyPolicy::check(std::size_t obs) const {
    if (obs >= observations_) throw ParameterError("toy policy: observation out of range");
}

double& ToyPolicy::logit(std::size_t obs, std::size_t action) {
    check(obs);
    if (action >= actions_) throw ParameterError("toy policy: action out of range");
    return logits_[obs * actions_ + action];
}

double ToyPolicy::logit(std::size_t obs, std::size_t action) const {
    check(obs);
    if (action >= actions_) throw ParameterError("toy policy: action out of range");
    return logits_[obs * actions_ + action];
}

std::vector<double> ToyPolicy::probabilities(std::size_t obs) const {
    check(obs);
    auto row = logits_.begin() + static_cast<std::ptrdiff_t>(obs * actions_);
    const double peak = *std::max_element(row, row + static_cast<std::ptrdiff_t>(actions_));
    std::vector<double> p(actions_);
    double z = 0.0;
    for (std::size_t a = 0; a < actions_; ++a) {
        p[a] = std::exp(row[static_cast<std::ptrdiff_t>(a)] - peak);
        z += p[a];
    }
    for (double& v : p) v /= z;
    return p;
}

double ToyPolicy::log_prob(std::size_t obs, std::size_t action) const {
    check(obs);
    if (action >= actions_) throw ParameterError("toy policy: action out of range");
    auto row = logits_.begin() + static_cast<std::ptrdiff_t>(obs * actions_);
    const double peak = *std::max_element(row, row + static_cast<std::ptrdiff_t>(actions_));
    double z = 0.0;
    for (std::size_t a = 0; a < actions_; ++a) z += std::exp(row[static_cast<std::ptrdiff_t>(a)] - peak);
    return row[static_cast<std::ptrdiff_t>(action)] - peak - std::log(z);
}

std::size_t ToyPolicy::sample(std::size_t obs, double u) const {
    auto p = probabilities(obs);
    double acc = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        acc += p[a];
        if (u < acc) return a;
    }
    return p.size() - 1;
}

namespace {

void check_batch(const ToyPolicy& policy, const ToyPolicy& reference, const PolicyBatch& batch) {
    if (policy.observations() != reference.observations() ||
        policy.actions() != reference.actions()) {
        throw ParameterError("policy and reference shapes differ");
    }
    if (batch.empty()) throw ParameterError("empty policy batch");
    for (const auto& group : batch) {
        if (group.empty()) throw ParameterError("empty rollout group");
    }
}

}  // namespace

double toy_objective(const ToyPolicy& policy, const ToyPolicy& reference,
                     const PolicyBatch& batch, const ClipConfig& cfg) {
    check_batch(policy, reference, batch);
    double total = 0.0;
    for (const auto& group : batch) {
        double sum = 0.0;
        for (const auto& s : group) {
            const double ratio = importance_ratio(policy.log_prob(s.observation, s.action), s.logp_old);
            const double kl =
                kl_penalty(policy.probabilities(s.observation), reference.probabilities(s.observation));
            sum += clipped_surrogate(ratio, s.advantage, cfg) - cfg.kl_coeff * kl;
        }
        total += sum / static_cast<double>(group.size());
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> toy_gradient(const ToyPolicy& policy, const ToyPolicy& reference,
                                 const PolicyBatch& batch, const ClipConfig& cfg) {
    check_batch(policy, reference, batch);
    const std::size_t k = policy.actions();
    std::vector<double> grad(policy.logits().size(), 0.0);
    for (const auto& group : batch) {
        const double weight = 1.0 / (static_cast<double>(group.size()) * static_cast<double>(batch.size()));
        for (const auto& s : group) {
            const auto pi = policy.probabilities(s.observation);
            const auto ref = reference.probabilities(s.observation);
            double* row = grad.data() + s.observation * k;

            const double ratio = importance_ratio(policy.log_prob(s.observation, s.action), s.logp_old);
            const double clipped = std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
            if (ratio * s.advantage <= clipped * s.advantage) {
                const double coeff = weight * ratio * s.advantage;
                for (std::size_t j = 0; j < k; ++j) {
                    row[j] += coeff * ((j == s.action ? 1.0 : 0.0) - pi[j]);
                }
            }

            if (cfg.kl_coeff > 0.0) {
                const double kl = kl_penalty(pi, ref);
                for (std::size_t j = 0; j < k; ++j) {
                    if (pi[j] <= 0.0) continue;
                    row[j] -= weight * cfg.kl_coeff * pi[j] * (std::log(pi[j] / ref[j]) - kl);
                }
            }
        }
    }
    return grad;
}

ToyPolicy policy_gradient_step(const ToyPolicy& policy, const ToyPolicy& reference,
                               const PolicyBatch& batch, const ClipConfig& cfg, double lr,
                               std::size_t step) {
    const auto grad = toy_gradient(policy, reference, batch, cfg);
    ToyPolicy next = policy;
    auto& logits = next.logits();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(grad[i])) throw DivergenceError("diverged", step);
        logits[i] += lr * grad[i];
        if (!std::isfinite(logits[i])) throw DivergenceError("diverged", step);
    }
    return next;
}

void write_advantages_jsonl(std::ostream& out, std::span<const RolloutGroup> groups) {
    for (const auto& g : groups) {
        if (g.rewards.size() != g.advantages.size()) {
            throw ParameterError("rollout group: rewards and advantages differ in length");
        }
        for (std::size_t i = 0; i < g.rewards.size(); ++i) {
            nlohmann::json line = {{"seed_id", g.seed_id},
                                   {"rollout_index", i},
                                   {"reward", g.rewards[i]},
                                   {"advantage", g.advantages[i]}};
            out << line.dump() << '\n';
        }
    }
}

}  // namespace poser
