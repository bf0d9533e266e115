#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace poser {

/// Clipping and regularization constants. Defaults: asymmetric clip
/// [1 - 0.2, 1 + 0.28], KL weight 1e-3, advantage std floor 1e-6.
struct ClipConfig {
    double eps_low = 0.2;
    double eps_high = 0.28;
    double kl_coeff = 1e-3;
    double eps_std = 1e-6;

    /// Throws ParameterError unless eps_low > 0, eps_high >= eps_low,
    /// kl_coeff >= 0 and eps_std > 0.
    void validate() const;
};

/// (r_i - mean) / max(population std, eps_std). A group of equal rewards maps
/// to exact zeros. Throws ParameterError("degenerate group") below 2 rewards.
std::vector<double> group_advantages(std::span<const double> rewards, double eps_std);

struct RolloutGroup {
    std::string seed_id;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

RolloutGroup make_rollout_group(std::string seed_id, std::vector<double> rewards,
                                const ClipConfig& cfg);

/// min(r A, clip(r, 1 - eps_low, 1 + eps_high) A).
double clipped_surrogate(double ratio, double advantage, const ClipConfig& cfg) noexcept;

/// exp(logp_new - logp_old).
double importance_ratio(double logp_new, double logp_old) noexcept;

/// Exact categorical KL(p || ref) with 0 ln 0 = 0. Throws ParameterError on
/// size mismatch and "unsupported support" when ref is 0 where p is not.
double kl_penalty(std::span<const double> p, std::span<const double> ref);

/// Mean over groups of the mean clipped surrogate, minus kl_coeff * kl.
/// `ratios[g][i]` pairs with `groups[g].advantages[i]`.
double grpo_objective(std::span<const RolloutGroup> groups,
                      const std::vector<std::vector<double>>& ratios, const ClipConfig& cfg,
                      double kl);

/// Tabular softmax policy over discrete actions, one logit row per observation.
class ToyPolicy {
public:
    ToyPolicy(std::size_t observations, std::size_t actions, double init_logit = 0.0);
    ToyPolicy(std::size_t observations, std::size_t actions, std::vector<double> logits);

    std::size_t observations() const noexcept { return observations_; }
    std::size_t actions() const noexcept { return actions_; }

    double& logit(std::size_t obs, std::size_t action);
    double logit(std::size_t obs, std::size_t action) const;
    const std::vector<double>& logits() const noexcept { return logits_; }
    std::vector<double>& logits() noexcept { return logits_; }

    std::vector<double> probabilities(std::size_t obs) const;
    double log_prob(std::size_t obs, std::size_t action) const;

    /// Inverse-CDF draw for a uniform u in [0, 1).
    std::size_t sample(std::size_t obs, double u) const;

private:
    void check(std::size_t obs) const;

    std::size_t observations_;
    std::size_t actions_;
    std::vector<double> logits_;
};

/// One single-action rollout as seen by the update.
struct PolicySample {
    std::size_t observation = 0;
    std::size_t action = 0;
    double advantage = 0.0;
    double logp_old = 0.0;
};

/// Groups of samples; each inner vector is one rollout group.
using PolicyBatch = std::vector<std::vector<PolicySample>>;

/// Objective of `policy` on `batch`: per-sample clipped surrogate minus
/// kl_coeff * KL(policy(obs) || reference(obs)), averaged within then across
/// groups.
double toy_objective(const ToyPolicy& policy, const ToyPolicy& reference,
                     const PolicyBatch& batch, const ClipConfig& cfg);

/// Analytic gradient of toy_objective with respect to the logits, in the
/// layout of ToyPolicy::logits().
std::vector<double> toy_gradient(const ToyPolicy& policy, const ToyPolicy& reference,
                                 const PolicyBatch& batch, const ClipConfig& cfg);

/// One ascent step of size lr. Returns the new policy. Throws
/// DivergenceError("diverged", step) if the gradient or result is not finite.
ToyPolicy policy_gradient_step(const ToyPolicy& policy, const ToyPolicy& reference,
                               const PolicyBatch& batch, const ClipConfig& cfg, double lr,
                               std::size_t step = 0);

/// One JSON object per rollout: seed_id, rollout_index, reward, advantage.
void write_advantages_jsonl(std::ostream& out, std::span<const RolloutGroup> groups);

}  // namespace poser
