#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace poser {

/// Solver accuracy on a seed (a_ori) and on its synthesized variant (a_new).
/// Construction rejects values outside [0, 1] and NaN.
class AccuracyPair {
public:
    AccuracyPair(double a_ori, double a_new);

    double a_ori() const noexcept { return a_ori_; }
    double a_new() const noexcept { return a_new_; }

    friend bool operator==(const AccuracyPair&, const AccuracyPair&) = default;

private:
    double a_ori_;
    double a_new_;
};

/// 1 - |a_new - (1 - a_ori)| + min(a_new, 1 - a_new), in [0, 1.5].
double accuracy_reward(const AccuracyPair& pair) noexcept;

/// Inversion term alone: 1 - |a_new - (1 - a_ori)|.
double inversion_reward(const AccuracyPair& pair) noexcept;

/// Boundary term alone: min(a_new, 1 - a_new).
double boundary_reward(const AccuracyPair& pair) noexcept;

struct RewardBreakdown {
    bool valid = false;
    double r_acc = 0.0;
    int r_format = 0;
    double r_gen = -1.0;
    std::optional<AccuracyPair> pair;
};

/// Invalid output scores exactly -1; otherwise 0.9 r_acc + 0.1 r_format.
/// Throws ParameterError for r_acc outside [0, 1.5] or r_format outside {0,1}
/// on the valid branch.
RewardBreakdown generator_reward(bool valid, double r_acc, int r_format);

/// Full composition for a valid output with a measured pair.
RewardBreakdown generator_reward(const AccuracyPair& pair, int r_format);

struct FormatCheck {
    bool valid = false;
    int r_format = 0;
    std::optional<std::string> question;
};

/// Parses `<think>...</think><question>...</question>` generator output.
///
/// Each `</question>` closes the nearest `<question>` opened since the
/// previous `</question>`; the first such block with non-blank content is the
/// question. r_format is 1 only when every one of the four tags occurs
/// exactly once, think closes before question opens, and nothing but
/// whitespace follows `</question>`. Total: never throws.
FormatCheck check_format(std::string_view generator_output) noexcept;

struct DynamicsMetrics {
    double flip_success_rate = 0.0;
    double mean_difficulty_change = 0.0;
};

/// True when a_ori and a_new sit on opposite sides of 0.5 (0.5 counts as high).
bool is_flip(const AccuracyPair& pair) noexcept;

/// Throws ParameterError("empty metrics batch") on an empty batch.
DynamicsMetrics dynamics_metrics(std::span<const AccuracyPair> batch);

}  // namespace poser
