#include "poser/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <vector>

#include "poser/error.hpp"

namespace poser {
namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kQuestionOpen = "<question>";
constexpr std::string_view kQuestionClose = "</question>";

std::size_t count_of(std::string_view s, std::string_view tag) {
    std::size_t n = 0;
    for (std::size_t p = s.find(tag); p != std::string_view::npos; p = s.find(tag, p + tag.size())) {
        ++n;
    }
    return n;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::string_view strip(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

AccuracyPair::AccuracyPair(double a_ori, double a_new) : a_ori_(a_ori), a_new_(a_new) {
    if (!in_unit(a_ori) || !in_unit(a_new)) {
        throw ParameterError("accuracy pair outside [0, 1]");
    }
}

double inversion_reward(const AccuracyPair& p) noexcept {
    return 1.0 - std::abs(p.a_new() - (1.0 - p.a_ori()));
}

double boundary_reward(const AccuracyPair& p) noexcept {
    return std::min(p.a_new(), 1.0 - p.a_new());
}

double accuracy_reward(const AccuracyPair& p) noexcept {
    return inversion_reward(p) + boundary_reward(p);
}

RewardBreakdown generator_reward(bool valid, double r_acc, int r_format) {
    RewardBreakdown out;
    if (!valid) return out;
    if (!(r_acc >= 0.0 && r_acc <= 1.5)) throw ParameterError("r_acc outside [0, 1.5]");
    if (r_format != 0 && r_format != 1) throw ParameterError("r_format must be 0 or 1");
    out.valid = true;
    out.r_acc = r_acc;
    out.r_format = r_format;
    out.r_gen = 0.9 * r_acc + 0.1 * r_format;
    return out;
}

RewardBreakdown generator_reward(const AccuracyPair& pair, int r_format) {
    RewardBreakdown out = generator_reward(true, accuracy_reward(pair), r_format);
    out.pair = pair;
    return out;
}

FormatCheck check_format(std::string_view text) noexcept {
    FormatCheck out;
    std::size_t region = 0;
    std::size_t question_close = std::string_view::npos;
    for (std::size_t close = text.find(kQuestionClose); close != std::string_view::npos;
         close = text.find(kQuestionClose, close + kQuestionClose.size())) {
        std::string_view window = text.substr(region, close - region);
        std::size_t open = window.rfind(kQuestionOpen);
        region = close + kQuestionClose.size();
        if (open == std::string_view::npos) continue;
        std::string_view body = window.substr(open + kQuestionOpen.size());
        if (is_blank(body)) continue;
        try {
            out.question = std::string(strip(body));
        } catch (...) {
            return FormatCheck{};
        }
        question_close = close;
        break;
    }
    if (!out.question) return out;
    out.valid = true;

    bool unique = count_of(text, kThinkOpen) == 1 && count_of(text, kThinkClose) == 1 &&
                  count_of(text, kQuestionOpen) == 1 && count_of(text, kQuestionClose) == 1;
    if (!unique) return out;
    std::size_t think_open = text.find(kThinkOpen);
    std::size_t think_close = text.find(kThinkClose);
    std::size_t question_open = text.find(kQuestionOpen);
    bool ordered = think_open < think_close && think_close + kThinkClose.size() <= question_open;
    bool tail_clean = is_blank(text.substr(question_close + kQuestionClose.size()));
    out.r_format = ordered && tail_clean ? 1 : 0;
    return out;
}

bool is_flip(const AccuracyPair& p) noexcept { return (p.a_ori() < 0.5) != (p.a_new() < 0.5); }

DynamicsMetrics dynamics_metrics(std::span<const AccuracyPair> batch) {
    if (batch.empty()) throw ParameterError("empty metrics batch");
    std::size_t flips = 0;
    double change = 0.0;
    for (const auto& p : batch) {
        flips += is_flip(p) ? 1 : 0;
        change += std::abs(p.a_new() - p.a_ori());
    }
    const double n = static_cast<double>(batch.size());
    return DynamicsMetrics{static_cast<double>(flips) / n, change / n};
}

}  // namespace poser
