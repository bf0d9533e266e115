#include "poser/prompts.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <span>

#include "poser/error.hpp"

namespace poser {
namespace {

constexpr std::string_view kSelfInstruct =
    "Please create a new problem based on: <question>{Seed Question}</question>. Please reason "
    "step by step inside <think>...</think> and output only the final problem inside "
    "<question>...</question>.";

constexpr std::string_view kSolverFeedback =
    "Please create a novel self-contained problem with appropriate difficulty adjustment based "
    "on: <question>{Seed Question}</question> and student's current accuracy rate: {Accuracy}. "
    "Apply the following difficulty adjustment rules: If accuracy < 0.3 (low): Simplify the "
    "problem significantly - reduce complexity or break down into simpler steps. If 0.3 ≤ "
    "accuracy ≤ 0.7 (medium): Maintain similar difficulty level. If accuracy > 0.7 (high): "
    "Increase difficulty - add complexity, introduce additional constraints, or combine multiple "
    "concepts. Please reason step by step inside <think>...</think> and output only the final "
    "problem inside <question>...</question>.";

constexpr std::string_view kSolve =
    "Please reason step by step, and put your final answer within \\boxed{}. {Question}.";

constexpr std::string_view kDesignSystem =
    "You are a senior mathematics problem creation expert. Your task is to derive the creative "
    "process from \"Problem 1\" and its \"Solution 1\" to \"Problem 2\", reconstructing the "
    "creative thinking chain.\n"
    "\n"
    "You must pretend that you do not know \"Problem 2\" at the initial thinking stage. Your "
    "output needs to completely and logically demonstrate how an expert would start from "
    "\"Problem 1\", through analysis, conception, and evolution, to finally happen to design "
    "\"Problem 2\".\n"
    "\n"
    "Output Format\n"
    "Please strictly follow the steps and format below, keeping it concise with a total length "
    "controlled within 500 words.\n"
    "\n"
    "1. Analyze the original problem (Problem 1):\n"
    "   - Core knowledge points: Briefly list the key concepts / theorems / techniques examined "
    "in Problem 1 (using noun phrases).\n"
    "   - Solution characteristics: Summarize the solution style and key step types (high-level "
    "description).\n"
    "2. Conceive new problem direction:\n"
    "   - Problem creation strategy: Specify the adopted strategy (such as: deepening core "
    "knowledge points / changing conditions / introducing parameters / contextualization / "
    "integrating multiple knowledge points).\n"
    "   - Conception process: Use highly summarized thinking to explain why this strategy was "
    "chosen and the expected examination ability (without expanding reasoning).\n"
    "3. Derive and form new problem (Problem 2):\n"
    "   - Specific evolution: Summarize the key changes from original condition A to new "
    "condition B, and the resulting change in solution path from method X to method Y (using "
    "general terms).";

constexpr std::string_view kDesignUser =
    "Problem 1:\n{Problem 1}\n\nSolution 1:\n{Solution 1}\n\nProblem 2:\n{Problem 2}";

constexpr std::string_view kNotProvided = "(not provided)";

std::string substitute(std::string_view tmpl, std::span<const std::string_view> names,
                       const Slots& slots) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            std::size_t close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                std::string_view name = tmpl.substr(i + 1, close - i - 1);
                if (std::find(names.begin(), names.end(), name) != names.end()) {
                    auto it = slots.find(name);
                    if (it != slots.end()) {
                        out += it->second;
                    } else if (name == "Solution 1") {
                        out += kNotProvided;
                    } else {
                        throw ParameterError("missing prompt slot: " + std::string(name));
                    }
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

}  // namespace

std::vector<Message> render_prompt(PromptKind kind, const Slots& slots) {
    switch (kind) {
        case PromptKind::self_instruct: {
            static constexpr std::array<std::string_view, 1> names{"Seed Question"};
            return {{"user", substitute(kSelfInstruct, names, slots)}};
        }
        case PromptKind::solver_feedback: {
            static constexpr std::array<std::string_view, 2> names{"Seed Question", "Accuracy"};
            return {{"user", substitute(kSolverFeedback, names, slots)}};
        }
        case PromptKind::solve: {
            static constexpr std::array<std::string_view, 1> names{"Question"};
            return {{"user", substitute(kSolve, names, slots)}};
        }
        case PromptKind::design_cot: {
            static constexpr std::array<std::string_view, 3> names{"Problem 1", "Solution 1",
                                                                   "Problem 2"};
            std::string user = substitute(kDesignUser, names, slots);
            return {{"system", std::string(kDesignSystem)}, {"user", std::move(user)}};
        }
    }
    throw ParameterError("unknown prompt kind");
}

std::string format_accuracy(double accuracy) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw ParameterError("accuracy outside [0, 1]");
    std::array<char, 16> buf{};
    std::snprintf(buf.data(), buf.size(), "%.2f", accuracy);
    return buf.data();
}

PromptKind parse_prompt_kind(std::string_view name) {
    if (name == "self_instruct") return PromptKind::self_instruct;
    if (name == "solver_feedback") return PromptKind::solver_feedback;
    if (name == "solve") return PromptKind::solve;
    if (name == "design_cot") return PromptKind::design_cot;
    throw ParameterError("unknown prompt kind: " + std::string(name));
}

std::string_view prompt_kind_name(PromptKind kind) noexcept {
    switch (kind) {
        case PromptKind::self_instruct: return "self_instruct";
        case PromptKind::solver_feedback: return "solver_feedback";
        case PromptKind::solve: return "solve";
        case PromptKind::design_cot: return "design_cot";
    }
    return "unknown";
}

}  // namespace poser
