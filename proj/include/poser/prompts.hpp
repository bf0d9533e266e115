#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace poser {

struct Message {
    std::string role;
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

enum class PromptKind { self_instruct, solver_feedback, solve, design_cot };

using Slots = std::map<std::string, std::string, std::less<>>;

/// Slot names per kind:
///   self_instruct    {Seed Question}
///   solver_feedback  {Seed Question} {Accuracy}
///   solve            {Question}
///   design_cot       {Problem 1} {Solution 1} {Problem 2}
/// `Solution 1` is optional and defaults to "(not provided)". Every other
/// missing slot throws ParameterError("missing prompt slot: <name>"). Values
/// are inserted literally in one pass, so braces inside values are inert.
std::vector<Message> render_prompt(PromptKind kind, const Slots& slots);

/// Accuracy as it appears in the feedback prompt: two decimals.
std::string format_accuracy(double accuracy);

PromptKind parse_prompt_kind(std::string_view name);
std::string_view prompt_kind_name(PromptKind kind) noexcept;

}  // namespace poser
