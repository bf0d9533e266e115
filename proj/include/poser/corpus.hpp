#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poser/prompts.hpp"

namespace poser {

/// A question with a shared stem and enumerated subquestions.
struct MultiPartQuestion {
    std::string stem;
    std::vector<std::string> parts;
    std::string source_id;
    /// The marker text that introduced each part, e.g. "(1)" or "b)".
    std::vector<std::string> markers;

    bool stemless() const noexcept { return stem.empty(); }
};

/// Finds enumerated subquestions. Marker families are "(1)", "(a)" and "1."
/// and must count up from the first value without gaps. A marker counts only
/// at the start of the text, at a line start, or after sentence punctuation
/// followed by whitespace. When several families qualify the one with the
/// most parts wins. Throws ParameterError("not multi-part") below 2 parts.
MultiPartQuestion split_multipart(std::string_view raw, std::string source_id = {});

/// Exclusion screen for proofs and trivial items.
struct ScreenResult {
    bool accepted = true;
    std::string reason;
};

/// Rejects texts containing "prove", "show that" or "verify" (any case) and
/// texts shorter than `min_length` bytes.
ScreenResult screen_problem(std::string_view text, std::size_t min_length = 30);

struct ProblemPair {
    std::string problem1;
    std::string problem2;
    std::string pair_id;
    std::string source_id;
};

/// Adjacent pairs (part k, part k+1), stem prepended to each. Pairs whose two
/// sides render identically are skipped.
std::vector<ProblemPair> make_pairs(const MultiPartQuestion& q);

/// The problem-design prompt: fixed system instructions plus a user turn
/// carrying Problem 1, Solution 1 and Problem 2.
std::vector<Message> render_design_prompt(const ProblemPair& pair,
                                          const std::optional<std::string>& solution1);

struct SftRecord {
    std::string input;
    std::string target;
    std::string pair_id;
    std::string source_id;
};

struct SftAssembly {
    std::vector<SftRecord> records;
    std::size_t dropped = 0;
};

/// Input is the self-instruct prompt on Problem 1; target is
/// `<think>CoT</think><question>Problem 2</question>`. A target that fails
/// the strict format check, or a pair without a CoT, is dropped and counted.
SftAssembly assemble_sft_records(const std::vector<ProblemPair>& pairs,
                                 const std::map<std::string, std::string>& cots);

}  // namespace poser
