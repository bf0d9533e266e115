#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace poser {

using Rational = boost::multiprecision::cpp_rational;

/// A final answer after the closed normalization rule list.
///
/// `numeric_value` is present when the canonical text is an integer, a
/// terminating decimal, or `p/q` with integer p and q; it is the exact value.
struct NormalizedAnswer {
    std::string canonical_text;
    std::optional<Rational> numeric_value;

    friend bool operator==(const NormalizedAnswer&, const NormalizedAnswer&) = default;
};

/// Rewrites a raw answer into canonical form. Rules, applied in order and
/// repeated until nothing changes:
///   1. trim whitespace and trailing periods
///   2. drop `\left` / `\right`
///   3. `\frac{a}{b}`, `\dfrac{a}{b}` -> `a/b` (non-atomic parts parenthesized)
///   4. unwrap `\text{...}`; drop `degrees`, `^\circ`, `^{\circ}`, `°`, `\%`, `%`
///   5. collapse internal whitespace
///   6. drop thousands separators in digit strings (`3,141` -> `3141`)
///   7. lowercase a single-letter answer (multiple choice)
/// Unknown macros pass through verbatim. Throws ExtractionError("empty answer")
/// when nothing is left.
NormalizedAnswer normalize_answer(std::string_view raw);

/// Content of the last balanced `\boxed{...}` group, normalized. Throws
/// ExtractionError("no boxed answer") when there is none.
NormalizedAnswer extract_boxed(std::string_view response);

/// Same as extract_boxed but maps every extraction failure to nullopt.
std::optional<NormalizedAnswer> try_extract_boxed(std::string_view response) noexcept;

/// Exact equality: equal rationals when both are numeric, else byte-identical
/// canonical text. No tolerance.
bool answers_match(const NormalizedAnswer& a, const NormalizedAnswer& b);

/// The 0/1 verifiable reward: 1 iff the response's boxed answer matches the
/// label. Total over all inputs; extraction failure scores 0.
int verifiable_reward(std::string_view response, std::string_view label) noexcept;

/// Key under which equivalent answers collide (numeric value or text).
std::string equivalence_key(const NormalizedAnswer& answer);

}  // namespace poser
