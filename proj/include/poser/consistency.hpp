#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poser/answer.hpp"

namespace poser {

/// The m solver responses to one problem. An answer is absent when no boxed
/// answer could be extracted from the matching raw text.
struct SolverSampleSet {
    std::string problem_id;
    std::vector<std::optional<NormalizedAnswer>> answers;
    std::vector<std::string> raw_texts;

    /// Extracts answers from raw responses.
    static SolverSampleSet from_responses(std::string problem_id, std::vector<std::string> raw);
};

double hoeffding_half_width(std::size_t m, double delta);

struct ConsistencyEstimate {
    std::optional<NormalizedAnswer> pseudo_label;
    double a_hat = 0.0;
    std::size_t m = 0;

    double hoeffding_half_width(double delta) const { return poser::hoeffding_half_width(m, delta); }
};

/// Mode of the present answers (equivalent answers pooled). Ties go to the
/// lexicographically smallest canonical text. Absent answers count toward m
/// but never toward the mode.
ConsistencyEstimate majority_vote(const SolverSampleSet& samples);

/// Same, over already extracted answers.
ConsistencyEstimate majority_vote(std::span<const std::optional<NormalizedAnswer>> answers);

/// Sample Pearson coefficient. Throws ParameterError on length mismatch or
/// fewer than 2 points, and "degenerate correlation input" on zero variance.
double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

}  // namespace poser
