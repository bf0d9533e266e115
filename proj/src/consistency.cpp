#include "poser/consistency.hpp"

#include <cmath>
#include <algorithm>
#include <map>

#include "poser/error.hpp"

namespace poser {

SolverSampleSet SolverSampleSet::from_responses(std::string problem_id,
                                                std::vector<std::string> raw) {
    SolverSampleSet out;
    out.problem_id = std::move(problem_id);
    out.answers.reserve(raw.size());
    for (const auto& text : raw) out.answers.push_back(try_extract_boxed(text));
    out.raw_texts = std::move(raw);
    return out;
}

double hoeffding_half_width(std::size_t m, double delta) {
    if (m == 0) throw ParameterError("hoeffding_half_width: m must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) {
        throw ParameterError("hoeffding_half_width: delta must lie in (0, 1)");
    }
    return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(m)));
}

ConsistencyEstimate majority_vote(std::span<const std::optional<NormalizedAnswer>> answers) {
    if (answers.empty()) throw ParameterError("majority_vote: empty sample set");

    struct Bucket {
        const NormalizedAnswer* representative;
        std::size_t count;
    };
    std::map<std::string, Bucket> buckets;
    for (const auto& a : answers) {
        if (!a) continue;
        auto [it, inserted] = buckets.try_emplace(equivalence_key(*a), Bucket{&*a, 0});
        ++it->second.count;
        if (!inserted && a->canonical_text < it->second.representative->canonical_text) {
            it->second.representative = &*a;
        }
    }

    ConsistencyEstimate est;
    est.m = answers.size();
    const Bucket* best = nullptr;
    for (const auto& [key, bucket] : buckets) {
        if (!best || bucket.count > best->count ||
            (bucket.count == best->count &&
             bucket.representative->canonical_text < best->representative->canonical_text)) {
            best = &bucket;
        }
    }
    if (best) {
        est.pseudo_label = *best->representative;
        est.a_hat = static_cast<double>(best->count) / static_cast<double>(est.m);
    }
    return est;
}

ConsistencyEstimate majority_vote(const SolverSampleSet& samples) {
    if (samples.answers.size() != samples.raw_texts.size()) {
        throw ParameterError("majority_vote: answers and raw_texts differ in length");
    }
    return majority_vote(std::span<const std::optional<NormalizedAnswer>>(samples.answers));
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ParameterError("pearson_correlation: length mismatch");
    if (xs.size() < 2) throw ParameterError("pearson_correlation: need at least 2 points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) throw ParameterError("degenerate correlation input");
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace poser
