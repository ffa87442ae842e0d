#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlp.hpp"

namespace emgwave {

enum class FusionMethod { majority_vote, bayesian_product, sum_of_posteriors };

constexpr std::string_view fusion_method_name(FusionMethod m) {
    switch (m) {
        case FusionMethod::majority_vote: return "majority";
        case FusionMethod::bayesian_product: return "bayesian";
        case FusionMethod::sum_of_posteriors: return "sum";
    }
    return "?";
}

// Combined decision over one signal segment. scores are method-dependent:
// vote counts, per-class log-product scores, or summed probabilities.
struct FusionDecision {
    int chosen_class = 0;  // 1-based; attains the max score, ties -> lowest id
    std::vector<double> scores;
    std::size_t window_count = 0;
};

namespace detail {

inline void validate_posteriors(std::span<const ClassPosterior> posteriors, const char* fn) {
    if (posteriors.empty()) throw std::invalid_argument(std::string(fn) + ": empty posterior list");
    std::size_t classes = posteriors.front().size();
    if (classes == 0) throw std::invalid_argument(std::string(fn) + ": zero-length posterior");
    for (const auto& p : posteriors) {
        if (p.size() != classes)
            throw std::invalid_argument(std::string(fn) + ": posteriors of unequal length");
        double sum = 0.0;
        for (double v : p) {
            if (!std::isfinite(v) || v < -1e-12 || v > 1.0 + 1e-12)
                throw std::invalid_argument(std::string(fn) + ": probability outside [0, 1]");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument(std::string(fn) + ": probabilities sum to " +
                                        std::to_string(sum) + ", expected 1");
    }
}

inline int argmax_lowest(const std::vector<double>& scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return static_cast<int>(best) + 1;
}

// Sum in ascending order so the result is a function of the value multiset,
// which makes all fusion scores bitwise permutation-invariant.
inline double sorted_sum(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

}  // namespace detail

// Each window votes for its most probable class; window-level ties vote for
// the lowest class id.
inline FusionDecision fuse_majority(std::span<const ClassPosterior> posteriors) {
    detail::validate_posteriors(posteriors, "fuse_majority");
    std::size_t classes = posteriors.front().size();
    FusionDecision d;
    d.window_count = posteriors.size();
    d.scores.assign(classes, 0.0);
    for (const auto& p : posteriors) d.scores[detail::argmax_lowest(p) - 1] += 1.0;
    d.chosen_class = detail::argmax_lowest(d.scores);
    return d;
}

// Product rule in log space; the normalization constant is argmax-invariant
// and never materialized. epsilon > 0 smooths away zero probabilities;
// epsilon = 0 keeps the exact product semantics, where a single vanishing
// window probability sends the class score to -inf.
inline FusionDecision fuse_bayesian(std::span<const ClassPosterior> posteriors,
                                    double epsilon = 0.0) {
    detail::validate_posteriors(posteriors, "fuse_bayesian");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("fuse_bayesian: epsilon must be >= 0");
    std::size_t classes = posteriors.front().size();
    FusionDecision d;
    d.window_count = posteriors.size();
    d.scores.assign(classes, 0.0);
    std::vector<double> logs(posteriors.size());
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t j = 0; j < posteriors.size(); ++j) {
            double p = std::max(posteriors[j][c], 0.0) + epsilon;
            logs[j] = std::log(p);  // log(0) = -inf is intended
        }
        d.scores[c] = detail::sorted_sum(logs);
    }
    bool any_finite = false;
    for (double s : d.scores)
        if (s > -std::numeric_limits<double>::infinity()) any_finite = true;
    if (!any_finite)
        throw std::runtime_error(
            "fuse_bayesian: degenerate posteriors (every class has a vanishing window probability)");
    d.chosen_class = detail::argmax_lowest(d.scores);
    return d;
}

// Sum rule: per-class sum of window probabilities.
inline FusionDecision fuse_sum(std::span<const ClassPosterior> posteriors) {
    detail::validate_posteriors(posteriors, "fuse_sum");
    std::size_t classes = posteriors.front().size();
    FusionDecision d;
    d.window_count = posteriors.size();
    d.scores.assign(classes, 0.0);
    std::vector<double> vals(posteriors.size());
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t j = 0; j < posteriors.size(); ++j) vals[j] = posteriors[j][c];
        d.scores[c] = detail::sorted_sum(vals);
    }
    d.chosen_class = detail::argmax_lowest(d.scores);
    return d;
}

inline FusionDecision fuse(FusionMethod method, std::span<const ClassPosterior> posteriors,
                           double bayes_epsilon = 0.0) {
    switch (method) {
        case FusionMethod::majority_vote: return fuse_majority(posteriors);
        case FusionMethod::bayesian_product: return fuse_bayesian(posteriors, bayes_epsilon);
        case FusionMethod::sum_of_posteriors: return fuse_sum(posteriors);
    }
    throw std::invalid_argument("fuse: unknown method");
}

}  // namespace emgwave
