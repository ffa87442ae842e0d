#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace emgwave {

// 1/sqrt(2): orthonormal Haar filter coefficient. The orthonormal convention
// preserves energy, so Parseval holds exactly (up to rounding).
inline constexpr double kHaarNorm = 0.70710678118654752440;

// Multi-level Haar decomposition of one window of one channel.
// details[j] holds the level j+1 detail band; approximation is the deepest
// level's lowpass band. Coefficient counts halve per level and sum to
// original_len.
struct WaveletDecomposition {
    std::vector<std::vector<double>> details;
    std::vector<double> approximation;
    std::size_t levels = 0;
    std::size_t original_len = 0;
};

// One Haar analysis step: pairwise scaled sums and differences.
//   approximation[k] = (x[2k] + x[2k+1]) / sqrt(2)
//   detail[k]        = (x[2k] - x[2k+1]) / sqrt(2)
inline std::pair<std::vector<double>, std::vector<double>> haar_step(std::span<const double> x) {
    if (x.empty()) throw std::invalid_argument("haar_step: empty signal");
    if (x.size() % 2 != 0)
        throw std::invalid_argument("haar_step: length " + std::to_string(x.size()) +
                                    " is odd; a Haar step needs an even length");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("haar_step: non-finite sample");

    std::size_t half = x.size() / 2;
    std::vector<double> approx(half), detail(half);
    for (std::size_t k = 0; k < half; ++k) {
        approx[k] = (x[2 * k] + x[2 * k + 1]) * kHaarNorm;
        detail[k] = (x[2 * k] - x[2 * k + 1]) * kHaarNorm;
    }
    return {std::move(approx), std::move(detail)};
}

// Repeated Haar steps on the approximation branch. Lengths not divisible by
// 2^levels are rejected rather than padded.
inline WaveletDecomposition decompose(std::span<const double> x, std::size_t levels) {
    if (levels == 0) throw std::invalid_argument("decompose: levels must be >= 1");
    if (levels >= 63) throw std::invalid_argument("decompose: levels too large");
    std::size_t divisor = std::size_t{1} << levels;
    if (x.empty() || x.size() % divisor != 0)
        throw std::invalid_argument("decompose: length " + std::to_string(x.size()) +
                                    " not divisible by " + std::to_string(divisor) + " (levels=" +
                                    std::to_string(levels) + " requires a multiple of " +
                                    std::to_string(divisor) + ")");

    WaveletDecomposition d;
    d.levels = levels;
    d.original_len = x.size();
    d.details.reserve(levels);

    std::vector<double> current(x.begin(), x.end());
    for (std::size_t j = 0; j < levels; ++j) {
        auto [approx, detail] = haar_step(current);
        d.details.push_back(std::move(detail));
        current = std::move(approx);
    }
    d.approximation = std::move(current);
    return d;
}

// Inverse transform; exact up to rounding because the filter is orthonormal.
inline std::vector<double> reconstruct(const WaveletDecomposition& d) {
    if (d.levels == 0 || d.details.size() != d.levels)
        throw std::invalid_argument("reconstruct: level count inconsistent with detail bands");
    if (d.approximation.size() != d.details.back().size())
        throw std::invalid_argument("reconstruct: approximation length " +
                                    std::to_string(d.approximation.size()) +
                                    " does not match deepest detail length " +
                                    std::to_string(d.details.back().size()));
    for (std::size_t j = 0; j + 1 < d.levels; ++j)
        if (d.details[j].size() != 2 * d.details[j + 1].size())
            throw std::invalid_argument("reconstruct: detail band lengths do not halve per level");
    if (d.details[0].size() * 2 != d.original_len)
        throw std::invalid_argument("reconstruct: original_len inconsistent with detail bands");

    std::vector<double> current = d.approximation;
    for (std::size_t j = d.levels; j-- > 0;) {
        const std::vector<double>& detail = d.details[j];
        std::vector<double> next(current.size() * 2);
        for (std::size_t k = 0; k < current.size(); ++k) {
            next[2 * k] = (current[k] + detail[k]) * kHaarNorm;
            next[2 * k + 1] = (current[k] - detail[k]) * kHaarNorm;
        }
        current = std::move(next);
    }
    return current;
}

}  // namespace emgwave
