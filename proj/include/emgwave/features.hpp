#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "signal.hpp"
#include "wavelet.hpp"

namespace emgwave {

// The 17 per-sub-band features in canonical order. This order is the feature
// vector layout contract: models and serialized feature files depend on it.
enum class FeatureKind : int {
    IEMG,   // integrated absolute value
    MAV,    // mean absolute value
    SSI,    // simple square integral
    RMS,    // root mean square
    VAR,    // uncentered variance, 1/(N-1) sum x^2
    MYOP,   // myopulse percentage rate, fraction of |x| > T
    WL,     // waveform length
    DAMV,   // mean absolute first difference
    M2,     // sum of squared first differences
    DVARV,  // 1/(N-2) sum of squared first differences
    DASDV,  // rms of first differences with 1/(N-1)
    WAMP,   // Willison amplitude, count of |dx| > T
    IASD,   // integrated absolute second derivative
    IATD,   // integrated absolute third derivative
    IEAV,   // integrated exponential of absolute values
    IALV,   // integrated absolute log values
    IE      // integrated exponential
};

inline constexpr std::array<FeatureKind, 17> all_feature_kinds = {
    FeatureKind::IEMG, FeatureKind::MAV,   FeatureKind::SSI,  FeatureKind::RMS,
    FeatureKind::VAR,  FeatureKind::MYOP,  FeatureKind::WL,   FeatureKind::DAMV,
    FeatureKind::M2,   FeatureKind::DVARV, FeatureKind::DASDV, FeatureKind::WAMP,
    FeatureKind::IASD, FeatureKind::IATD,  FeatureKind::IEAV, FeatureKind::IALV,
    FeatureKind::IE};

inline constexpr std::size_t conventional_feature_count = 12;

constexpr std::string_view feature_name(FeatureKind k) {
    switch (k) {
        case FeatureKind::IEMG: return "IEMG";
        case FeatureKind::MAV: return "MAV";
        case FeatureKind::SSI: return "SSI";
        case FeatureKind::RMS: return "RMS";
        case FeatureKind::VAR: return "VAR";
        case FeatureKind::MYOP: return "MYOP";
        case FeatureKind::WL: return "WL";
        case FeatureKind::DAMV: return "DAMV";
        case FeatureKind::M2: return "M2";
        case FeatureKind::DVARV: return "DVARV";
        case FeatureKind::DASDV: return "DASDV";
        case FeatureKind::WAMP: return "WAMP";
        case FeatureKind::IASD: return "IASD";
        case FeatureKind::IATD: return "IATD";
        case FeatureKind::IEAV: return "IEAV";
        case FeatureKind::IALV: return "IALV";
        case FeatureKind::IE: return "IE";
    }
    return "?";
}

inline std::vector<FeatureKind> conventional_kinds() {
    return std::vector<FeatureKind>(all_feature_kinds.begin(),
                                    all_feature_kinds.begin() + conventional_feature_count);
}

// Thresholds used by individual feature evaluations. myop/wamp thresholds are
// absolute amplitudes here; relative defaulting happens in extract_vector.
struct FeatureParams {
    double myop_threshold = 0.0;
    double wamp_threshold = 0.0;
    double ialv_offset = 1.0;    // T added inside the log
    double ialv_floor = 1e-12;   // clamp for log argument, makes IALV total
};

// exp() overflows double a little above 709; reject loudly instead of
// returning Inf.
inline constexpr double kExpOverflowGuard = 700.0;

namespace detail {

inline void require_finite(std::span<const double> x, const char* fn) {
    for (double v : x)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(fn) + ": non-finite input sample");
}

inline void require_len(std::span<const double> x, std::size_t min_len, const char* fn) {
    if (x.size() < min_len)
        throw std::invalid_argument(std::string(fn) + ": needs at least " +
                                    std::to_string(min_len) + " samples, got " +
                                    std::to_string(x.size()));
}

}  // namespace detail

inline double iemg(std::span<const double> x) {
    detail::require_len(x, 1, "iemg");
    detail::require_finite(x, "iemg");
    double s = 0.0;
    for (double v : x) s += std::fabs(v);
    return s;
}

inline double mav(std::span<const double> x) {
    detail::require_len(x, 1, "mav");
    return iemg(x) / static_cast<double>(x.size());
}

inline double ssi(std::span<const double> x) {
    detail::require_len(x, 1, "ssi");
    detail::require_finite(x, "ssi");
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline double rms(std::span<const double> x) {
    detail::require_len(x, 1, "rms");
    return std::sqrt(ssi(x) / static_cast<double>(x.size()));
}

// VAR as defined for (assumed zero-mean) EMG: sum of squares over N-1, no
// mean subtraction.
inline double var(std::span<const double> x) {
    detail::require_len(x, 2, "var");
    return ssi(x) / static_cast<double>(x.size() - 1);
}

inline double myop(std::span<const double> x, double threshold) {
    detail::require_len(x, 1, "myop");
    detail::require_finite(x, "myop");
    std::size_t count = 0;
    for (double v : x)
        if (std::fabs(v) > threshold) ++count;
    return static_cast<double>(count) / static_cast<double>(x.size());
}

inline double wl(std::span<const double> x) {
    detail::require_len(x, 2, "wl");
    detail::require_finite(x, "wl");
    double s = 0.0;
    for (std::size_t n = 0; n + 1 < x.size(); ++n) s += std::fabs(x[n + 1] - x[n]);
    return s;
}

inline double damv(std::span<const double> x) {
    detail::require_len(x, 2, "damv");
    return wl(x) / static_cast<double>(x.size() - 1);
}

inline double m2(std::span<const double> x) {
    detail::require_len(x, 2, "m2");
    detail::require_finite(x, "m2");
    double s = 0.0;
    for (std::size_t n = 0; n + 1 < x.size(); ++n) {
        double d = x[n + 1] - x[n];
        s += d * d;
    }
    return s;
}

inline double dvarv(std::span<const double> x) {
    detail::require_len(x, 3, "dvarv");
    return m2(x) / static_cast<double>(x.size() - 2);
}

inline double dasdv(std::span<const double> x) {
    detail::require_len(x, 2, "dasdv");
    return std::sqrt(m2(x) / static_cast<double>(x.size() - 1));
}

inline double wamp(std::span<const double> x, double threshold) {
    detail::require_len(x, 2, "wamp");
    detail::require_finite(x, "wamp");
    std::size_t count = 0;
    for (std::size_t n = 0; n + 1 < x.size(); ++n)
        if (std::fabs(x[n + 1] - x[n]) > threshold) ++count;
    return static_cast<double>(count);
}

// Sum of absolute second differences: with x'[n] = x[n+1]-x[n], accumulate
// |x'[n+1]-x'[n]|. Zero for any linear ramp.
inline double iasd(std::span<const double> x) {
    detail::require_len(x, 3, "iasd");
    detail::require_finite(x, "iasd");
    double s = 0.0;
    for (std::size_t n = 0; n + 2 < x.size(); ++n) {
        double d1 = x[n + 1] - x[n];
        double d2 = x[n + 2] - x[n + 1];
        s += std::fabs(d2 - d1);
    }
    return s;
}

// Sum of absolute third differences. Zero for any quadratic.
inline double iatd(std::span<const double> x) {
    detail::require_len(x, 4, "iatd");
    detail::require_finite(x, "iatd");
    double s = 0.0;
    for (std::size_t n = 0; n + 3 < x.size(); ++n) {
        double s1 = x[n + 2] - 2.0 * x[n + 1] + x[n];
        double s2 = x[n + 3] - 2.0 * x[n + 2] + x[n + 1];
        s += std::fabs(s2 - s1);
    }
    return s;
}

inline double ieav(std::span<const double> x) {
    detail::require_len(x, 1, "ieav");
    detail::require_finite(x, "ieav");
    double s = 0.0;
    for (double v : x) {
        double a = std::fabs(v);
        if (a >= kExpOverflowGuard)
            throw std::invalid_argument("ieav: |x| = " + std::to_string(a) +
                                        " exceeds the exp overflow guard (" +
                                        std::to_string(kExpOverflowGuard) +
                                        "); normalize the signal first");
        s += std::exp(a);
    }
    return s;
}

// IALV with the log argument clamped to ialv_floor so the function is total
// on real inputs.
inline double ialv(std::span<const double> x, const FeatureParams& params) {
    detail::require_len(x, 1, "ialv");
    detail::require_finite(x, "ialv");
    if (!(params.ialv_offset > 0.0)) throw std::invalid_argument("ialv: offset must be > 0");
    if (!(params.ialv_floor > 0.0)) throw std::invalid_argument("ialv: floor must be > 0");
    double s = 0.0;
    for (double v : x) {
        double arg = v + params.ialv_offset;
        if (arg < params.ialv_floor) arg = params.ialv_floor;
        s += std::fabs(std::log(arg));
    }
    return s;
}

inline double ie(std::span<const double> x) {
    detail::require_len(x, 1, "ie");
    detail::require_finite(x, "ie");
    double s = 0.0;
    for (double v : x) {
        if (v >= kExpOverflowGuard)
            throw std::invalid_argument("ie: x = " + std::to_string(v) +
                                        " exceeds the exp overflow guard (" +
                                        std::to_string(kExpOverflowGuard) +
                                        "); normalize the signal first");
        s += std::exp(v);
    }
    return s;
}

// Evaluate one of the 12 conventional kinds; MYOP and WAMP read their
// thresholds from params.
inline double conventional_feature(FeatureKind kind, std::span<const double> x,
                                   const FeatureParams& params) {
    switch (kind) {
        case FeatureKind::IEMG: return iemg(x);
        case FeatureKind::MAV: return mav(x);
        case FeatureKind::SSI: return ssi(x);
        case FeatureKind::RMS: return rms(x);
        case FeatureKind::VAR: return var(x);
        case FeatureKind::MYOP:
            if (params.myop_threshold < 0.0)
                throw std::invalid_argument("myop: threshold must be >= 0");
            return myop(x, params.myop_threshold);
        case FeatureKind::WL: return wl(x);
        case FeatureKind::DAMV: return damv(x);
        case FeatureKind::M2: return m2(x);
        case FeatureKind::DVARV: return dvarv(x);
        case FeatureKind::DASDV: return dasdv(x);
        case FeatureKind::WAMP:
            if (params.wamp_threshold < 0.0)
                throw std::invalid_argument("wamp: threshold must be >= 0");
            return wamp(x, params.wamp_threshold);
        default:
            throw std::invalid_argument("conventional_feature: " +
                                        std::string(feature_name(kind)) +
                                        " is not one of the 12 conventional kinds");
    }
}

inline double compute_feature(FeatureKind kind, std::span<const double> x,
                              const FeatureParams& params) {
    switch (kind) {
        case FeatureKind::IASD: return iasd(x);
        case FeatureKind::IATD: return iatd(x);
        case FeatureKind::IEAV: return ieav(x);
        case FeatureKind::IALV: return ialv(x, params);
        case FeatureKind::IE: return ie(x);
        default: return conventional_feature(kind, x, params);
    }
}

enum class SubbandMode { details_only, details_plus_approx };

// Per-window extraction settings. MYOP/WAMP thresholds default to
// threshold_scale times the sub-band's sample standard deviation, so they
// track the scale differences between wavelet levels; set the absolute
// overrides to pin them instead.
struct ExtractionOptions {
    std::size_t levels = 2;
    SubbandMode subbands = SubbandMode::details_plus_approx;
    double threshold_scale = 0.2;
    std::optional<double> myop_threshold;
    std::optional<double> wamp_threshold;
    double ialv_offset = 1.0;
    double ialv_floor = 1e-12;
    std::vector<FeatureKind> kinds;  // empty = all 17; must be in canonical order
};

namespace detail {

inline std::vector<FeatureKind> resolve_kinds(const ExtractionOptions& opts) {
    if (opts.kinds.empty())
        return std::vector<FeatureKind>(all_feature_kinds.begin(), all_feature_kinds.end());
    std::vector<FeatureKind> kinds = opts.kinds;
    for (std::size_t i = 0; i + 1 < kinds.size(); ++i)
        if (static_cast<int>(kinds[i]) >= static_cast<int>(kinds[i + 1]))
            throw std::invalid_argument(
                "extract_vector: feature kinds must be unique and in canonical order");
    return kinds;
}

inline double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) {
        double d = v - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace detail

inline std::vector<std::string> subband_labels(const ExtractionOptions& opts) {
    std::vector<std::string> labels;
    for (std::size_t j = 1; j <= opts.levels; ++j) labels.push_back("D" + std::to_string(j));
    if (opts.subbands == SubbandMode::details_plus_approx)
        labels.push_back("A" + std::to_string(opts.levels));
    return labels;
}

// Dimension names in layout order: channel-major, then sub-band
// (D1, ..., DL, A_L), then feature kind.
inline std::vector<std::string> feature_layout_names(std::size_t channel_count,
                                                     const ExtractionOptions& opts) {
    std::vector<FeatureKind> kinds = detail::resolve_kinds(opts);
    std::vector<std::string> bands = subband_labels(opts);
    std::vector<std::string> names;
    names.reserve(channel_count * bands.size() * kinds.size());
    for (std::size_t c = 1; c <= channel_count; ++c)
        for (const std::string& band : bands)
            for (FeatureKind k : kinds)
                names.push_back("ch" + std::to_string(c) + "_" + band + "_" +
                                std::string(feature_name(k)));
    return names;
}

inline std::string feature_layout_string(std::size_t channel_count,
                                         const ExtractionOptions& opts) {
    std::string s;
    for (const std::string& name : feature_layout_names(channel_count, opts)) {
        if (!s.empty()) s += ',';
        s += name;
    }
    return s;
}

inline std::size_t feature_vector_dim(std::size_t channel_count, const ExtractionOptions& opts) {
    std::size_t bands = opts.levels + (opts.subbands == SubbandMode::details_plus_approx ? 1 : 0);
    return detail::resolve_kinds(opts).size() * bands * channel_count;
}

// Decompose every channel of the window and evaluate the selected features on
// each sub-band, in layout order.
inline std::vector<double> extract_vector(const Window& window, const ExtractionOptions& opts) {
    std::vector<FeatureKind> kinds = detail::resolve_kinds(opts);
    std::vector<std::string> bands = subband_labels(opts);

    std::vector<double> out;
    out.reserve(window.channel_count() * bands.size() * kinds.size());

    for (std::size_t c = 0; c < window.channel_count(); ++c) {
        WaveletDecomposition d = decompose(window.channel(c), opts.levels);
        std::vector<std::span<const double>> subbands;
        for (const std::vector<double>& det : d.details) subbands.emplace_back(det);
        if (opts.subbands == SubbandMode::details_plus_approx)
            subbands.emplace_back(d.approximation);

        for (std::size_t b = 0; b < subbands.size(); ++b) {
            std::span<const double> coeffs = subbands[b];
            FeatureParams params;
            params.ialv_offset = opts.ialv_offset;
            params.ialv_floor = opts.ialv_floor;
            double sd = detail::sample_sd(coeffs);
            params.myop_threshold = opts.myop_threshold.value_or(opts.threshold_scale * sd);
            params.wamp_threshold = opts.wamp_threshold.value_or(opts.threshold_scale * sd);
            for (FeatureKind k : kinds) {
                try {
                    out.push_back(compute_feature(k, coeffs, params));
                } catch (const std::exception& e) {
                    throw std::invalid_argument("extract_vector: channel " + std::to_string(c + 1) +
                                                " band " + bands[b] + ": " + e.what());
                }
            }
        }
    }
    return out;
}

}  // namespace emgwave
