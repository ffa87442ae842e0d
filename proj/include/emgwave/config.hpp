#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "features.hpp"
#include "fusion.hpp"
#include "mlp.hpp"
#include "synthetic.hpp"
#include "util.hpp"

namespace emgwave {

enum class FeatureSet { conventional12, all17 };

constexpr std::string_view feature_set_name(FeatureSet s) {
    return s == FeatureSet::conventional12 ? "conventional12" : "all17";
}

// Everything a full experiment needs. Defaults mirror the documented config
// keys; a config file and CLI overrides only ever adjust fields here.
struct ExperimentConfig {
    std::string csv_path;  // empty = generate synthetic data
    SyntheticSpec synth;

    double sample_rate_hz = 4000.0;
    double window_ms = 100.0;
    double overlap_ms = 50.0;
    std::size_t levels = 2;
    SubbandMode subbands = SubbandMode::details_plus_approx;
    FeatureSet feature_set = FeatureSet::all17;

    double threshold_scale = 0.2;
    std::optional<double> myop_threshold;  // absolute overrides
    std::optional<double> wamp_threshold;
    double ialv_offset = 1.0;
    double ialv_floor = 1e-12;

    std::set<int> train_trials = {1, 2, 3, 4};
    std::set<int> test_trials = {5, 6};

    int epochs = 300;
    int batch_size = 32;
    double learning_rate = 1e-3;
    int patience = 30;

    std::vector<FusionMethod> fusion_methods = {FusionMethod::majority_vote,
                                                FusionMethod::bayesian_product,
                                                FusionMethod::sum_of_posteriors};
    double bayes_epsilon = 0.0;
    std::vector<double> signal_lengths_ms = {300, 550, 800, 1050, 1300, 1550, 1800, 2050};
    double report_length_ms = 800.0;

    std::uint64_t seed = 42;
};

inline WindowSpec window_spec(const ExperimentConfig& cfg) {
    double win = cfg.window_ms * cfg.sample_rate_hz / 1000.0;
    double ovl = cfg.overlap_ms * cfg.sample_rate_hz / 1000.0;
    WindowSpec spec;
    spec.window_len_samples = static_cast<std::size_t>(std::llround(win));
    spec.stride_samples = spec.window_len_samples - static_cast<std::size_t>(std::llround(ovl));
    return spec;
}

inline ExtractionOptions extraction_options(const ExperimentConfig& cfg) {
    ExtractionOptions opts;
    opts.levels = cfg.levels;
    opts.subbands = cfg.subbands;
    opts.threshold_scale = cfg.threshold_scale;
    opts.myop_threshold = cfg.myop_threshold;
    opts.wamp_threshold = cfg.wamp_threshold;
    opts.ialv_offset = cfg.ialv_offset;
    opts.ialv_floor = cfg.ialv_floor;
    if (cfg.feature_set == FeatureSet::conventional12) opts.kinds = conventional_kinds();
    return opts;
}

inline TrainConfig train_config(const ExperimentConfig& cfg) {
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.patience = cfg.patience;
    tc.seed = mix_seed(cfg.seed, 0x7261696eULL);  // training stream
    return tc;
}

inline std::size_t signal_length_samples(const ExperimentConfig& cfg, double length_ms) {
    double exact = length_ms * cfg.sample_rate_hz / 1000.0;
    double rounded = std::round(exact);
    if (std::fabs(exact - rounded) > 1e-9 || rounded < 1.0)
        throw std::invalid_argument("config: signal length " + format_double(length_ms) +
                                    " ms is not a whole number of samples at " +
                                    format_double(cfg.sample_rate_hz) + " Hz");
    return static_cast<std::size_t>(rounded);
}

inline void validate(const ExperimentConfig& cfg) {
    if (!(cfg.sample_rate_hz > 0.0)) throw std::invalid_argument("config: sample_rate_hz must be > 0");
    if (!(cfg.window_ms > 0.0)) throw std::invalid_argument("config: window_ms must be > 0");
    if (cfg.overlap_ms < 0.0 || cfg.overlap_ms >= cfg.window_ms)
        throw std::invalid_argument("config: overlap_ms must satisfy 0 <= overlap < window");
    if (cfg.levels < 1) throw std::invalid_argument("config: levels must be >= 1");

    WindowSpec spec = window_spec(cfg);
    double win_exact = cfg.window_ms * cfg.sample_rate_hz / 1000.0;
    if (std::fabs(win_exact - static_cast<double>(spec.window_len_samples)) > 1e-9)
        throw std::invalid_argument("config: window_ms is not a whole number of samples");
    double ovl_exact = cfg.overlap_ms * cfg.sample_rate_hz / 1000.0;
    if (std::fabs(ovl_exact - std::round(ovl_exact)) > 1e-9)
        throw std::invalid_argument("config: overlap_ms is not a whole number of samples");
    validate_spec(spec);
    std::size_t divisor = std::size_t{1} << cfg.levels;
    if (spec.window_len_samples % divisor != 0)
        throw std::invalid_argument("config: window of " + std::to_string(spec.window_len_samples) +
                                    " samples is not divisible by 2^levels = " +
                                    std::to_string(divisor));

    if (cfg.signal_lengths_ms.empty())
        throw std::invalid_argument("config: signal_lengths_ms must not be empty");
    for (double L : cfg.signal_lengths_ms) {
        if (L < cfg.window_ms)
            throw std::invalid_argument("config: signal length " + format_double(L) +
                                        " ms is shorter than the window (" +
                                        format_double(cfg.window_ms) + " ms)");
        signal_length_samples(cfg, L);
    }
    if (cfg.report_length_ms < cfg.window_ms)
        throw std::invalid_argument("config: report_length_ms is shorter than the window");
    signal_length_samples(cfg, cfg.report_length_ms);

    if (cfg.train_trials.empty() || cfg.test_trials.empty())
        throw std::invalid_argument("config: train_trials and test_trials must be non-empty");
    for (int t : cfg.train_trials)
        if (cfg.test_trials.count(t))
            throw std::invalid_argument("config: trial " + std::to_string(t) +
                                        " in both train_trials and test_trials");

    if (cfg.epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (!(cfg.learning_rate >= 0.0)) throw std::invalid_argument("config: learning_rate must be >= 0");
    if (cfg.patience < 0) throw std::invalid_argument("config: patience must be >= 0");
    if (cfg.fusion_methods.empty())
        throw std::invalid_argument("config: fusion_methods must not be empty");
    if (!(cfg.bayes_epsilon >= 0.0)) throw std::invalid_argument("config: bayes_epsilon must be >= 0");
    if (!(cfg.threshold_scale >= 0.0)) throw std::invalid_argument("config: threshold_scale must be >= 0");
    if (!(cfg.ialv_offset > 0.0)) throw std::invalid_argument("config: ialv_offset must be > 0");
    if (!(cfg.ialv_floor > 0.0)) throw std::invalid_argument("config: ialv_floor must be > 0");
}

namespace detail {

inline double parse_double_or_throw(const std::string& key, std::string_view value) {
    double v = 0.0;
    if (!parse_double(value, v))
        throw std::invalid_argument("config: bad number '" + std::string(value) + "' for key '" +
                                    key + "'");
    return v;
}

inline long long parse_int_or_throw(const std::string& key, std::string_view value) {
    long long v = 0;
    if (!parse_int64(value, v))
        throw std::invalid_argument("config: bad integer '" + std::string(value) + "' for key '" +
                                    key + "'");
    return v;
}

inline std::set<int> parse_int_set(const std::string& key, std::string_view value) {
    std::set<int> out;
    for (auto tok : split(value, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.insert(static_cast<int>(parse_int_or_throw(key, tok)));
    }
    return out;
}

}  // namespace detail

// Apply one `key = value` setting. Unknown keys are an error so typos do not
// silently fall back to defaults.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, std::string_view value) {
    using detail::parse_double_or_throw;
    using detail::parse_int_or_throw;
    value = trim(value);

    if (key == "data.csv") cfg.csv_path = std::string(value);
    else if (key == "sample_rate_hz") {
        cfg.sample_rate_hz = parse_double_or_throw(key, value);
        cfg.synth.sample_rate_hz = cfg.sample_rate_hz;
    } else if (key == "window_ms") cfg.window_ms = parse_double_or_throw(key, value);
    else if (key == "overlap_ms") cfg.overlap_ms = parse_double_or_throw(key, value);
    else if (key == "levels") cfg.levels = static_cast<std::size_t>(parse_int_or_throw(key, value));
    else if (key == "subbands") {
        if (value == "details_only") cfg.subbands = SubbandMode::details_only;
        else if (value == "details_plus_approx") cfg.subbands = SubbandMode::details_plus_approx;
        else throw std::invalid_argument("config: subbands must be details_only or details_plus_approx");
    } else if (key == "feature_set") {
        if (value == "conventional12") cfg.feature_set = FeatureSet::conventional12;
        else if (value == "all17") cfg.feature_set = FeatureSet::all17;
        else throw std::invalid_argument("config: feature_set must be conventional12 or all17");
    } else if (key == "threshold_scale") cfg.threshold_scale = parse_double_or_throw(key, value);
    else if (key == "myop_threshold") {
        if (value == "relative") cfg.myop_threshold.reset();
        else cfg.myop_threshold = parse_double_or_throw(key, value);
    } else if (key == "wamp_threshold") {
        if (value == "relative") cfg.wamp_threshold.reset();
        else cfg.wamp_threshold = parse_double_or_throw(key, value);
    } else if (key == "ialv_offset") cfg.ialv_offset = parse_double_or_throw(key, value);
    else if (key == "ialv_floor") cfg.ialv_floor = parse_double_or_throw(key, value);
    else if (key == "train_trials") cfg.train_trials = detail::parse_int_set(key, value);
    else if (key == "test_trials") cfg.test_trials = detail::parse_int_set(key, value);
    else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "learning_rate") cfg.learning_rate = parse_double_or_throw(key, value);
    else if (key == "patience") cfg.patience = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "fusion_methods") {
        cfg.fusion_methods.clear();
        for (auto tok : split(value, ',')) {
            tok = trim(tok);
            if (tok == "majority") cfg.fusion_methods.push_back(FusionMethod::majority_vote);
            else if (tok == "bayesian") cfg.fusion_methods.push_back(FusionMethod::bayesian_product);
            else if (tok == "sum") cfg.fusion_methods.push_back(FusionMethod::sum_of_posteriors);
            else throw std::invalid_argument("config: unknown fusion method '" + std::string(tok) + "'");
        }
    } else if (key == "bayes_epsilon") cfg.bayes_epsilon = parse_double_or_throw(key, value);
    else if (key == "signal_lengths_ms") {
        cfg.signal_lengths_ms.clear();
        for (auto tok : split(value, ',')) {
            tok = trim(tok);
            if (tok.empty()) continue;
            cfg.signal_lengths_ms.push_back(parse_double_or_throw(key, tok));
        }
    } else if (key == "report_length_ms") cfg.report_length_ms = parse_double_or_throw(key, value);
    else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int_or_throw(key, value));
        cfg.synth.seed = cfg.seed;
    } else if (key == "synth.classes")
        cfg.synth.class_count = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "synth.channels")
        cfg.synth.channels = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "synth.trials")
        cfg.synth.trials_per_class = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "synth.subjects")
        cfg.synth.subject_count = static_cast<int>(parse_int_or_throw(key, value));
    else if (key == "synth.duration_samples")
        cfg.synth.duration_samples = static_cast<std::size_t>(parse_int_or_throw(key, value));
    else if (key == "synth.noise_std") cfg.synth.noise_std = parse_double_or_throw(key, value);
    else if (key == "synth.burst_depth") cfg.synth.burst_depth = parse_double_or_throw(key, value);
    else if (key == "synth.amplitude") cfg.synth.amplitude = parse_double_or_throw(key, value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<stream>") {
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument(source + ":" + std::to_string(line_no) +
                                        ": expected 'key = value'");
        std::string key(trim(s.substr(0, eq)));
        try {
            apply_setting(cfg, key, s.substr(eq + 1));
        } catch (const std::exception& e) {
            throw std::invalid_argument(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open '" + path + "'");
    return parse_config(in, path);
}

// All keys with their current values, re-parseable as a config file.
inline std::string config_echo(const ExperimentConfig& cfg) {
    std::ostringstream out;
    auto join_ints = [](const std::set<int>& s) {
        std::string r;
        for (int v : s) {
            if (!r.empty()) r += ',';
            r += std::to_string(v);
        }
        return r;
    };
    out << "data.csv = " << cfg.csv_path << '\n';
    out << "sample_rate_hz = " << format_double(cfg.sample_rate_hz) << '\n';
    out << "window_ms = " << format_double(cfg.window_ms) << '\n';
    out << "overlap_ms = " << format_double(cfg.overlap_ms) << '\n';
    out << "levels = " << cfg.levels << '\n';
    out << "subbands = "
        << (cfg.subbands == SubbandMode::details_only ? "details_only" : "details_plus_approx")
        << '\n';
    out << "feature_set = " << feature_set_name(cfg.feature_set) << '\n';
    out << "threshold_scale = " << format_double(cfg.threshold_scale) << '\n';
    out << "myop_threshold = "
        << (cfg.myop_threshold ? format_double(*cfg.myop_threshold) : std::string("relative")) << '\n';
    out << "wamp_threshold = "
        << (cfg.wamp_threshold ? format_double(*cfg.wamp_threshold) : std::string("relative")) << '\n';
    out << "ialv_offset = " << format_double(cfg.ialv_offset) << '\n';
    out << "ialv_floor = " << format_double(cfg.ialv_floor) << '\n';
    out << "train_trials = " << join_ints(cfg.train_trials) << '\n';
    out << "test_trials = " << join_ints(cfg.test_trials) << '\n';
    out << "epochs = " << cfg.epochs << '\n';
    out << "batch_size = " << cfg.batch_size << '\n';
    out << "learning_rate = " << format_double(cfg.learning_rate) << '\n';
    out << "patience = " << cfg.patience << '\n';
    {
        std::string methods;
        for (FusionMethod m : cfg.fusion_methods) {
            if (!methods.empty()) methods += ',';
            methods += std::string(fusion_method_name(m));
        }
        out << "fusion_methods = " << methods << '\n';
    }
    out << "bayes_epsilon = " << format_double(cfg.bayes_epsilon) << '\n';
    {
        std::string lengths;
        for (double L : cfg.signal_lengths_ms) {
            if (!lengths.empty()) lengths += ',';
            lengths += format_double(L);
        }
        out << "signal_lengths_ms = " << lengths << '\n';
    }
    out << "report_length_ms = " << format_double(cfg.report_length_ms) << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "synth.classes = " << cfg.synth.class_count << '\n';
    out << "synth.channels = " << cfg.synth.channels << '\n';
    out << "synth.trials = " << cfg.synth.trials_per_class << '\n';
    out << "synth.subjects = " << cfg.synth.subject_count << '\n';
    out << "synth.duration_samples = " << cfg.synth.duration_samples << '\n';
    out << "synth.noise_std = " << format_double(cfg.synth.noise_std) << '\n';
    out << "synth.burst_depth = " << format_double(cfg.synth.burst_depth) << '\n';
    out << "synth.amplitude = " << format_double(cfg.synth.amplitude) << '\n';
    return out.str();
}

}  // namespace emgwave
