#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "csv_io.hpp"
#include "features.hpp"
#include "fusion.hpp"
#include "mlp.hpp"
#include "signal.hpp"
#include "synthetic.hpp"
#include "util.hpp"

namespace emgwave {

struct AccuracyCell {
    FusionMethod method;
    FeatureSet feature_set;
    double length_ms;
    double accuracy_pct;
};

struct MethodBreakdown {
    FusionMethod method;
    std::vector<double> per_class_accuracy_pct;      // index = class id - 1
    std::vector<std::vector<std::size_t>> confusion;  // [true][0]=abstain, [true][c]=pred c
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

// Timings are per fused decision (one report_length_ms segment); the
// per-window column divides the same measurement by the window count, since
// the reference delay figures do not pin down which scope they mean.
struct StageLatency {
    std::string stage;
    std::size_t repetitions = 0;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double per_window_mean_ms = 0.0;
};

struct ExperimentReport {
    std::vector<AccuracyCell> accuracy;
    double report_length_ms = 800.0;
    int class_count = 0;
    double single_window_accuracy_pct = 0.0;  // one window, no fusion
    std::vector<MethodBreakdown> breakdowns;  // at report_length_ms
    std::vector<std::pair<std::string, std::vector<RocPoint>>> roc;  // "1".."C", "micro"
    std::vector<std::pair<std::string, double>> per_subject_accuracy_pct;
    std::vector<StageLatency> latency;  // filled by bench_latency
    std::string config_echo;
    std::uint64_t seed = 0;
};

inline std::vector<EmgRecording> load_dataset(const ExperimentConfig& cfg) {
    if (!cfg.csv_path.empty()) return load_recordings(cfg.csv_path, CsvSchema{}, cfg.sample_rate_hz);
    SyntheticSpec spec = cfg.synth;
    spec.sample_rate_hz = cfg.sample_rate_hz;
    spec.seed = cfg.seed;
    return generate_synthetic(spec);
}

namespace detail {

inline int dataset_class_count(const std::vector<EmgRecording>& recordings) {
    int c = 0;
    for (const auto& rec : recordings) c = std::max(c, rec.label);
    return c;
}

// Feature vectors for every window of every recording, kept in recording
// order regardless of worker scheduling.
inline std::vector<TrainExample> windows_to_examples(const std::vector<EmgRecording>& recordings,
                                                     const WindowSpec& spec,
                                                     const ExtractionOptions& opts) {
    std::vector<std::vector<TrainExample>> slots(recordings.size());
    par_for(recordings.size(), [&](std::size_t r) {
        std::vector<TrainExample> local;
        for (const Window& w : segment(recordings[r], spec))
            local.push_back(TrainExample{extract_vector(w, opts), w.label()});
        slots[r] = std::move(local);
    });
    std::vector<TrainExample> out;
    for (auto& s : slots)
        for (auto& ex : s) out.push_back(std::move(ex));
    return out;
}

}  // namespace detail

// Fit a model on the training trials of the given recordings. Test-trial
// recordings never reach feature standardization or the optimizer.
inline MlpModel train_model(const std::vector<EmgRecording>& recordings,
                            const ExperimentConfig& cfg) {
    validate(cfg);
    int classes = detail::dataset_class_count(recordings);
    if (classes < 2) throw std::invalid_argument("train_model: need at least 2 classes");

    DatasetSplit split = split_by_trial(recordings, cfg.train_trials, cfg.test_trials);
    WindowSpec spec = window_spec(cfg);
    ExtractionOptions opts = extraction_options(cfg);
    std::size_t channels = split.train.front().channel_count();

    std::vector<TrainExample> examples = detail::windows_to_examples(split.train, spec, opts);
    MlpModel model = init(feature_vector_dim(channels, opts), static_cast<std::size_t>(classes),
                          mix_seed(cfg.seed, 0x696e6974ULL));
    model.feature_layout = feature_layout_string(channels, opts);
    return train(std::move(model), examples, train_config(cfg)).model;
}

namespace detail {

struct TestDecisions {
    // posteriors for the first max_needed windows of each test recording
    std::vector<std::vector<ClassPosterior>> posteriors;
    std::vector<int> labels;
    std::vector<std::string> subjects;
};

inline TestDecisions classify_test_windows(const std::vector<EmgRecording>& test,
                                           const MlpModel& model, const ExperimentConfig& cfg,
                                           std::size_t max_needed) {
    WindowSpec spec = window_spec(cfg);
    ExtractionOptions opts = extraction_options(cfg);
    TestDecisions out;
    out.posteriors.resize(test.size());
    out.labels.resize(test.size());
    out.subjects.resize(test.size());
    par_for(test.size(), [&](std::size_t r) {
        const EmgRecording& rec = test[r];
        std::vector<Window> windows = segment(rec, spec);
        if (windows.size() < max_needed)
            throw std::runtime_error("evaluate: test recording (subject " + rec.subject_id +
                                     ", trial " + std::to_string(rec.trial_index) + ", label " +
                                     std::to_string(rec.label) + ") has only " +
                                     std::to_string(windows.size()) + " windows, need " +
                                     std::to_string(max_needed));
        std::vector<ClassPosterior> posts;
        posts.reserve(max_needed);
        for (std::size_t i = 0; i < max_needed; ++i)
            posts.push_back(forward(model, extract_vector(windows[i], opts)));
        out.posteriors[r] = std::move(posts);
        out.labels[r] = rec.label;
        out.subjects[r] = rec.subject_id;
    });
    return out;
}

// Fuse the first `n` window posteriors; a degenerate product (all classes at
// -inf) abstains with class 0, which scores as a miss.
inline int fused_prediction(FusionMethod method, const std::vector<ClassPosterior>& posts,
                            std::size_t n, double epsilon) {
    std::span<const ClassPosterior> prefix(posts.data(), n);
    try {
        return fuse(method, prefix, epsilon).chosen_class;
    } catch (const std::runtime_error&) {
        return 0;
    }
}

inline std::vector<RocPoint> roc_points(std::vector<std::pair<double, bool>> scored) {
    // descending score; classify positive when score >= threshold
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double positives = 0.0, negatives = 0.0;
    for (const auto& [s, pos] : scored) (pos ? positives : negatives) += 1.0;
    std::vector<RocPoint> points;
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0;
    while (i < scored.size()) {
        double thr = scored[i].first;
        while (i < scored.size() && scored[i].first == thr) {
            (scored[i].second ? tp : fp) += 1.0;
            ++i;
        }
        RocPoint pt;
        pt.threshold = thr;
        pt.tpr = positives > 0.0 ? tp / positives : 0.0;
        pt.fpr = negatives > 0.0 ? fp / negatives : 0.0;
        points.push_back(pt);
    }
    return points;
}

}  // namespace detail

// Evaluate a trained model: per-(method, length) accuracy over fused
// prefix-window decisions, plus per-class, confusion, ROC and per-subject
// detail at report_length_ms.
inline ExperimentReport evaluate_model(const std::vector<EmgRecording>& recordings,
                                       const MlpModel& model, const ExperimentConfig& cfg) {
    validate(cfg);
    DatasetSplit split = split_by_trial(recordings, cfg.train_trials, cfg.test_trials);
    std::size_t channels = split.test.front().channel_count();
    std::string layout = feature_layout_string(channels, extraction_options(cfg));
    if (!model.feature_layout.empty() && model.feature_layout != layout)
        throw std::runtime_error(
            "evaluate_model: model feature layout does not match the configured extraction");

    WindowSpec spec = window_spec(cfg);
    std::vector<std::size_t> length_windows;
    std::size_t max_needed = 1;
    for (double L : cfg.signal_lengths_ms) {
        std::size_t n = window_count(signal_length_samples(cfg, L), spec);
        length_windows.push_back(n);
        max_needed = std::max(max_needed, n);
    }
    std::size_t report_windows = window_count(signal_length_samples(cfg, cfg.report_length_ms), spec);
    max_needed = std::max(max_needed, report_windows);

    detail::TestDecisions td = detail::classify_test_windows(split.test, model, cfg, max_needed);
    std::size_t total = td.labels.size();
    int classes = static_cast<int>(model.class_count());

    ExperimentReport report;
    report.report_length_ms = cfg.report_length_ms;
    report.class_count = classes;
    report.config_echo = config_echo(cfg);
    report.seed = cfg.seed;

    for (FusionMethod method : cfg.fusion_methods) {
        for (std::size_t li = 0; li < cfg.signal_lengths_ms.size(); ++li) {
            std::size_t correct = 0;
            for (std::size_t r = 0; r < total; ++r)
                if (detail::fused_prediction(method, td.posteriors[r], length_windows[li],
                                             cfg.bayes_epsilon) == td.labels[r])
                    ++correct;
            AccuracyCell cell;
            cell.method = method;
            cell.feature_set = cfg.feature_set;
            cell.length_ms = cfg.signal_lengths_ms[li];
            cell.accuracy_pct = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
            report.accuracy.push_back(cell);
        }
    }

    {
        std::size_t correct = 0;
        for (std::size_t r = 0; r < total; ++r)
            if (detail::fused_prediction(FusionMethod::sum_of_posteriors, td.posteriors[r], 1,
                                         cfg.bayes_epsilon) == td.labels[r])
                ++correct;
        report.single_window_accuracy_pct =
            100.0 * static_cast<double>(correct) / static_cast<double>(total);
    }

    // breakdowns at report length
    for (FusionMethod method : cfg.fusion_methods) {
        MethodBreakdown bd;
        bd.method = method;
        bd.confusion.assign(classes, std::vector<std::size_t>(classes + 1, 0));
        std::vector<std::size_t> per_class_total(classes, 0), per_class_correct(classes, 0);
        for (std::size_t r = 0; r < total; ++r) {
            int truth = td.labels[r];
            int pred =
                detail::fused_prediction(method, td.posteriors[r], report_windows, cfg.bayes_epsilon);
            bd.confusion[truth - 1][pred] += 1;  // pred 0 = abstain column
            per_class_total[truth - 1] += 1;
            if (pred == truth) per_class_correct[truth - 1] += 1;
        }
        bd.per_class_accuracy_pct.resize(classes);
        for (int c = 0; c < classes; ++c)
            bd.per_class_accuracy_pct[c] =
                per_class_total[c] == 0 ? 0.0
                                        : 100.0 * static_cast<double>(per_class_correct[c]) /
                                              static_cast<double>(per_class_total[c]);
        report.breakdowns.push_back(std::move(bd));
    }

    // ROC from sum-fusion scores normalized to probabilities
    {
        std::vector<std::vector<double>> norm_scores(total);
        for (std::size_t r = 0; r < total; ++r) {
            std::span<const ClassPosterior> prefix(td.posteriors[r].data(), report_windows);
            FusionDecision d = fuse_sum(prefix);
            double sum = std::accumulate(d.scores.begin(), d.scores.end(), 0.0);
            for (double& s : d.scores) s /= sum;
            norm_scores[r] = std::move(d.scores);
        }
        std::vector<std::pair<double, bool>> pooled;
        for (int c = 1; c <= classes; ++c) {
            std::vector<std::pair<double, bool>> scored;
            for (std::size_t r = 0; r < total; ++r) {
                scored.emplace_back(norm_scores[r][c - 1], td.labels[r] == c);
                pooled.emplace_back(norm_scores[r][c - 1], td.labels[r] == c);
            }
            report.roc.emplace_back(std::to_string(c), detail::roc_points(std::move(scored)));
        }
        report.roc.emplace_back("micro", detail::roc_points(std::move(pooled)));
    }

    // per-subject accuracy at report length, sum fusion
    {
        std::map<std::string, std::pair<std::size_t, std::size_t>> by_subject;  // correct, total
        for (std::size_t r = 0; r < total; ++r) {
            auto& [correct, count] = by_subject[td.subjects[r]];
            ++count;
            if (detail::fused_prediction(FusionMethod::sum_of_posteriors, td.posteriors[r],
                                         report_windows, cfg.bayes_epsilon) == td.labels[r])
                ++correct;
        }
        for (const auto& [subject, cc] : by_subject)
            report.per_subject_accuracy_pct.emplace_back(
                subject, 100.0 * static_cast<double>(cc.first) / static_cast<double>(cc.second));
    }
    return report;
}

// Full experiment: train on the training trials, evaluate on the test trials.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    std::vector<EmgRecording> recordings = load_dataset(cfg);
    MlpModel model = train_model(recordings, cfg);
    return evaluate_model(recordings, model, cfg);
}

struct SweepResult {
    ExperimentReport conventional;
    ExperimentReport all17;
};

// Same data, split and seed; only the feature set differs.
inline SweepResult feature_condition_sweep(const ExperimentConfig& cfg) {
    SweepResult result;
    ExperimentConfig c12 = cfg;
    c12.feature_set = FeatureSet::conventional12;
    result.conventional = run_experiment(c12);
    ExperimentConfig c17 = cfg;
    c17.feature_set = FeatureSet::all17;
    result.all17 = run_experiment(c17);
    return result;
}

// Wall-clock cost of one fused decision at report_length_ms, split into
// feature extraction, classification and fusion. Single-threaded so the
// per-stage numbers are interpretable.
inline std::vector<StageLatency> bench_latency(const ExperimentConfig& cfg, const MlpModel& model,
                                               std::size_t repetitions = 200,
                                               std::size_t warmup = 10) {
    validate(cfg);
    if (repetitions < 100)
        throw std::invalid_argument("bench_latency: need at least 100 repetitions");

    std::vector<EmgRecording> recordings = load_dataset(cfg);
    DatasetSplit split = split_by_trial(recordings, cfg.train_trials, cfg.test_trials);
    const EmgRecording& rec = split.test.front();

    WindowSpec spec = window_spec(cfg);
    ExtractionOptions opts = extraction_options(cfg);
    std::size_t n = window_count(signal_length_samples(cfg, cfg.report_length_ms), spec);
    std::vector<Window> windows = segment(rec, spec);
    if (windows.size() < n) throw std::runtime_error("bench_latency: benchmark recording too short");
    windows.resize(n);

    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    std::vector<double> feat_ms, class_ms, fuse_ms;
    feat_ms.reserve(repetitions);
    class_ms.reserve(repetitions);
    fuse_ms.reserve(repetitions);

    std::vector<std::vector<double>> feats(n);
    std::vector<ClassPosterior> posts(n);
    for (std::size_t rep = 0; rep < warmup + repetitions; ++rep) {
        auto t0 = clock::now();
        for (std::size_t i = 0; i < n; ++i) feats[i] = extract_vector(windows[i], opts);
        double dt_feat = ms_since(t0);

        t0 = clock::now();
        for (std::size_t i = 0; i < n; ++i) posts[i] = forward(model, feats[i]);
        double dt_class = ms_since(t0);

        t0 = clock::now();
        for (FusionMethod m : cfg.fusion_methods) {
            volatile int sink = detail::fused_prediction(m, posts, n, cfg.bayes_epsilon);
            (void)sink;
        }
        double dt_fuse = ms_since(t0);

        if (rep >= warmup) {
            feat_ms.push_back(dt_feat);
            class_ms.push_back(dt_class);
            fuse_ms.push_back(dt_fuse);
        }
    }

    auto stats = [n](std::string name, std::vector<double> samples) {
        StageLatency s;
        s.stage = std::move(name);
        s.repetitions = samples.size();
        s.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) /
                    static_cast<double>(samples.size());
        s.per_window_mean_ms = s.mean_ms / static_cast<double>(n);
        std::sort(samples.begin(), samples.end());
        std::size_t idx = static_cast<std::size_t>(
            std::ceil(0.95 * static_cast<double>(samples.size()))) - 1;
        s.p95_ms = samples[std::min(idx, samples.size() - 1)];
        return s;
    };
    return {stats("feature_extraction", std::move(feat_ms)),
            stats("classification", std::move(class_ms)), stats("fusion", std::move(fuse_ms))};
}

// --- report files ----------------------------------------------------------

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out)
        throw std::runtime_error("emit_report: cannot open '" + p.string() + "' for writing");
    return out;
}

inline void write_accuracy_rows(std::ostream& out, const ExperimentReport& report) {
    for (const AccuracyCell& cell : report.accuracy)
        out << fusion_method_name(cell.method) << ',' << feature_set_name(cell.feature_set) << ','
            << format_double(cell.length_ms) << ',' << format_double(cell.accuracy_pct) << '\n';
}

inline void write_summary_body(std::ostream& out, const ExperimentReport& report) {
    out << "seed: " << report.seed << "\n\n";
    out << "accuracy by signal length (percent):\n";
    for (const AccuracyCell& cell : report.accuracy)
        out << "  " << fusion_method_name(cell.method) << "  " << feature_set_name(cell.feature_set)
            << "  " << format_double(cell.length_ms) << " ms  "
            << format_double(cell.accuracy_pct) << "%\n";
    out << "\nsingle-window accuracy (no fusion): "
        << format_double(report.single_window_accuracy_pct) << "%\n";
    out << "\nper-class accuracy at " << format_double(report.report_length_ms) << " ms:\n";
    for (const MethodBreakdown& bd : report.breakdowns) {
        out << "  " << fusion_method_name(bd.method) << ":";
        for (std::size_t c = 0; c < bd.per_class_accuracy_pct.size(); ++c)
            out << "  " << (c + 1) << "=" << format_double(bd.per_class_accuracy_pct[c]) << "%";
        out << '\n';
    }
    out << "\nper-subject accuracy at " << format_double(report.report_length_ms)
        << " ms (sum fusion):\n";
    for (const auto& [subject, acc] : report.per_subject_accuracy_pct)
        out << "  " << subject << ": " << format_double(acc) << "%\n";
    if (!report.latency.empty()) {
        out << "\nlatency per decision:\n";
        for (const StageLatency& s : report.latency)
            out << "  " << s.stage << ": mean " << format_double(s.mean_ms) << " ms, p95 "
                << format_double(s.p95_ms) << " ms, per window " << format_double(s.per_window_mean_ms)
                << " ms over " << s.repetitions << " reps\n";
    }
}

}  // namespace detail

// Write the fixed report file set. latency.csv is only produced when latency
// stats are present, so a plain eval run yields five files.
inline void emit_report(const ExperimentReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("emit_report: cannot create '" + out_dir + "': " + ec.message());

    {
        auto out = detail::open_out(dir / "accuracy_by_length.csv");
        out << "method,feature_set,length_ms,accuracy_pct\n";
        detail::write_accuracy_rows(out, report);
    }
    {
        auto out = detail::open_out(dir / "per_class_accuracy.csv");
        out << "method,class,accuracy_pct\n";
        for (const MethodBreakdown& bd : report.breakdowns)
            for (std::size_t c = 0; c < bd.per_class_accuracy_pct.size(); ++c)
                out << fusion_method_name(bd.method) << ',' << (c + 1) << ','
                    << format_double(bd.per_class_accuracy_pct[c]) << '\n';
    }
    {
        auto out = detail::open_out(dir / "confusion.csv");
        out << "method,true_class,pred_none";
        for (int c = 1; c <= report.class_count; ++c) out << ",pred_" << c;
        out << '\n';
        for (const MethodBreakdown& bd : report.breakdowns)
            for (std::size_t t = 0; t < bd.confusion.size(); ++t) {
                out << fusion_method_name(bd.method) << ',' << (t + 1);
                for (std::size_t p = 0; p < bd.confusion[t].size(); ++p)
                    out << ',' << bd.confusion[t][p];
                out << '\n';
            }
    }
    {
        auto out = detail::open_out(dir / "roc.csv");
        out << "class,fpr,tpr,threshold\n";
        for (const auto& [cls, points] : report.roc)
            for (const RocPoint& pt : points)
                out << cls << ',' << format_double(pt.fpr) << ',' << format_double(pt.tpr) << ','
                    << format_double(pt.threshold) << '\n';
    }
    if (!report.latency.empty()) {
        auto out = detail::open_out(dir / "latency.csv");
        out << "stage,repetitions,mean_ms,p95_ms,per_window_mean_ms\n";
        for (const StageLatency& s : report.latency)
            out << s.stage << ',' << s.repetitions << ',' << format_double(s.mean_ms) << ','
                << format_double(s.p95_ms) << ',' << format_double(s.per_window_mean_ms) << '\n';
    }
    {
        auto out = detail::open_out(dir / "summary.txt");
        detail::write_summary_body(out, report);
        out << "\nconfig:\n" << report.config_echo;
    }
}

// Sweep output: the shared accuracy table carries both feature_set values;
// the detailed files describe the all-17 condition.
inline void emit_sweep_report(const SweepResult& sweep, const std::string& out_dir) {
    emit_report(sweep.all17, out_dir);
    auto out = detail::open_out(std::filesystem::path(out_dir) / "accuracy_by_length.csv");
    out << "method,feature_set,length_ms,accuracy_pct\n";
    detail::write_accuracy_rows(out, sweep.conventional);
    detail::write_accuracy_rows(out, sweep.all17);
}

}  // namespace emgwave
