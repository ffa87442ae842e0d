#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <emgwave/config.hpp>
#include <emgwave/csv_io.hpp>
#include <emgwave/pipeline.hpp>

#include "oracles.hpp"

using namespace emgwave;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.synth.class_count = 3;
    cfg.synth.subject_count = 1;
    cfg.synth.trials_per_class = 4;
    cfg.synth.duration_samples = 4000;
    cfg.synth.noise_std = 0.3;
    cfg.train_trials = {1, 2, 3};
    cfg.test_trials = {4};
    cfg.epochs = 40;
    cfg.patience = 10;
    cfg.signal_lengths_ms = {300, 550, 800};
    cfg.report_length_ms = 800.0;
    cfg.seed = 5;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string model_bytes(const MlpModel& m) {
    std::ostringstream out;
    save_model(out, m);
    return out.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("emgwave_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("prefix window counts per signal length") {
    ExperimentConfig cfg;  // 4 kHz, 400-sample window, 200 stride
    WindowSpec spec = window_spec(cfg);
    CHECK(spec.window_len_samples == 400);
    CHECK(spec.stride_samples == 200);
    CHECK(window_count(signal_length_samples(cfg, 800), spec) == 15);
    CHECK(window_count(signal_length_samples(cfg, 300), spec) == 5);
    CHECK(window_count(signal_length_samples(cfg, 100), spec) == 1);
    for (double L : cfg.signal_lengths_ms) {
        std::size_t samples = signal_length_samples(cfg, L);
        CHECK(window_count(samples, spec) ==
              oracle::naive_window_count(samples, spec.window_len_samples, spec.stride_samples));
    }
}

TEST_CASE("config defaults validate and echo round-trips") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(validate(cfg));
    CHECK(cfg.signal_lengths_ms == std::vector<double>{300, 550, 800, 1050, 1300, 1550, 1800, 2050});

    std::string echo = config_echo(cfg);
    std::istringstream in(echo);
    ExperimentConfig back = parse_config(in);
    CHECK(config_echo(back) == echo);
}

TEST_CASE("config file parsing, overrides and errors") {
    std::istringstream file(
        "# comment\n"
        "window_ms = 100\n"
        "overlap_ms = 75\n"
        "feature_set = conventional12\n"
        "fusion_methods = sum,majority\n"
        "signal_lengths_ms = 300, 800\n"
        "synth.classes = 4\n"
        "seed = 9\n");
    ExperimentConfig cfg = parse_config(file, "exp.cfg");
    CHECK(cfg.overlap_ms == 75.0);
    CHECK(cfg.feature_set == FeatureSet::conventional12);
    REQUIRE(cfg.fusion_methods.size() == 2);
    CHECK(cfg.fusion_methods[0] == FusionMethod::sum_of_posteriors);
    CHECK(cfg.synth.class_count == 4);
    CHECK(cfg.seed == 9);
    CHECK(cfg.synth.seed == 9);  // master seed drives the generator

    apply_setting(cfg, "overlap_ms", "50");
    CHECK(cfg.overlap_ms == 50.0);

    CHECK_THROWS_WITH_AS(apply_setting(cfg, "no_such_key", "1"), doctest::Contains("unknown key"),
                         std::invalid_argument);
    CHECK_THROWS_AS(apply_setting(cfg, "epochs", "ten"), std::invalid_argument);
    {
        std::istringstream bad("window_ms : 100\n");
        CHECK_THROWS_WITH_AS(parse_config(bad, "exp.cfg"), doctest::Contains("exp.cfg:1"),
                             std::invalid_argument);
    }

    ExperimentConfig inv;
    inv.overlap_ms = 100.0;  // overlap must stay below the window
    CHECK_THROWS_AS(validate(inv), std::invalid_argument);
    inv = ExperimentConfig{};
    inv.signal_lengths_ms = {50};  // shorter than the window
    CHECK_THROWS_WITH_AS(validate(inv), doctest::Contains("shorter than the window"),
                         std::invalid_argument);
    inv = ExperimentConfig{};
    inv.signal_lengths_ms = {300.1};  // not a whole sample count at 4 kHz
    CHECK_THROWS_AS(validate(inv), std::invalid_argument);
    inv = ExperimentConfig{};
    inv.window_ms = 100.5;  // 402 samples: even, but not divisible by 2^2
    CHECK_THROWS_WITH_AS(validate(inv), doctest::Contains("2^levels"), std::invalid_argument);
    inv = ExperimentConfig{};
    inv.train_trials = {1, 5};
    CHECK_THROWS_AS(validate(inv), std::invalid_argument);
}

TEST_CASE("run_experiment produces the configured accuracy matrix") {
    ExperimentConfig cfg = small_config();
    ExperimentReport r = run_experiment(cfg);
    CHECK(r.accuracy.size() == 3 * 3);  // 3 methods x 3 lengths
    for (const auto& cell : r.accuracy) {
        CHECK(cell.accuracy_pct >= 0.0);
        CHECK(cell.accuracy_pct <= 100.0);
        CHECK(cell.feature_set == FeatureSet::all17);
    }
    CHECK(r.class_count == 3);
    CHECK(r.breakdowns.size() == 3);
    for (const auto& bd : r.breakdowns) {
        REQUIRE(bd.confusion.size() == 3);
        for (std::size_t t = 0; t < 3; ++t) {
            std::size_t row_sum = 0;
            for (std::size_t p = 0; p < bd.confusion[t].size(); ++p) row_sum += bd.confusion[t][p];
            CHECK(row_sum == 1);  // one test recording per class in the small config
        }
    }
    REQUIRE(r.roc.size() == 4);  // per class + micro
    CHECK(r.roc.back().first == "micro");
    for (const auto& [cls, points] : r.roc) {
        REQUIRE(!points.empty());
        CHECK(points.back().tpr == 1.0);
        CHECK(points.back().fpr == 1.0);
        for (std::size_t i = 1; i < points.size(); ++i) {
            CHECK(points[i].fpr >= points[i - 1].fpr);
            CHECK(points[i].tpr >= points[i - 1].tpr);
        }
    }
    CHECK(r.per_subject_accuracy_pct.size() == 1);
    CHECK(!r.config_echo.empty());
    CHECK(r.seed == 5);
}

TEST_CASE("report files are written with the documented names") {
    ExperimentConfig cfg = small_config();
    ExperimentReport r = run_experiment(cfg);
    TempDir dir("report");
    emit_report(r, dir.path.string());
    for (const char* name : {"accuracy_by_length.csv", "per_class_accuracy.csv", "confusion.csv",
                             "roc.csv", "summary.txt"})
        CHECK_MESSAGE(fs::exists(dir.path / name), name);
    CHECK(!fs::exists(dir.path / "latency.csv"));  // no benchmark in this run

    std::string acc = slurp(dir.path / "accuracy_by_length.csv");
    CHECK(acc.rfind("method,feature_set,length_ms,accuracy_pct\n", 0) == 0);
    CHECK(acc.find("sum,all17,800,") != std::string::npos);

    // a second identical run emits byte-identical accuracy tables
    ExperimentReport r2 = run_experiment(cfg);
    TempDir dir2("report2");
    emit_report(r2, dir2.path.string());
    CHECK(slurp(dir2.path / "accuracy_by_length.csv") == acc);
    CHECK(slurp(dir2.path / "roc.csv") == slurp(dir.path / "roc.csv"));
}

TEST_CASE("sweep emits both feature conditions into one accuracy table") {
    ExperimentConfig cfg = small_config();
    cfg.epochs = 15;
    SweepResult sweep = feature_condition_sweep(cfg);
    CHECK(sweep.conventional.accuracy.front().feature_set == FeatureSet::conventional12);
    CHECK(sweep.all17.accuracy.front().feature_set == FeatureSet::all17);
    TempDir dir("sweep");
    emit_sweep_report(sweep, dir.path.string());
    std::string acc = slurp(dir.path / "accuracy_by_length.csv");
    CHECK(acc.find(",conventional12,") != std::string::npos);
    CHECK(acc.find(",all17,") != std::string::npos);
    // two rows per (method, length): one per condition
    std::size_t rows = std::count(acc.begin(), acc.end(), '\n') - 1;
    CHECK(rows == 2 * 3 * 3);
}

TEST_CASE("a saved model reproduces the experiment and checks its layout") {
    ExperimentConfig cfg = small_config();
    std::vector<EmgRecording> recordings = load_dataset(cfg);
    MlpModel model = train_model(recordings, cfg);
    CHECK(model.input_dim() == 102);
    CHECK(model.feature_layout == feature_layout_string(2, extraction_options(cfg)));

    std::string bytes = model_bytes(model);
    std::istringstream in(bytes);
    MlpModel loaded = load_model(in);
    ExperimentReport via_model = evaluate_model(recordings, loaded, cfg);
    ExperimentReport direct = run_experiment(cfg);
    REQUIRE(via_model.accuracy.size() == direct.accuracy.size());
    for (std::size_t i = 0; i < direct.accuracy.size(); ++i)
        CHECK(via_model.accuracy[i].accuracy_pct == direct.accuracy[i].accuracy_pct);

    ExperimentConfig conv = cfg;
    conv.feature_set = FeatureSet::conventional12;
    CHECK_THROWS_WITH_AS(evaluate_model(recordings, loaded, conv), doctest::Contains("layout"),
                         std::runtime_error);
}

TEST_CASE("leakage canary: perturbing test trials leaves the model bit-identical") {
    ExperimentConfig cfg = small_config();
    std::vector<EmgRecording> base = load_dataset(cfg);

    std::vector<EmgRecording> perturbed = base;
    for (auto& rec : perturbed)
        if (cfg.test_trials.count(rec.trial_index))
            for (auto& ch : rec.channels)
                for (double& v : ch) v = -v + 0.25;

    CHECK(model_bytes(train_model(base, cfg)) == model_bytes(train_model(perturbed, cfg)));

    // the same perturbation applied to a training trial must change the fit
    std::vector<EmgRecording> train_perturbed = base;
    for (auto& rec : train_perturbed)
        if (rec.trial_index == 1)
            for (auto& ch : rec.channels)
                for (double& v : ch) v = -v + 0.25;
    CHECK(model_bytes(train_model(base, cfg)) != model_bytes(train_model(train_perturbed, cfg)));
}

TEST_CASE("latency benchmark reports three stages with enough repetitions") {
    ExperimentConfig cfg = small_config();
    std::vector<EmgRecording> recordings = load_dataset(cfg);
    MlpModel model = train_model(recordings, cfg);
    std::vector<StageLatency> stats = bench_latency(cfg, model, 120, 5);
    REQUIRE(stats.size() == 3);
    CHECK(stats[0].stage == "feature_extraction");
    CHECK(stats[1].stage == "classification");
    CHECK(stats[2].stage == "fusion");
    for (const auto& s : stats) {
        CHECK(s.repetitions == 120);
        CHECK(s.mean_ms > 0.0);
        CHECK(s.p95_ms >= s.mean_ms * 0.5);
        CHECK(s.per_window_mean_ms == s.mean_ms / 15.0);  // 800 ms = 15 windows
    }
    // fusing a handful of posteriors is much cheaper than running the net
    CHECK(stats[2].mean_ms < stats[1].mean_ms);
    CHECK_THROWS_AS(bench_latency(cfg, model, 50), std::invalid_argument);

    ExperimentReport r = evaluate_model(recordings, model, cfg);
    r.latency = stats;
    TempDir dir("latency");
    emit_report(r, dir.path.string());
    CHECK(fs::exists(dir.path / "latency.csv"));
    std::string lat = slurp(dir.path / "latency.csv");
    CHECK(lat.rfind("stage,repetitions,mean_ms,p95_ms,per_window_mean_ms\n", 0) == 0);
}

TEST_CASE("feature CSV dump writes the layout header") {
    ExtractionOptions opts;
    auto names = feature_layout_names(2, opts);
    std::ostringstream out;
    write_feature_csv(out, names, {std::vector<double>(names.size(), 1.5)}, {3});
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "label," + feature_layout_string(2, opts));
    std::string row;
    std::getline(in, row);
    CHECK(row.rfind("3,1.5,", 0) == 0);
}

TEST_CASE("evaluation refuses test recordings shorter than a signal length") {
    ExperimentConfig cfg = small_config();
    cfg.synth.duration_samples = 2000;  // 500 ms: too short for the 800 ms length
    CHECK_THROWS_WITH_AS(run_experiment(cfg), doctest::Contains("windows"), std::runtime_error);
}

TEST_CASE("emit_report rejects an unwritable destination") {
    ExperimentConfig cfg = small_config();
    ExperimentReport r = run_experiment(cfg);
    TempDir dir("unwritable");
    fs::create_directories(dir.path);
    std::ofstream(dir.path / "occupied").put('x');
    // a path under a regular file cannot be created
    CHECK_THROWS_AS(emit_report(r, (dir.path / "occupied" / "sub").string()), std::runtime_error);
}

// Full default-scale experiment: fusing windows must not substantially hurt
// relative to single-window decisions, and the default report has the full
// 8-length x 3-method matrix.
TEST_CASE("default experiment: fusion never trails single-window by more than 2 points") {
    ExperimentConfig cfg;
    ExperimentReport r = run_experiment(cfg);
    CHECK(r.accuracy.size() == 24);
    for (const auto& cell : r.accuracy)
        CHECK_MESSAGE(cell.accuracy_pct >= r.single_window_accuracy_pct - 2.0,
                      std::string(fusion_method_name(cell.method))
                          << " at " << cell.length_ms << " ms: " << cell.accuracy_pct
                          << "% vs single-window " << r.single_window_accuracy_pct << "%");
}

}  // TEST_SUITE
