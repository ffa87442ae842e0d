// emgwave command line: synthesize data, train, evaluate, sweep feature
// conditions and benchmark latency. Config file keys and CLI --set overrides
// share one namespace; explicit flags win over the file.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <emgwave/config.hpp>
#include <emgwave/csv_io.hpp>
#include <emgwave/pipeline.hpp>

using namespace emgwave;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;  // key=value overrides
    std::optional<long long> seed;
    std::string csv;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "config file (key = value lines)");
    cmd->add_option("-s,--set", args.sets, "override a config key, e.g. --set epochs=100")
        ->type_name("KEY=VALUE");
    cmd->add_option("--seed", args.seed, "master seed (same as --set seed=N)");
    cmd->add_option("--csv", args.csv, "recordings CSV (same as --set data.csv=PATH)");
}

ExperimentConfig build_config(const CommonArgs& args) {
    ExperimentConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    for (const std::string& kv : args.sets) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        apply_setting(cfg, std::string(trim(kv.substr(0, eq))), kv.substr(eq + 1));
    }
    if (args.seed) apply_setting(cfg, "seed", std::to_string(*args.seed));
    if (!args.csv.empty()) apply_setting(cfg, "data.csv", args.csv);
    validate(cfg);
    return cfg;
}

void print_accuracy(const ExperimentReport& report) {
    std::printf("%-10s %-15s %9s %9s\n", "method", "feature_set", "length_ms", "accuracy");
    for (const auto& cell : report.accuracy)
        std::printf("%-10s %-15s %9s %8s%%\n",
                    std::string(fusion_method_name(cell.method)).c_str(),
                    std::string(feature_set_name(cell.feature_set)).c_str(),
                    format_double(cell.length_ms).c_str(), format_double(cell.accuracy_pct).c_str());
    std::printf("single-window accuracy: %s%%\n",
                format_double(report.single_window_accuracy_pct).c_str());
}

void print_latency(const std::vector<StageLatency>& stats) {
    for (const auto& s : stats)
        std::printf("%-20s mean %8.4f ms   p95 %8.4f ms   per-window %8.4f ms   (%zu reps)\n",
                    s.stage.c_str(), s.mean_ms, s.p95_ms, s.per_window_mean_ms, s.repetitions);
}

MlpModel obtain_model(const std::string& model_path, const std::vector<EmgRecording>& recordings,
                      const ExperimentConfig& cfg) {
    if (!model_path.empty()) {
        std::size_t channels = recordings.front().channel_count();
        return load_model(model_path, feature_layout_string(channels, extraction_options(cfg)));
    }
    std::printf("no --model given; training from the configured data\n");
    return train_model(recordings, cfg);
}

void dump_features(const std::string& path, const std::vector<EmgRecording>& recordings,
                   const ExperimentConfig& cfg) {
    DatasetSplit split = split_by_trial(recordings, cfg.train_trials, cfg.test_trials);
    WindowSpec spec = window_spec(cfg);
    ExtractionOptions opts = extraction_options(cfg);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (const auto& rec : split.train)
        for (const Window& w : segment(rec, spec)) {
            rows.push_back(extract_vector(w, opts));
            labels.push_back(w.label());
        }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_feature_csv(out, feature_layout_names(split.train.front().channel_count(), opts), rows,
                      labels);
    std::printf("wrote %zu training feature rows to %s\n", rows.size(), path.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EMG gesture classification: wavelet features, MLP, posterior fusion"};
    app.require_subcommand(1);

    CommonArgs args;

    auto* synth = app.add_subcommand("synth", "generate a synthetic recordings CSV");
    std::string synth_out;
    synth->add_option("-o,--out", synth_out, "output CSV path")->required();
    add_common(synth, args);

    auto* train_cmd = app.add_subcommand("train", "fit a model and save it");
    std::string model_out, features_out;
    train_cmd->add_option("-m,--model-out", model_out, "model file to write")->required();
    train_cmd->add_option("--dump-features", features_out, "also write training features CSV");
    add_common(train_cmd, args);

    auto* eval_cmd = app.add_subcommand("eval", "run the experiment and write report files");
    std::string model_in, out_dir, save_model_path;
    eval_cmd->add_option("--model", model_in, "trained model file (trains if omitted)");
    eval_cmd->add_option("-o,--out-dir", out_dir, "report output directory")->required();
    eval_cmd->add_option("--save-model", save_model_path, "save the (re)trained model here");
    add_common(eval_cmd, args);

    auto* sweep_cmd = app.add_subcommand("sweep", "conventional-12 vs all-17 feature conditions");
    std::string sweep_dir;
    sweep_cmd->add_option("-o,--out-dir", sweep_dir, "report output directory")->required();
    add_common(sweep_cmd, args);

    auto* bench_cmd = app.add_subcommand("bench", "per-decision latency benchmark");
    std::string bench_model, bench_dir;
    std::size_t reps = 200;
    bench_cmd->add_option("--model", bench_model, "trained model file (trains if omitted)");
    bench_cmd->add_option("-o,--out-dir", bench_dir, "also write report files with latency.csv");
    bench_cmd->add_option("--reps", reps, "measured repetitions (>= 100)");
    add_common(bench_cmd, args);

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = build_config(args);

        if (synth->parsed()) {
            SyntheticSpec spec = cfg.synth;
            spec.sample_rate_hz = cfg.sample_rate_hz;
            spec.seed = cfg.seed;
            std::vector<EmgRecording> recordings = generate_synthetic(spec);
            save_recordings(synth_out, recordings);
            std::printf("wrote %zu recordings (%d classes, %d trials, %d subjects) to %s\n",
                        recordings.size(), spec.class_count, spec.trials_per_class,
                        spec.subject_count, synth_out.c_str());
        } else if (train_cmd->parsed()) {
            std::vector<EmgRecording> recordings = load_dataset(cfg);
            MlpModel model = train_model(recordings, cfg);
            save_model(model_out, model);
            std::printf("trained %zu-dim model on %zu recordings; saved to %s\n",
                        model.input_dim(), recordings.size(), model_out.c_str());
            if (!features_out.empty()) dump_features(features_out, recordings, cfg);
        } else if (eval_cmd->parsed()) {
            std::vector<EmgRecording> recordings = load_dataset(cfg);
            MlpModel model = obtain_model(model_in, recordings, cfg);
            if (!save_model_path.empty()) save_model(save_model_path, model);
            ExperimentReport report = evaluate_model(recordings, model, cfg);
            emit_report(report, out_dir);
            print_accuracy(report);
            std::printf("report files written to %s\n", out_dir.c_str());
        } else if (sweep_cmd->parsed()) {
            SweepResult sweep = feature_condition_sweep(cfg);
            emit_sweep_report(sweep, sweep_dir);
            print_accuracy(sweep.conventional);
            print_accuracy(sweep.all17);
            std::printf("sweep report written to %s\n", sweep_dir.c_str());
        } else if (bench_cmd->parsed()) {
            std::vector<EmgRecording> recordings = load_dataset(cfg);
            MlpModel model = obtain_model(bench_model, recordings, cfg);
            std::vector<StageLatency> stats = bench_latency(cfg, model, reps);
            print_latency(stats);
            if (!bench_dir.empty()) {
                ExperimentReport report = evaluate_model(recordings, model, cfg);
                report.latency = stats;
                emit_report(report, bench_dir);
                std::printf("report files written to %s\n", bench_dir.c_str());
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
