#pragma once

#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace emgwave {

// One multi-channel EMG recording of a single gesture trial.
struct EmgRecording {
    std::vector<std::vector<double>> channels;  // equal-length sample arrays
    double sample_rate_hz = 4000.0;
    int label = 0;       // gesture class, 1..C
    std::string subject_id;
    int trial_index = 0;  // 1-based

    std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
    std::size_t channel_count() const { return channels.size(); }
};

inline void validate_recording(const EmgRecording& rec) {
    if (rec.channels.empty()) throw std::invalid_argument("recording: no channels");
    std::size_t len = rec.channels.front().size();
    if (len == 0) throw std::invalid_argument("recording: empty channel");
    for (const auto& ch : rec.channels) {
        if (ch.size() != len)
            throw std::invalid_argument("recording: channels have unequal lengths");
        for (double v : ch)
            if (!std::isfinite(v)) throw std::invalid_argument("recording: non-finite sample");
    }
    if (!(rec.sample_rate_hz > 0.0))
        throw std::invalid_argument("recording: sample_rate_hz must be > 0");
    if (rec.label < 1) throw std::invalid_argument("recording: label must be >= 1");
    if (rec.trial_index < 1) throw std::invalid_argument("recording: trial_index must be >= 1");
    if (rec.subject_id.empty()) throw std::invalid_argument("recording: empty subject_id");
}

struct WindowSpec {
    std::size_t window_len_samples = 400;
    std::size_t stride_samples = 200;
};

inline void validate_spec(const WindowSpec& spec) {
    if (spec.window_len_samples == 0)
        throw std::invalid_argument("window spec: window length must be > 0");
    if (spec.stride_samples == 0 || spec.stride_samples > spec.window_len_samples)
        throw std::invalid_argument("window spec: stride must satisfy 0 < stride <= window length");
}

// A fixed-length view into a recording; the recording must outlive it.
struct Window {
    const EmgRecording* source = nullptr;
    std::size_t start_sample = 0;
    std::size_t length = 0;

    std::span<const double> channel(std::size_t c) const {
        return std::span<const double>(source->channels[c]).subspan(start_sample, length);
    }
    std::size_t channel_count() const { return source->channel_count(); }
    int label() const { return source->label; }
    const std::string& subject() const { return source->subject_id; }
    int trial() const { return source->trial_index; }
};

// Number of full windows in a recording of `len` samples: trailing samples
// that cannot fill a window are dropped.
inline std::size_t window_count(std::size_t len, const WindowSpec& spec) {
    validate_spec(spec);
    if (len < spec.window_len_samples) return 0;
    return (len - spec.window_len_samples) / spec.stride_samples + 1;
}

inline std::vector<Window> segment(const EmgRecording& rec, const WindowSpec& spec) {
    validate_spec(spec);
    std::size_t len = rec.length();
    if (len < spec.window_len_samples)
        throw std::invalid_argument("segment: recording length " + std::to_string(len) +
                                    " is shorter than one window (" +
                                    std::to_string(spec.window_len_samples) + " samples)");
    std::size_t count = window_count(len, spec);
    std::vector<Window> windows;
    windows.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        windows.push_back(Window{&rec, i * spec.stride_samples, spec.window_len_samples});
    return windows;
}

struct DatasetSplit {
    std::vector<EmgRecording> train;
    std::vector<EmgRecording> test;
    std::size_t dropped_count = 0;  // recordings whose trial was in neither set
};

inline DatasetSplit split_by_trial(std::vector<EmgRecording> recordings,
                                   const std::set<int>& train_trials,
                                   const std::set<int>& test_trials) {
    for (int t : train_trials)
        if (test_trials.count(t))
            throw std::invalid_argument("split_by_trial: trial " + std::to_string(t) +
                                        " appears in both train and test sets");
    DatasetSplit split;
    for (auto& rec : recordings) {
        if (train_trials.count(rec.trial_index))
            split.train.push_back(std::move(rec));
        else if (test_trials.count(rec.trial_index))
            split.test.push_back(std::move(rec));
        else
            ++split.dropped_count;
    }
    if (split.train.empty()) throw std::invalid_argument("split_by_trial: empty train partition");
    if (split.test.empty()) throw std::invalid_argument("split_by_trial: empty test partition");
    return split;
}

}  // namespace emgwave
