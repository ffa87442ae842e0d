#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "signal.hpp"
#include "util.hpp"

namespace emgwave {

// Per-class signal signature: one tone per wavelet band (low / mid / high)
// with class-specific energy shares, plus a slow burst envelope. Band tone
// frequencies are kept at multiples of 10 Hz so that, at 4 kHz with 400-sample
// windows, every window integrates whole tone periods and a constant-envelope
// signal has identical RMS in every window.
struct ClassProfile {
    std::array<double, 3> band_weights{0.5, 0.3, 0.2};   // low, mid, high energy share
    std::array<double, 3> tone_freqs_hz{150.0, 590.0, 1280.0};
    double burst_rate_hz = 4.0;
    double gain = 1.0;
};

struct SyntheticSpec {
    int class_count = 10;
    int channels = 2;
    double sample_rate_hz = 4000.0;
    std::size_t duration_samples = 20000;
    int trials_per_class = 6;
    int subject_count = 3;
    double noise_std = 0.6;
    double burst_depth = 0.35;  // 0 = constant envelope
    double amplitude = 1.0;
    std::uint64_t seed = 42;
    std::vector<ClassProfile> profiles;  // empty = default_class_profiles(class_count)
};

// Distinct band-energy + burst-rate signatures per class. The last class is
// deliberately hard: it shares class 1's tones and nearly its weights, so it
// is separable mainly through small amplitude and burst differences.
inline std::vector<ClassProfile> default_class_profiles(int class_count) {
    if (class_count < 2)
        throw std::invalid_argument("default_class_profiles: need at least 2 classes");
    std::vector<ClassProfile> profiles;
    profiles.reserve(class_count);
    for (int c = 1; c <= class_count; ++c) {
        ClassProfile p;
        int g = (c - 1) % 5;
        int h = ((c - 1) / 5) % 2;
        p.tone_freqs_hz = {120.0 + 30.0 * g, 540.0 + 50.0 * g, 1100.0 + 90.0 * g};
        if (h == 0)
            p.band_weights = {0.52, 0.30, 0.18};
        else
            p.band_weights = {0.22, 0.34, 0.44};
        // small per-class tilt so classes sharing h still differ in shares
        p.band_weights[0] += 0.015 * (g - 2);
        p.band_weights[2] -= 0.010 * (g - 2);
        double sum = p.band_weights[0] + p.band_weights[1] + p.band_weights[2];
        for (double& w : p.band_weights) w /= sum;
        p.burst_rate_hz = 2.0 + 0.9 * ((c * 2) % 5);
        p.gain = 1.0 + 0.04 * (g - 2);
        profiles.push_back(p);
    }
    if (class_count >= 3) {
        // hard class: a near-copy of class 1
        ClassProfile hard = profiles.front();
        for (int b = 0; b < 3; ++b)
            hard.band_weights[b] = 0.85 * hard.band_weights[b] + 0.15 * (1.0 / 3.0);
        hard.burst_rate_hz = profiles.front().burst_rate_hz + 1.8;
        hard.gain = profiles.front().gain * 1.07;
        profiles.back() = hard;
    }
    return profiles;
}

// Deterministic labeled recordings: same spec and seed give bit-identical
// samples. Per (subject, class, trial) the tone and envelope phases are
// randomized, and white noise of noise_std is added.
inline std::vector<EmgRecording> generate_synthetic(const SyntheticSpec& spec) {
    if (spec.class_count < 2)
        throw std::invalid_argument("generate_synthetic: class_count must be >= 2");
    if (spec.channels < 1) throw std::invalid_argument("generate_synthetic: channels must be >= 1");
    if (!(spec.sample_rate_hz > 0.0))
        throw std::invalid_argument("generate_synthetic: sample_rate_hz must be > 0");
    if (spec.duration_samples == 0)
        throw std::invalid_argument("generate_synthetic: duration_samples must be > 0");
    if (spec.trials_per_class < 1)
        throw std::invalid_argument("generate_synthetic: trials_per_class must be >= 1");
    if (spec.subject_count < 1)
        throw std::invalid_argument("generate_synthetic: subject_count must be >= 1");
    if (spec.noise_std < 0.0)
        throw std::invalid_argument("generate_synthetic: noise_std must be >= 0");
    if (spec.burst_depth < 0.0 || spec.burst_depth > 1.0)
        throw std::invalid_argument("generate_synthetic: burst_depth must be in [0, 1]");

    std::vector<ClassProfile> profiles =
        spec.profiles.empty() ? default_class_profiles(spec.class_count) : spec.profiles;
    if (profiles.size() != static_cast<std::size_t>(spec.class_count))
        throw std::invalid_argument("generate_synthetic: profile count != class_count");

    const double two_pi = 6.283185307179586476925287;
    const double fs = spec.sample_rate_hz;

    std::vector<EmgRecording> recordings;
    recordings.reserve(static_cast<std::size_t>(spec.subject_count) * spec.class_count *
                       spec.trials_per_class);

    for (int s = 1; s <= spec.subject_count; ++s) {
        for (int c = 1; c <= spec.class_count; ++c) {
            const ClassProfile& p = profiles[c - 1];
            for (int t = 1; t <= spec.trials_per_class; ++t) {
                std::uint64_t stream = mix_seed(spec.seed, (static_cast<std::uint64_t>(s) << 40) ^
                                                               (static_cast<std::uint64_t>(c) << 20) ^
                                                               static_cast<std::uint64_t>(t));
                Rng rng(stream);

                EmgRecording rec;
                rec.sample_rate_hz = fs;
                rec.label = c;
                rec.subject_id = "S" + std::to_string(s);
                rec.trial_index = t;
                rec.channels.resize(spec.channels);

                for (int k = 0; k < spec.channels; ++k) {
                    // rotate band shares per channel so channels carry
                    // complementary information
                    std::array<double, 3> w;
                    for (int b = 0; b < 3; ++b) w[b] = p.band_weights[(b + k) % 3];
                    double chan_gain = 1.0 - 0.15 * k;

                    std::array<double, 3> phase;
                    for (double& ph : phase) ph = two_pi * rng.uniform();
                    double env_phase = two_pi * rng.uniform();

                    std::vector<double>& samples = rec.channels[k];
                    samples.resize(spec.duration_samples);
                    double a = spec.amplitude * p.gain * chan_gain;
                    for (std::size_t n = 0; n < spec.duration_samples; ++n) {
                        double tt = static_cast<double>(n) / fs;
                        double env =
                            1.0 + spec.burst_depth * std::sin(two_pi * p.burst_rate_hz * tt + env_phase);
                        double carrier = 0.0;
                        for (int b = 0; b < 3; ++b)
                            carrier += w[b] * std::sin(two_pi * p.tone_freqs_hz[b] * tt + phase[b]);
                        samples[n] = a * env * carrier + spec.noise_std * rng.normal();
                    }
                }
                recordings.push_back(std::move(rec));
            }
        }
    }
    return recordings;
}

}  // namespace emgwave
