#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "util.hpp"

namespace emgwave {

// Fully-connected feedforward net: rectified-linear hidden layers, softmax
// output. Weights are row-major (out_dim x in_dim). Inputs are standardized
// with the per-dimension mean/std learned by train(); init() leaves the
// standardization at identity.
struct MlpModel {
    std::vector<std::size_t> layer_dims;        // [input, hidden..., classes]
    std::vector<std::vector<double>> weights;   // one matrix per layer
    std::vector<std::vector<double>> biases;
    std::vector<double> feat_mean;
    std::vector<double> feat_std;
    std::string feature_layout;  // dimension names, pinned at save time

    std::size_t input_dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
    std::size_t class_count() const { return layer_dims.empty() ? 0 : layer_dims.back(); }
};

struct TrainConfig {
    int epochs = 300;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    int patience = 30;               // early-stop patience on held-out loss; 0 disables
    double validation_fraction = 0.1;
};

struct TrainExample {
    std::vector<double> features;
    int label = 0;  // 1..C
};

using ClassPosterior = std::vector<double>;

// He-style initialization: zero biases, weights scaled by sqrt(2/fan_in).
inline MlpModel init(std::size_t input_dim, std::size_t class_count, std::uint64_t seed,
                     std::size_t hidden_layers = 6, std::size_t hidden_width = 32) {
    if (input_dim < 1) throw std::invalid_argument("init: input_dim must be >= 1");
    if (class_count < 2) throw std::invalid_argument("init: class_count must be >= 2");
    if (hidden_layers < 1 || hidden_width < 1)
        throw std::invalid_argument("init: hidden layer spec must be positive");

    MlpModel m;
    m.layer_dims.push_back(input_dim);
    for (std::size_t i = 0; i < hidden_layers; ++i) m.layer_dims.push_back(hidden_width);
    m.layer_dims.push_back(class_count);

    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
        std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
        double scale = std::sqrt(2.0 / static_cast<double>(in));
        std::vector<double> w(in * out);
        for (double& v : w) v = scale * rng.normal();
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(out, 0.0);
    }
    m.feat_mean.assign(input_dim, 0.0);
    m.feat_std.assign(input_dim, 1.0);
    return m;
}

namespace detail {

inline void softmax_inplace(std::vector<double>& z) {
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

// Activations per layer; acts[0] is the standardized input, acts.back() the
// output probabilities. pre[l] keeps pre-activation signs for backprop.
struct ForwardCache {
    std::vector<std::vector<double>> acts;
};

inline void forward_cache(const MlpModel& m, std::span<const double> x, ForwardCache& cache) {
    cache.acts.assign(m.layer_dims.size(), {});
    std::vector<double>& a0 = cache.acts[0];
    a0.resize(m.input_dim());
    for (std::size_t i = 0; i < a0.size(); ++i) a0[i] = (x[i] - m.feat_mean[i]) / m.feat_std[i];

    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
        const std::vector<double>& a = cache.acts[l];
        std::vector<double>& next = cache.acts[l + 1];
        std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
        next.resize(out);
        const double* w = m.weights[l].data();
        for (std::size_t r = 0; r < out; ++r) {
            double s = m.biases[l][r];
            const double* row = w + r * in;
            for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
            next[r] = s;
        }
        if (l + 2 < m.layer_dims.size())
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        else
            softmax_inplace(next);
    }
}

inline double cross_entropy(const std::vector<double>& probs, int label) {
    double p = probs[static_cast<std::size_t>(label - 1)];
    return -std::log(std::max(p, 1e-300));
}

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    void match(const MlpModel& m) {
        weights.resize(m.weights.size());
        biases.resize(m.biases.size());
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            weights[l].assign(m.weights[l].size(), 0.0);
            biases[l].assign(m.biases[l].size(), 0.0);
        }
    }
};

// Accumulate the gradient of the cross-entropy loss for one example.
inline void backward_accumulate(const MlpModel& m, const ForwardCache& cache, int label,
                                Gradients& g) {
    std::size_t layers = m.weights.size();
    std::vector<double> delta = cache.acts.back();  // softmax output
    delta[static_cast<std::size_t>(label - 1)] -= 1.0;

    for (std::size_t l = layers; l-- > 0;) {
        const std::vector<double>& a_in = cache.acts[l];
        std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
        double* gw = g.weights[l].data();
        for (std::size_t r = 0; r < out; ++r) {
            double d = delta[r];
            g.biases[l][r] += d;
            double* grow = gw + r * in;
            for (std::size_t i = 0; i < in; ++i) grow[i] += d * a_in[i];
        }
        if (l == 0) break;
        std::vector<double> prev(in, 0.0);
        const double* w = m.weights[l].data();
        for (std::size_t r = 0; r < out; ++r) {
            double d = delta[r];
            const double* row = w + r * in;
            for (std::size_t i = 0; i < in; ++i) prev[i] += d * row[i];
        }
        // relu mask: a_in is the post-activation of layer l, zero where the
        // unit was inactive
        for (std::size_t i = 0; i < in; ++i)
            if (a_in[i] <= 0.0) prev[i] = 0.0;
        delta = std::move(prev);
    }
}

}  // namespace detail

inline ClassPosterior forward(const MlpModel& m, std::span<const double> features) {
    if (m.layer_dims.empty()) throw std::invalid_argument("forward: uninitialized model");
    if (features.size() != m.input_dim())
        throw std::invalid_argument("forward: expected " + std::to_string(m.input_dim()) +
                                    " features, got " + std::to_string(features.size()));
    for (double v : features)
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite feature");
    detail::ForwardCache cache;
    detail::forward_cache(m, features, cache);
    return cache.acts.back();
}

struct TrainResult {
    MlpModel model;
    std::vector<double> loss_history;  // per-epoch mean training loss
};

// Mini-batch gradient descent on cross-entropy. Examples are brought into a
// canonical order (label, then lexicographic features) before the seeded
// shuffle, so the result depends on the training *set*, not its ordering.
inline TrainResult train(MlpModel model, const std::vector<TrainExample>& data,
                         const TrainConfig& cfg) {
    if (model.layer_dims.empty()) throw std::invalid_argument("train: uninitialized model");
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(cfg.learning_rate >= 0.0))
        throw std::invalid_argument("train: learning_rate must be >= 0");
    if (cfg.patience < 0) throw std::invalid_argument("train: patience must be >= 0");
    if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0))
        throw std::invalid_argument("train: validation_fraction must be in [0, 1)");
    if (data.empty()) throw std::invalid_argument("train: no training examples");

    std::size_t dim = model.input_dim();
    std::size_t classes = model.class_count();
    std::vector<bool> seen(classes, false);
    for (const auto& ex : data) {
        if (ex.features.size() != dim)
            throw std::invalid_argument("train: feature vector of length " +
                                        std::to_string(ex.features.size()) + ", expected " +
                                        std::to_string(dim));
        for (double v : ex.features)
            if (!std::isfinite(v)) throw std::invalid_argument("train: non-finite feature");
        if (ex.label < 1 || ex.label > static_cast<int>(classes))
            throw std::invalid_argument("train: label " + std::to_string(ex.label) +
                                        " outside 1.." + std::to_string(classes));
        seen[ex.label - 1] = true;
    }
    for (std::size_t c = 0; c < classes; ++c)
        if (!seen[c])
            throw std::invalid_argument("train: class " + std::to_string(c + 1) +
                                        " absent from training data");

    // canonical order
    std::vector<std::size_t> canon(data.size());
    std::iota(canon.begin(), canon.end(), 0);
    std::stable_sort(canon.begin(), canon.end(), [&](std::size_t a, std::size_t b) {
        if (data[a].label != data[b].label) return data[a].label < data[b].label;
        return std::lexicographical_compare(data[a].features.begin(), data[a].features.end(),
                                            data[b].features.begin(), data[b].features.end());
    });

    // standardization, fitted in canonical order
    model.feat_mean.assign(dim, 0.0);
    model.feat_std.assign(dim, 0.0);
    for (std::size_t i : canon)
        for (std::size_t j = 0; j < dim; ++j) model.feat_mean[j] += data[i].features[j];
    for (double& v : model.feat_mean) v /= static_cast<double>(data.size());
    for (std::size_t i : canon)
        for (std::size_t j = 0; j < dim; ++j) {
            double d = data[i].features[j] - model.feat_mean[j];
            model.feat_std[j] += d * d;
        }
    for (double& v : model.feat_std) {
        v = std::sqrt(v / static_cast<double>(data.size()));
        if (v < 1e-12) v = 1.0;  // constant dimension
    }

    Rng rng(cfg.seed);
    std::vector<std::size_t> order = canon;
    rng.shuffle(order);

    std::size_t val_count = 0;
    if (cfg.patience > 0)
        val_count = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(order.size()));
    if (val_count >= order.size()) val_count = 0;
    std::vector<std::size_t> val_idx(order.end() - val_count, order.end());
    std::vector<std::size_t> train_idx(order.begin(), order.end() - val_count);

    auto mean_loss_over = [&](const std::vector<std::size_t>& idx) {
        detail::ForwardCache cache;
        double sum = 0.0;
        for (std::size_t i : idx) {
            detail::forward_cache(model, data[i].features, cache);
            sum += detail::cross_entropy(cache.acts.back(), data[i].label);
        }
        return sum / static_cast<double>(idx.size());
    };

    TrainResult result;
    detail::Gradients grads;
    detail::ForwardCache cache;

    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;
    std::vector<std::vector<double>> best_weights, best_biases;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(train_idx);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
            grads.match(model);
            for (std::size_t b = start; b < end; ++b) {
                const TrainExample& ex = data[train_idx[b]];
                detail::forward_cache(model, ex.features, cache);
                epoch_loss += detail::cross_entropy(cache.acts.back(), ex.label);
                detail::backward_accumulate(model, cache, ex.label, grads);
            }
            double scale = cfg.learning_rate / static_cast<double>(end - start);
            for (std::size_t l = 0; l < model.weights.size(); ++l) {
                for (std::size_t i = 0; i < model.weights[l].size(); ++i)
                    model.weights[l][i] -= scale * grads.weights[l][i];
                for (std::size_t i = 0; i < model.biases[l].size(); ++i)
                    model.biases[l][i] -= scale * grads.biases[l][i];
            }
        }
        double mean_loss = epoch_loss / static_cast<double>(train_idx.size());
        if (!std::isfinite(mean_loss))
            throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
        result.loss_history.push_back(mean_loss);

        if (!val_idx.empty()) {
            double vloss = mean_loss_over(val_idx);
            if (!std::isfinite(vloss))
                throw std::runtime_error("train: non-finite held-out loss at epoch " +
                                         std::to_string(epoch));
            if (vloss < best_val) {
                best_val = vloss;
                best_weights = model.weights;
                best_biases = model.biases;
                epochs_since_best = 0;
            } else if (++epochs_since_best > cfg.patience) {
                break;
            }
        }
    }
    if (!best_weights.empty()) {
        model.weights = std::move(best_weights);
        model.biases = std::move(best_biases);
    }
    result.model = std::move(model);
    return result;
}

struct GradCheckOptions {
    std::uint64_t seed = 0;
    std::size_t param_count = 200;  // random subsample of parameters
    double step = 1e-5;             // central-difference step
};

// Compare the analytic gradient of the cross-entropy loss against central
// finite differences. Relative error uses a 1e-4 denominator floor so that
// near-zero gradients are compared absolutely (to 1e-8) instead of amplifying
// fp64 noise.
inline double gradient_check(const MlpModel& model, const TrainExample& sample,
                             const GradCheckOptions& opts = {}) {
    if (sample.features.size() != model.input_dim())
        throw std::invalid_argument("gradient_check: feature dimension mismatch");

    detail::ForwardCache cache;
    detail::Gradients grads;
    grads.match(model);
    detail::forward_cache(model, sample.features, cache);
    detail::backward_accumulate(model, cache, sample.label, grads);

    // flat index over weights then biases, layer by layer
    std::size_t total = 0;
    for (const auto& w : model.weights) total += w.size();
    for (const auto& b : model.biases) total += b.size();

    auto analytic_at = [&](std::size_t flat) {
        std::size_t off = flat;
        for (std::size_t l = 0; l < grads.weights.size(); ++l) {
            if (off < grads.weights[l].size()) return grads.weights[l][off];
            off -= grads.weights[l].size();
        }
        for (std::size_t l = 0; l < grads.biases.size(); ++l) {
            if (off < grads.biases[l].size()) return grads.biases[l][off];
            off -= grads.biases[l].size();
        }
        throw std::logic_error("gradient_check: bad flat index");
    };

    std::size_t count = std::min(opts.param_count, total);
    std::vector<std::size_t> indices(total);
    std::iota(indices.begin(), indices.end(), 0);
    Rng rng(opts.seed);
    for (std::size_t j = 0; j < count; ++j)
        std::swap(indices[j], indices[j + rng.uniform_index(total - j)]);

    MlpModel probe = model;
    auto param_at = [&](std::size_t flat) -> double* {
        std::size_t off = flat;
        for (std::size_t l = 0; l < probe.weights.size(); ++l) {
            if (off < probe.weights[l].size()) return &probe.weights[l][off];
            off -= probe.weights[l].size();
        }
        for (std::size_t l = 0; l < probe.biases.size(); ++l) {
            if (off < probe.biases[l].size()) return &probe.biases[l][off];
            off -= probe.biases[l].size();
        }
        throw std::logic_error("gradient_check: bad flat index");
    };
    auto loss_at = [&]() {
        detail::ForwardCache c;
        detail::forward_cache(probe, sample.features, c);
        return detail::cross_entropy(c.acts.back(), sample.label);
    };

    double max_rel = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
        std::size_t flat = indices[j];
        double analytic = analytic_at(flat);
        double* param = param_at(flat);
        double saved = *param;
        *param = saved + opts.step;
        double up = loss_at();
        *param = saved - opts.step;
        double down = loss_at();
        *param = saved;
        double numeric = (up - down) / (2.0 * opts.step);
        double rel = std::fabs(analytic - numeric) /
                     std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

// --- model serialization -------------------------------------------------
// Self-describing text format; values are shortest-round-trip decimals so a
// save/load cycle reproduces the model bit-exactly.

inline void save_model(std::ostream& out, const MlpModel& m) {
    if (m.layer_dims.empty()) throw std::invalid_argument("save_model: uninitialized model");
    out << "emgwave-mlp 1\n";
    out << "layout " << (m.feature_layout.empty() ? "-" : m.feature_layout) << '\n';
    out << "dims " << m.layer_dims.size();
    for (std::size_t d : m.layer_dims) out << ' ' << d;
    out << '\n';
    auto write_vec = [&](const char* tag, const std::vector<double>& v) {
        out << tag << ' ' << v.size();
        for (double x : v) out << ' ' << format_double(x);
        out << '\n';
    };
    write_vec("mean", m.feat_mean);
    write_vec("std", m.feat_std);
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        out << "W" << l << ' ' << m.layer_dims[l + 1] << ' ' << m.layer_dims[l];
        for (double x : m.weights[l]) out << ' ' << format_double(x);
        out << '\n';
        out << "b" << l << ' ' << m.biases[l].size();
        for (double x : m.biases[l]) out << ' ' << format_double(x);
        out << '\n';
    }
    out << "end\n";
}

inline void save_model(const std::string& path, const MlpModel& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open '" + path + "' for writing");
    save_model(out, m);
    out.flush();
    if (!out) throw std::runtime_error("save_model: write to '" + path + "' failed");
}

inline MlpModel load_model(std::istream& in, const std::string& expected_layout = "") {
    auto fail = [](const std::string& msg) -> std::runtime_error {
        return std::runtime_error("load_model: " + msg);
    };
    std::string line;
    if (!std::getline(in, line) || trim(line) != "emgwave-mlp 1")
        throw fail("not an emgwave model file");

    MlpModel m;
    auto next_tokens = [&](const std::string& expect_tag) {
        std::string l;
        if (!std::getline(in, l)) throw fail("truncated file (expected " + expect_tag + ")");
        auto toks = split(trim(l), ' ');
        if (toks.empty() || std::string(toks[0]) != expect_tag)
            throw fail("expected '" + expect_tag + "' record");
        return std::vector<std::string>(toks.begin(), toks.end());
    };

    {
        auto toks = next_tokens("layout");
        if (toks.size() != 2) throw fail("bad layout record");
        m.feature_layout = toks[1] == "-" ? "" : toks[1];
    }
    {
        auto toks = next_tokens("dims");
        if (toks.size() < 2) throw fail("bad dims record");
        long long k = 0;
        if (!parse_int64(toks[1], k) || k < 2 || toks.size() != static_cast<std::size_t>(k) + 2)
            throw fail("bad dims record");
        for (std::size_t i = 2; i < toks.size(); ++i) {
            long long d = 0;
            if (!parse_int64(toks[i], d) || d < 1) throw fail("bad layer dimension");
            m.layer_dims.push_back(static_cast<std::size_t>(d));
        }
    }
    auto read_vec = [&](const std::string& tag, std::size_t expected) {
        auto toks = next_tokens(tag);
        long long n = 0;
        if (toks.size() < 2 || !parse_int64(toks[1], n) ||
            static_cast<std::size_t>(n) != expected || toks.size() != expected + 2)
            throw fail("bad " + tag + " record");
        std::vector<double> v(expected);
        for (std::size_t i = 0; i < expected; ++i) {
            if (!parse_double(toks[i + 2], v[i]) || !std::isfinite(v[i]))
                throw fail("bad value in " + tag + " record");
        }
        return v;
    };
    m.feat_mean = read_vec("mean", m.layer_dims.front());
    m.feat_std = read_vec("std", m.layer_dims.front());
    for (double s : m.feat_std)
        if (!(s > 0.0)) throw fail("non-positive standardization std");

    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
        std::size_t out_dim = m.layer_dims[l + 1], in_dim = m.layer_dims[l];
        auto wt = next_tokens("W" + std::to_string(l));
        long long r = 0, c = 0;
        if (wt.size() != 3 + out_dim * in_dim || !parse_int64(wt[1], r) || !parse_int64(wt[2], c) ||
            static_cast<std::size_t>(r) != out_dim || static_cast<std::size_t>(c) != in_dim)
            throw fail("bad W" + std::to_string(l) + " record");
        std::vector<double> w(out_dim * in_dim);
        for (std::size_t i = 0; i < w.size(); ++i)
            if (!parse_double(wt[i + 3], w[i]) || !std::isfinite(w[i]))
                throw fail("bad weight value in layer " + std::to_string(l));
        m.weights.push_back(std::move(w));
        m.biases.push_back(read_vec("b" + std::to_string(l), out_dim));
    }
    if (!std::getline(in, line) || trim(line) != "end") throw fail("missing end record");

    if (!expected_layout.empty() && m.feature_layout != expected_layout)
        throw fail("feature layout mismatch: model was trained with a different feature layout");
    return m;
}

inline MlpModel load_model(const std::string& path, const std::string& expected_layout = "") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open '" + path + "'");
    return load_model(in, expected_layout);
}

}  // namespace emgwave
