#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "signal.hpp"
#include "util.hpp"

namespace emgwave {

// Column names for the recording CSV contract:
//   subject,trial,label,channel_1,channel_2[,channel_k...]
// one row per sample instant, rows within a (subject,trial,label) group in
// time order.
struct CsvSchema {
    std::string subject = "subject";
    std::string trial = "trial";
    std::string label = "label";
    std::string channel_prefix = "channel_";
};

namespace detail {

inline std::runtime_error csv_error(const std::string& source, std::size_t line,
                                    const std::string& msg) {
    return std::runtime_error(source + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace detail

inline std::vector<EmgRecording> load_recordings(std::istream& in, const CsvSchema& schema = {},
                                                 double sample_rate_hz = 4000.0,
                                                 const std::string& source = "<stream>") {
    if (!(sample_rate_hz > 0.0))
        throw std::invalid_argument("load_recordings: sample_rate_hz must be > 0");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(source + ": no records");

    auto header = split(trim(line), ',');
    long long subject_col = -1, trial_col = -1, label_col = -1;
    std::vector<long long> channel_cols;  // channel_cols[k-1] = column of channel_k
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name(trim(header[i]));
        if (name == schema.subject) subject_col = static_cast<long long>(i);
        else if (name == schema.trial) trial_col = static_cast<long long>(i);
        else if (name == schema.label) label_col = static_cast<long long>(i);
        else if (name.rfind(schema.channel_prefix, 0) == 0) {
            long long k = 0;
            if (!parse_int64(name.substr(schema.channel_prefix.size()), k) || k < 1)
                throw detail::csv_error(source, 1, "bad channel column name '" + name + "'");
            if (channel_cols.size() < static_cast<std::size_t>(k)) channel_cols.resize(k, -1);
            channel_cols[k - 1] = static_cast<long long>(i);
        } else {
            throw detail::csv_error(source, 1, "unexpected column '" + name + "'");
        }
    }
    if (subject_col < 0) throw detail::csv_error(source, 1, "missing required column '" + schema.subject + "'");
    if (trial_col < 0) throw detail::csv_error(source, 1, "missing required column '" + schema.trial + "'");
    if (label_col < 0) throw detail::csv_error(source, 1, "missing required column '" + schema.label + "'");
    if (channel_cols.empty())
        throw detail::csv_error(source, 1, "missing required column '" + schema.channel_prefix + "1'");
    for (std::size_t k = 0; k < channel_cols.size(); ++k)
        if (channel_cols[k] < 0)
            throw detail::csv_error(source, 1, "missing required column '" + schema.channel_prefix +
                                                   std::to_string(k + 1) + "'");

    std::vector<EmgRecording> recordings;
    std::unordered_map<std::string, std::size_t> group_index;  // key -> recordings index

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view row = trim(line);
        if (row.empty()) continue;
        auto fields = split(row, ',');
        if (fields.size() != header.size())
            throw detail::csv_error(source, line_no,
                                    "expected " + std::to_string(header.size()) + " fields, got " +
                                        std::to_string(fields.size()));

        std::string subject(trim(fields[subject_col]));
        if (subject.empty()) throw detail::csv_error(source, line_no, "empty subject");
        long long trial = 0, label = 0;
        if (!parse_int64(trim(fields[trial_col]), trial) || trial < 1)
            throw detail::csv_error(source, line_no,
                                    "bad trial '" + std::string(trim(fields[trial_col])) + "'");
        if (!parse_int64(trim(fields[label_col]), label) || label < 1)
            throw detail::csv_error(source, line_no,
                                    "bad label '" + std::string(trim(fields[label_col])) + "'");

        std::string key = subject + '\x1f' + std::to_string(trial) + '\x1f' + std::to_string(label);
        auto it = group_index.find(key);
        if (it == group_index.end()) {
            EmgRecording rec;
            rec.channels.resize(channel_cols.size());
            rec.sample_rate_hz = sample_rate_hz;
            rec.label = static_cast<int>(label);
            rec.subject_id = subject;
            rec.trial_index = static_cast<int>(trial);
            it = group_index.emplace(key, recordings.size()).first;
            recordings.push_back(std::move(rec));
        }
        EmgRecording& rec = recordings[it->second];
        for (std::size_t k = 0; k < channel_cols.size(); ++k) {
            std::string_view cell = trim(fields[channel_cols[k]]);
            double v = 0.0;
            if (!parse_double(cell, v))
                throw detail::csv_error(source, line_no,
                                        "cannot parse '" + std::string(cell) + "' as a number");
            if (!std::isfinite(v))
                throw detail::csv_error(source, line_no,
                                        "non-finite sample in " + schema.channel_prefix +
                                            std::to_string(k + 1));
            rec.channels[k].push_back(v);
        }
    }

    if (recordings.empty()) throw std::runtime_error(source + ": no records");
    for (const auto& rec : recordings) validate_recording(rec);
    return recordings;
}

inline std::vector<EmgRecording> load_recordings(const std::string& path,
                                                 const CsvSchema& schema = {},
                                                 double sample_rate_hz = 4000.0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_recordings: cannot open '" + path + "'");
    return load_recordings(in, schema, sample_rate_hz, path);
}

inline void save_recordings(std::ostream& out, const std::vector<EmgRecording>& recordings,
                            const CsvSchema& schema = {}) {
    if (recordings.empty()) throw std::invalid_argument("save_recordings: nothing to write");
    std::size_t channels = recordings.front().channel_count();
    for (const auto& rec : recordings) {
        validate_recording(rec);
        if (rec.channel_count() != channels)
            throw std::invalid_argument("save_recordings: recordings have mixed channel counts");
        if (rec.subject_id.find(',') != std::string::npos ||
            rec.subject_id.find('\n') != std::string::npos)
            throw std::invalid_argument("save_recordings: subject_id contains a delimiter");
    }

    out << schema.subject << ',' << schema.trial << ',' << schema.label;
    for (std::size_t k = 1; k <= channels; ++k) out << ',' << schema.channel_prefix << k;
    out << '\n';

    for (const auto& rec : recordings) {
        std::string prefix =
            rec.subject_id + ',' + std::to_string(rec.trial_index) + ',' + std::to_string(rec.label);
        for (std::size_t n = 0; n < rec.length(); ++n) {
            out << prefix;
            for (std::size_t k = 0; k < channels; ++k) out << ',' << format_double(rec.channels[k][n]);
            out << '\n';
        }
    }
}

inline void save_recordings(const std::string& path, const std::vector<EmgRecording>& recordings,
                            const CsvSchema& schema = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_recordings: cannot open '" + path + "' for writing");
    save_recordings(out, recordings, schema);
    out.flush();
    if (!out) throw std::runtime_error("save_recordings: write to '" + path + "' failed");
}

// Feature-vector cache/debug file: header names every dimension in layout
// order, one row per window, label first.
inline void write_feature_csv(std::ostream& out, const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& rows,
                              const std::vector<int>& labels) {
    if (rows.size() != labels.size())
        throw std::invalid_argument("write_feature_csv: rows/labels size mismatch");
    out << "label";
    for (const auto& name : names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != names.size())
            throw std::invalid_argument("write_feature_csv: row width does not match header");
        out << labels[i];
        for (double v : rows[i]) out << ',' << format_double(v);
        out << '\n';
    }
}

}  // namespace emgwave
