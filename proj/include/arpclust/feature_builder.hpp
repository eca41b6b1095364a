#pragma once
// Turns a suspicious event window into the clustering feature vector:
// the per-bin degrees followed by the per-bin count/degree ratios,
// L2-normalized as a whole.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "arpclust/detail/fsio.hpp"
#include "arpclust/event_detector.hpp"

namespace arpclust {

struct FeatureVector {
    std::string event_id;
    std::vector<double> values;

    bool operator==(const FeatureVector &) const = default;
};

/// `<source>/<host>/<onset bin, zero-padded>` sorts chronologically
/// within a host and is unique across a run as long as source names are.
inline std::string default_event_id(const std::string &source,
                                    const SuspiciousEvent &event) {
    char bin[24];
    std::snprintf(bin, sizeof(bin), "%012lld",
                  static_cast<long long>(event.onset_bin));
    return source + "/" + to_string(event.host_mac) + "/" + bin;
}

/// In-place L2 normalization; the zero vector is left unchanged.
inline void normalize(std::vector<double> &values) {
    double sum_sq = 0.0;
    for (const double v : values) {
        sum_sq += v * v;
    }
    if (sum_sq == 0.0) {
        return;
    }
    const double inv = 1.0 / std::sqrt(sum_sq);
    for (double &v : values) {
        v *= inv;
    }
}

/// [degree_0..degree_{w-1}, count_0/degree_0..count_{w-1}/degree_{w-1}],
/// ratios defined as 0 where the degree is 0, then L2-normalized.
inline FeatureVector build_feature(const SuspiciousEvent &event,
                                   const std::string &event_id) {
    FeatureVector fv;
    fv.event_id = event_id;
    const std::size_t w = event.bins.size();
    fv.values.resize(2 * w);
    for (std::size_t i = 0; i < w; ++i) {
        const HostBin &bin = event.bins[i];
        fv.values[i] = static_cast<double>(bin.degree);
        fv.values[w + i] =
            bin.degree == 0
                ? 0.0
                : static_cast<double>(bin.count) / bin.degree;
    }
    normalize(fv.values);
    return fv;
}

inline std::string write_features_csv(std::span<const FeatureVector> features,
                                      std::size_t width) {
    std::ostringstream out;
    out << "event_id";
    for (std::size_t i = 0; i < width; ++i) {
        out << ",v" << i;
    }
    out << "\n";
    for (const FeatureVector &fv : features) {
        if (fv.values.size() != width) {
            throw std::invalid_argument(
                "write_features_csv: inconsistent vector width");
        }
        out << fv.event_id;
        for (const double v : fv.values) {
            out << "," << detail::format_double(v);
        }
        out << "\n";
    }
    return out.str();
}

inline std::vector<FeatureVector> parse_features_csv(const std::string &text) {
    std::vector<FeatureVector> features;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (header) {
            header = false;
            continue;
        }
        FeatureVector fv;
        std::size_t pos = line.find(',');
        if (pos == std::string::npos) {
            throw std::runtime_error("features csv: row without values");
        }
        fv.event_id = line.substr(0, pos);
        while (pos != std::string::npos) {
            const std::size_t start = pos + 1;
            pos = line.find(',', start);
            const std::size_t end = pos == std::string::npos ? line.size() : pos;
            double value = 0.0;
            const char *first = line.data() + start;
            const char *last = line.data() + end;
            const auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc() || ptr != last) {
                throw std::runtime_error("features csv: bad number: " +
                                         line.substr(start, end - start));
            }
            fv.values.push_back(value);
        }
        if (!features.empty() &&
            features.front().values.size() != fv.values.size()) {
            throw std::runtime_error("features csv: ragged rows");
        }
        features.push_back(std::move(fv));
    }
    return features;
}

} // namespace arpclust
