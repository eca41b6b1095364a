#pragma once
// Per-host dynamic threshold, onset detection, and extraction of
// fixed-length suspicious event windows.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arpclust/sequence_binner.hpp"

namespace arpclust {

constexpr int kDefaultWindowBins = 60;     // 300 s at 5 s per bin
constexpr double kDefaultThresholdFloor = 128.0;

struct HostThreshold {
    MacAddr host_mac;
    double threshold = kDefaultThresholdFloor;
};

/// A window of `bins` consecutive (count, degree) pairs anchored at the
/// bin whose count*degree first exceeded the host threshold.
struct SuspiciousEvent {
    MacAddr host_mac;
    std::int64_t onset_bin = 0;
    std::vector<HostBin> bins;
};

/// max(floor, mean of count*degree over the densified sequence). The
/// products are integers, so the sum is accumulated exactly before the
/// single division.
inline double compute_threshold(std::span<const HostBin> dense_bins,
                                double floor = kDefaultThresholdFloor) {
    if (dense_bins.empty()) {
        throw std::invalid_argument("compute_threshold: empty sequence");
    }
    std::uint64_t sum = 0;
    for (const HostBin &bin : dense_bins) {
        sum += static_cast<std::uint64_t>(bin.count) * bin.degree;
    }
    const double mean =
        static_cast<double>(sum) / static_cast<double>(dense_bins.size());
    return std::max(floor, mean);
}

/// Scans the densified sequence in time order and reports the absolute
/// bin indices where count*degree strictly exceeds the threshold. An
/// onset opens a window of `window_bins` bins during which further
/// crossings are suppressed, so returned onsets are >= window_bins apart.
inline std::vector<std::int64_t>
detect_onsets(std::span<const HostBin> dense_bins, double threshold,
              int window_bins = kDefaultWindowBins) {
    std::vector<std::int64_t> onsets;
    std::int64_t next_allowed = std::numeric_limits<std::int64_t>::min();
    for (const HostBin &bin : dense_bins) {
        if (bin.bin_index < next_allowed) {
            continue;
        }
        const double product = static_cast<double>(
            static_cast<std::uint64_t>(bin.count) * bin.degree);
        if (product > threshold) {
            onsets.push_back(bin.bin_index);
            next_allowed = bin.bin_index + window_bins;
        }
    }
    return onsets;
}

/// One event per onset; the window is densified from the sparse host
/// sequence, so bins past the last observed traffic come out as zeros.
inline std::vector<SuspiciousEvent>
extract_events(const HostSequence &seq, std::span<const std::int64_t> onsets,
               int window_bins = kDefaultWindowBins) {
    std::vector<SuspiciousEvent> events;
    events.reserve(onsets.size());
    for (const std::int64_t onset : onsets) {
        SuspiciousEvent event;
        event.host_mac = seq.host_mac;
        event.onset_bin = onset;
        event.bins = densify(seq, onset, onset + window_bins - 1);
        events.push_back(std::move(event));
    }
    return events;
}

/// Threshold + detection + extraction for one host over its full
/// observed span.
inline std::pair<HostThreshold, std::vector<SuspiciousEvent>>
detect_host_events(const HostSequence &seq,
                   double floor = kDefaultThresholdFloor,
                   int window_bins = kDefaultWindowBins) {
    const std::vector<HostBin> dense =
        densify(seq, seq.first_bin, seq.last_bin);
    const double threshold = compute_threshold(dense, floor);
    const std::vector<std::int64_t> onsets =
        detect_onsets(dense, threshold, window_bins);
    return {HostThreshold{seq.host_mac, threshold},
            extract_events(seq, onsets, window_bins)};
}

/// UTC timestamp of a bin start, e.g. 2020-01-01T00:00:05Z.
inline std::string bin_start_iso(std::int64_t bin_index) {
    const std::int64_t seconds = bin_index * (kBinWidthUs / 1'000'000);
    // civil-from-days, Howard Hinnant's algorithm
    std::int64_t days = seconds / 86400;
    std::int64_t rem = seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    const std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const std::uint64_t doe = static_cast<std::uint64_t>(z - era * 146097);
    const std::uint64_t yoe =
        (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const std::uint64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const std::uint64_t mp = (5 * doy + 2) / 153;
    const std::uint64_t d = doy - (153 * mp + 2) / 5 + 1;
    const std::uint64_t m = mp < 10 ? mp + 3 : mp - 9;
    const std::int64_t year = m <= 2 ? y + 1 : y;
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02u:%02u:%02uZ",
                  static_cast<long long>(year), static_cast<unsigned>(m),
                  static_cast<unsigned>(d),
                  static_cast<unsigned>(rem / 3600),
                  static_cast<unsigned>(rem % 3600 / 60),
                  static_cast<unsigned>(rem % 60));
    return buf;
}

inline nlohmann::json event_to_json(const SuspiciousEvent &event) {
    nlohmann::json bins = nlohmann::json::array();
    for (const HostBin &bin : event.bins) {
        bins.push_back({bin.count, bin.degree});
    }
    return nlohmann::json{{"host", to_string(event.host_mac)},
                          {"onset_bin", event.onset_bin},
                          {"onset_time_iso", bin_start_iso(event.onset_bin)},
                          {"bins", std::move(bins)}};
}

} // namespace arpclust
