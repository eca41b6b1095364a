#pragma once
// Aggregates observations into per-host 5-second bins of ARP count and
// ARP degree.

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "arpclust/arp_ingest.hpp"

namespace arpclust {

constexpr std::int64_t kBinWidthUs = 5'000'000;

inline std::int64_t bin_of(std::int64_t timestamp_us) {
    // floor division; timestamps are nonnegative by the ingest invariant
    // but negative values still land in the right bin.
    const std::int64_t q = timestamp_us / kBinWidthUs;
    return (timestamp_us % kBinWidthUs < 0) ? q - 1 : q;
}

struct HostBin {
    std::int64_t bin_index = 0;
    std::uint32_t count = 0;   // ARP packets sent in the bin
    std::uint32_t degree = 0;  // distinct destinations addressed in the bin

    bool operator==(const HostBin &) const = default;
};

/// Sparse per-host sequence. Bins without traffic are implicit zeros;
/// every stored bin has count >= 1.
struct HostSequence {
    MacAddr host_mac;
    std::map<std::int64_t, HostBin> bins;
    std::int64_t first_bin = 0;
    std::int64_t last_bin = 0;
};

/// What counts as a distinct destination: the ARP resolution target
/// (default) or the literal Ethernet destination address.
enum class DegreeMode { target_ip, dst_mac };

inline std::map<MacAddr, HostSequence>
bin_observations(std::span<const ArpObservation> observations,
                 DegreeMode degree_mode = DegreeMode::target_ip) {
    struct Accumulator {
        std::uint32_t count = 0;
        std::unordered_set<std::uint64_t> destinations;
    };
    std::map<MacAddr, std::map<std::int64_t, Accumulator>> scratch;
    for (const ArpObservation &obs : observations) {
        Accumulator &acc = scratch[obs.src_mac][bin_of(obs.timestamp_us)];
        acc.count += 1;
        std::uint64_t key = 0;
        if (degree_mode == DegreeMode::target_ip) {
            for (const std::uint8_t b : obs.target_ip.bytes) {
                key = key << 8 | b;
            }
        } else {
            for (const std::uint8_t b : obs.dst_mac.bytes) {
                key = key << 8 | b;
            }
        }
        acc.destinations.insert(key);
    }
    std::map<MacAddr, HostSequence> result;
    for (auto &[mac, bins] : scratch) {
        HostSequence seq;
        seq.host_mac = mac;
        for (auto &[index, acc] : bins) {
            seq.bins.emplace(index,
                             HostBin{index, acc.count,
                                     static_cast<std::uint32_t>(
                                         acc.destinations.size())});
        }
        seq.first_bin = bins.begin()->first;
        seq.last_bin = bins.rbegin()->first;
        result.emplace(mac, std::move(seq));
    }
    return result;
}

/// Materializes the closed bin range [from_bin, to_bin] with implicit
/// zeros filled in.
inline std::vector<HostBin> densify(const HostSequence &seq,
                                    std::int64_t from_bin,
                                    std::int64_t to_bin) {
    if (from_bin > to_bin) {
        throw std::invalid_argument("densify: from_bin > to_bin");
    }
    std::vector<HostBin> dense;
    dense.reserve(static_cast<std::size_t>(to_bin - from_bin + 1));
    auto it = seq.bins.lower_bound(from_bin);
    for (std::int64_t index = from_bin; index <= to_bin; ++index) {
        if (it != seq.bins.end() && it->first == index) {
            dense.push_back(it->second);
            ++it;
        } else {
            dense.push_back(HostBin{index, 0, 0});
        }
    }
    return dense;
}

/// CSV export of densified sequences: host_mac,bin_index,count,degree.
inline void
write_sequences_csv(std::ostream &out,
                    const std::map<MacAddr, HostSequence> &sequences) {
    out << "host_mac,bin_index,count,degree\n";
    for (const auto &[mac, seq] : sequences) {
        if (seq.bins.empty()) {
            continue;
        }
        const std::string host = to_string(mac);
        for (const HostBin &bin : densify(seq, seq.first_bin, seq.last_bin)) {
            out << host << ',' << bin.bin_index << ',' << bin.count << ','
                << bin.degree << '\n';
        }
    }
}

} // namespace arpclust
