#pragma once
// Deterministic generator for labeled ARP traffic realizing the
// suspicious archetypes the pipeline is meant to separate, plus a
// benign background family. Used by the end-to-end tests and the
// `synth` CLI sub-command in place of captive LAN captures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arpclust/arp_ingest.hpp"
#include "arpclust/detail/fsio.hpp"
#include "arpclust/detail/rng.hpp"
#include "arpclust/sequence_binner.hpp"

namespace arpclust {

enum class PatternFamily {
    instant_large_boost,   // short very large request burst
    slow_repetitive_probe, // low-rate probes on a long period
    instant_small_boost,   // short burst, high count but few targets
    regular_quick_probes,  // brisk periodic probing
    continuous_high,       // sustained high traffic
    short_one_to_one_spike,// burst with one distinct target per packet
    repetitive_high_probe, // periodic heavy probe waves
    benign_background,     // steady single-target chatter
};

inline const char *to_string(PatternFamily family) {
    switch (family) {
    case PatternFamily::instant_large_boost: return "instant_large_boost";
    case PatternFamily::slow_repetitive_probe: return "slow_repetitive_probe";
    case PatternFamily::instant_small_boost: return "instant_small_boost";
    case PatternFamily::regular_quick_probes: return "regular_quick_probes";
    case PatternFamily::continuous_high: return "continuous_high";
    case PatternFamily::short_one_to_one_spike:
        return "short_one_to_one_spike";
    case PatternFamily::repetitive_high_probe: return "repetitive_high_probe";
    case PatternFamily::benign_background: return "benign_background";
    }
    return "unknown";
}

inline PatternFamily family_from_string(const std::string &name) {
    static constexpr PatternFamily kAll[] = {
        PatternFamily::instant_large_boost,
        PatternFamily::slow_repetitive_probe,
        PatternFamily::instant_small_boost,
        PatternFamily::regular_quick_probes,
        PatternFamily::continuous_high,
        PatternFamily::short_one_to_one_spike,
        PatternFamily::repetitive_high_probe,
        PatternFamily::benign_background,
    };
    for (const PatternFamily f : kAll) {
        if (name == to_string(f)) {
            return f;
        }
    }
    throw std::invalid_argument("unknown pattern family: " + name);
}

/// Zeroed numeric fields mean "use the family default".
struct PatternSpec {
    PatternFamily family = PatternFamily::benign_background;
    MacAddr host_mac{};
    std::int64_t start_time_us = 0;
    std::uint32_t count_per_bin = 0;
    std::uint32_t degree_per_bin = 0;
    std::int64_t period_bins = 0;
    std::int64_t duration_bins = 0;
    int repeats = 1;
    std::int64_t stride_bins = 120;
};

struct FamilyDefaults {
    std::uint32_t count;
    std::uint32_t degree;
    std::int64_t period;
    std::int64_t duration;
};

/// Volumes are scaled to the reported peak averages for the burst
/// families; the probe families' parameters are this project's own
/// choice, picked to keep the families mutually separable.
inline FamilyDefaults family_defaults(PatternFamily family) {
    switch (family) {
    case PatternFamily::instant_large_boost: return {600, 300, 1, 2};
    case PatternFamily::slow_repetitive_probe: return {40, 20, 6, 60};
    case PatternFamily::instant_small_boost: return {160, 8, 1, 2};
    case PatternFamily::regular_quick_probes: return {30, 15, 3, 60};
    case PatternFamily::continuous_high: return {150, 50, 1, 60};
    case PatternFamily::short_one_to_one_spike: return {400, 400, 1, 6};
    case PatternFamily::repetitive_high_probe: return {300, 100, 10, 60};
    case PatternFamily::benign_background: return {1, 1, 1, 60};
    }
    return {1, 1, 1, 1};
}

inline PatternSpec resolve_spec(PatternSpec spec) {
    const FamilyDefaults d = family_defaults(spec.family);
    if (spec.count_per_bin == 0) spec.count_per_bin = d.count;
    if (spec.degree_per_bin == 0) spec.degree_per_bin = d.degree;
    if (spec.period_bins == 0) spec.period_bins = d.period;
    if (spec.duration_bins == 0) spec.duration_bins = d.duration;
    return spec;
}

struct GroundTruthLabel {
    MacAddr host_mac{};
    std::int64_t onset_bin = 0;
    PatternFamily family = PatternFamily::benign_background;
};

struct GeneratedCorpus {
    std::vector<ArpObservation> observations; // time-ordered
    std::vector<GroundTruthLabel> labels;     // one per non-benign instance
};

/// Locally-administered MAC for synthetic host `index`.
inline MacAddr synth_host_mac(std::uint32_t index) {
    return MacAddr{{0x02, 0x00, 0x00, 0x00,
                    static_cast<std::uint8_t>(index >> 8),
                    static_cast<std::uint8_t>(index & 0xff)}};
}

namespace detail {

// Probe targets live in 10.0.0.1 .. 10.0.x.254 while the benign
// background always asks for 10.0.255.254, so layering a background on
// top of a pattern shifts both count and degree by exactly one.
inline Ipv4Addr pool_target(std::uint32_t index) {
    return Ipv4Addr{{10, 0, static_cast<std::uint8_t>(index / 254),
                     static_cast<std::uint8_t>(index % 254 + 1)}};
}

inline constexpr Ipv4Addr kBenignTarget{{10, 0, 255, 254}};

inline Ipv4Addr synth_sender_ip(const MacAddr &mac) {
    return Ipv4Addr{{10, 0, mac.bytes[4], mac.bytes[5]}};
}

struct InstanceSpan {
    MacAddr host;
    std::int64_t first_bin;
    std::int64_t last_bin;
};

} // namespace detail

/// Expands every spec into timestamp-jittered request observations and
/// returns them time-ordered together with one ground-truth label per
/// non-benign pattern instance. Overlapping non-benign instances on one
/// host are a spec conflict; benign background may layer freely.
inline GeneratedCorpus generate(std::span<const PatternSpec> specs,
                                std::uint64_t seed) {
    std::vector<detail::InstanceSpan> spans;
    GeneratedCorpus corpus;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        const PatternSpec spec = resolve_spec(specs[s]);
        if (spec.degree_per_bin > spec.count_per_bin) {
            throw std::invalid_argument("generate: degree exceeds count");
        }
        if (spec.period_bins < 1 || spec.duration_bins < 1 ||
            spec.repeats < 1 || spec.start_time_us < 0) {
            throw std::invalid_argument("generate: bad pattern parameters");
        }
        std::mt19937_64 rng =
            detail::seeded_engine(seed, static_cast<std::uint64_t>(s));
        const std::int64_t base_bin = bin_of(spec.start_time_us);
        const Ipv4Addr sender = detail::synth_sender_ip(spec.host_mac);
        const bool benign = spec.family == PatternFamily::benign_background;
        const bool one_to_one =
            spec.family == PatternFamily::short_one_to_one_spike;

        for (int r = 0; r < spec.repeats; ++r) {
            const std::int64_t first = base_bin + r * spec.stride_bins;
            const std::int64_t last = first + spec.duration_bins - 1;
            if (!benign) {
                for (const detail::InstanceSpan &other : spans) {
                    if (other.host == spec.host_mac &&
                        first <= other.last_bin && other.first_bin <= last) {
                        throw std::invalid_argument(
                            "generate: overlapping patterns on host " +
                            to_string(spec.host_mac));
                    }
                }
                spans.push_back({spec.host_mac, first, last});
                corpus.labels.push_back(
                    {spec.host_mac, first, spec.family});
            }

            const double jitter = 0.8 + 0.4 * detail::uniform_unit(rng);
            const auto count = static_cast<std::uint32_t>(std::max<long long>(
                1, std::llround(jitter * spec.count_per_bin)));
            std::uint32_t degree;
            if (one_to_one) {
                degree = count;
            } else {
                const double ratio =
                    static_cast<double>(spec.degree_per_bin) /
                    spec.count_per_bin;
                degree = static_cast<std::uint32_t>(std::clamp<long long>(
                    std::llround(ratio * count), 1, count));
            }

            for (std::int64_t rel = 0; rel < spec.duration_bins;
                 rel += spec.period_bins) {
                const std::int64_t bin_start = (first + rel) * kBinWidthUs;
                for (std::uint32_t p = 0; p < count; ++p) {
                    ArpObservation obs;
                    obs.timestamp_us =
                        bin_start +
                        static_cast<std::int64_t>(detail::uniform_unit(rng) *
                                                  kBinWidthUs);
                    obs.src_mac = spec.host_mac;
                    obs.dst_mac = MacAddr::broadcast();
                    obs.opcode = 1;
                    obs.sender_ip = sender;
                    obs.target_ip = benign ? detail::kBenignTarget
                                           : detail::pool_target(p % degree);
                    corpus.observations.push_back(obs);
                }
            }
        }
    }
    std::stable_sort(corpus.observations.begin(), corpus.observations.end(),
                     [](const ArpObservation &a, const ArpObservation &b) {
                         return a.timestamp_us < b.timestamp_us;
                     });
    return corpus;
}

enum class EmitFormat { pcap, records };

namespace detail {

inline void put_u16be(std::string &out, std::uint16_t v) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
}

inline void put_u32le(std::string &out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_mac(std::string &out, const MacAddr &mac) {
    out.append(reinterpret_cast<const char *>(mac.bytes.data()),
               mac.bytes.size());
}

inline void put_ipv4(std::string &out, const Ipv4Addr &ip) {
    out.append(reinterpret_cast<const char *>(ip.bytes.data()),
               ip.bytes.size());
}

} // namespace detail

/// Classic little-endian microsecond pcap, link type Ethernet, one
/// 42-byte frame per observation.
inline std::string render_pcap(std::span<const ArpObservation> observations) {
    std::string out;
    out.reserve(24 + observations.size() * (16 + 42));
    detail::put_u32le(out, 0xa1b2c3d4u);
    out.push_back(2); out.push_back(0); // version major 2, little-endian
    out.push_back(4); out.push_back(0); // version minor 4
    detail::put_u32le(out, 0);          // thiszone
    detail::put_u32le(out, 0);          // sigfigs
    detail::put_u32le(out, 65535);      // snaplen
    detail::put_u32le(out, 1);          // LINKTYPE_ETHERNET
    for (const ArpObservation &obs : observations) {
        const auto ts = static_cast<std::uint64_t>(obs.timestamp_us);
        detail::put_u32le(out, static_cast<std::uint32_t>(ts / 1'000'000));
        detail::put_u32le(out, static_cast<std::uint32_t>(ts % 1'000'000));
        detail::put_u32le(out, 42);
        detail::put_u32le(out, 42);
        detail::put_mac(out, obs.dst_mac);
        detail::put_mac(out, obs.src_mac);
        detail::put_u16be(out, 0x0806);
        detail::put_u16be(out, 1);      // htype Ethernet
        detail::put_u16be(out, 0x0800); // ptype IPv4
        out.push_back(6);
        out.push_back(4);
        detail::put_u16be(out, obs.opcode);
        detail::put_mac(out, obs.src_mac);
        detail::put_ipv4(out, obs.sender_ip);
        detail::put_mac(out, obs.dst_mac);
        detail::put_ipv4(out, obs.target_ip);
    }
    return out;
}

inline std::string
render_records(std::span<const ArpObservation> observations) {
    std::string out;
    for (const ArpObservation &obs : observations) {
        out += format_record(obs);
        out += '\n';
    }
    return out;
}

inline void emit(std::span<const ArpObservation> observations,
                 EmitFormat format, const std::filesystem::path &path) {
    detail::write_file_atomic(path, format == EmitFormat::pcap
                                        ? render_pcap(observations)
                                        : render_records(observations));
}

/// Spec file: JSON array of pattern objects; only `family` and
/// `host_mac` are required.
inline std::vector<PatternSpec> parse_pattern_specs(const nlohmann::json &j) {
    if (!j.is_array()) {
        throw std::runtime_error("pattern spec file: expected a JSON array");
    }
    std::vector<PatternSpec> specs;
    specs.reserve(j.size());
    for (const nlohmann::json &item : j) {
        PatternSpec spec;
        spec.family =
            family_from_string(item.at("family").get<std::string>());
        const auto mac =
            parse_mac(item.at("host_mac").get<std::string>());
        if (!mac) {
            throw std::runtime_error("pattern spec file: bad host_mac");
        }
        spec.host_mac = *mac;
        spec.start_time_us = item.value("start_time_us", std::int64_t{0});
        spec.count_per_bin = item.value("count_per_bin", std::uint32_t{0});
        spec.degree_per_bin = item.value("degree_per_bin", std::uint32_t{0});
        spec.period_bins = item.value("period_bins", std::int64_t{0});
        spec.duration_bins = item.value("duration_bins", std::int64_t{0});
        spec.repeats = item.value("repeats", 1);
        spec.stride_bins = item.value("stride_bins", std::int64_t{120});
        specs.push_back(spec);
    }
    return specs;
}

} // namespace arpclust
