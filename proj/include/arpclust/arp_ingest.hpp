#pragma once
// Decoding of ARP observations from pcap capture files and from the
// line-delimited record format. Produces a canonical observation stream
// plus ingest counters.

#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace arpclust {

struct MacAddr {
    std::array<std::uint8_t, 6> bytes{};

    auto operator<=>(const MacAddr &) const = default;

    static constexpr MacAddr broadcast() {
        return MacAddr{{0xff, 0xff, 0xff, 0xff, 0xff, 0xff}};
    }
};

struct Ipv4Addr {
    std::array<std::uint8_t, 4> bytes{};

    auto operator<=>(const Ipv4Addr &) const = default;
};

inline std::string to_string(const MacAddr &mac) {
    char buf[18];
    std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x",
                  mac.bytes[0], mac.bytes[1], mac.bytes[2], mac.bytes[3],
                  mac.bytes[4], mac.bytes[5]);
    return buf;
}

inline std::string to_string(const Ipv4Addr &ip) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", ip.bytes[0], ip.bytes[1],
                  ip.bytes[2], ip.bytes[3]);
    return buf;
}

inline std::optional<MacAddr> parse_mac(std::string_view text) {
    MacAddr mac;
    if (text.size() != 17) {
        return std::nullopt;
    }
    auto hex_nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    for (int i = 0; i < 6; ++i) {
        const int hi = hex_nibble(text[static_cast<std::size_t>(i * 3)]);
        const int lo = hex_nibble(text[static_cast<std::size_t>(i * 3 + 1)]);
        if (hi < 0 || lo < 0) {
            return std::nullopt;
        }
        if (i < 5 && text[static_cast<std::size_t>(i * 3 + 2)] != ':') {
            return std::nullopt;
        }
        mac.bytes[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return mac;
}

inline std::optional<Ipv4Addr> parse_ipv4(std::string_view text) {
    Ipv4Addr ip;
    const char *cursor = text.data();
    const char *end = text.data() + text.size();
    for (int i = 0; i < 4; ++i) {
        unsigned value = 0;
        auto [next, ec] = std::from_chars(cursor, end, value);
        if (ec != std::errc{} || next == cursor || value > 255) {
            return std::nullopt;
        }
        ip.bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(value);
        cursor = next;
        if (i < 3) {
            if (cursor == end || *cursor != '.') {
                return std::nullopt;
            }
            ++cursor;
        }
    }
    if (cursor != end) {
        return std::nullopt;
    }
    return ip;
}

/// One decoded ARP packet. src_mac/dst_mac are the Ethernet addresses;
/// sender_ip/target_ip come from the ARP payload.
struct ArpObservation {
    std::int64_t timestamp_us = 0;
    MacAddr src_mac;
    MacAddr dst_mac;
    std::uint16_t opcode = 0;  // 1 = request, 2 = reply
    Ipv4Addr sender_ip;
    Ipv4Addr target_ip;

    bool operator==(const ArpObservation &) const = default;
};

struct IngestStats {
    std::uint64_t packets_total = 0;
    std::uint64_t arp_packets = 0;
    std::uint64_t dropped_malformed = 0;
    std::uint64_t dropped_non_arp = 0;
};

enum class IngestError {
    none,
    bad_magic,
    unsupported_link_type,
    truncated_header,
};

inline const char *to_string(IngestError err) {
    switch (err) {
    case IngestError::none: return "none";
    case IngestError::bad_magic: return "bad pcap magic";
    case IngestError::unsupported_link_type: return "unsupported link type";
    case IngestError::truncated_header: return "truncated capture file";
    }
    return "unknown";
}

struct IngestResult {
    std::vector<ArpObservation> observations;
    IngestStats stats;
    IngestError error = IngestError::none;
};

namespace detail {

inline std::uint16_t read_be16(const std::uint8_t *p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline std::uint32_t read_u32(const std::uint8_t *p, bool little_endian) {
    if (little_endian) {
        return (static_cast<std::uint32_t>(p[3]) << 24) |
               (static_cast<std::uint32_t>(p[2]) << 16) |
               (static_cast<std::uint32_t>(p[1]) << 8) |
               static_cast<std::uint32_t>(p[0]);
    }
    return (static_cast<std::uint32_t>(p[0]) << 24) |
           (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) |
           static_cast<std::uint32_t>(p[3]);
}

/// Reads exactly `count` bytes unless the stream ends first; returns the
/// number of bytes actually read. Loops so that chunked stream sources
/// behave identically to single-buffer ones.
inline std::size_t read_fully(std::istream &in, std::uint8_t *out,
                              std::size_t count) {
    std::size_t got = 0;
    while (got < count && in.good()) {
        in.read(reinterpret_cast<char *>(out) + got,
                static_cast<std::streamsize>(count - got));
        got += static_cast<std::size_t>(in.gcount());
    }
    return got;
}

constexpr std::uint16_t kEtherTypeArp = 0x0806;
constexpr std::uint16_t kEtherTypeVlan = 0x8100;
constexpr std::size_t kEthernetHeaderLen = 14;
constexpr std::size_t kArpPayloadLen = 28;

/// Classifies one Ethernet frame; emits an observation when it is a
/// well-formed IPv4-over-Ethernet ARP packet.
inline void classify_frame(const std::uint8_t *frame, std::size_t len,
                           std::int64_t timestamp_us, IngestResult &result) {
    result.stats.packets_total += 1;
    if (len < kEthernetHeaderLen) {
        result.stats.dropped_malformed += 1;
        return;
    }
    std::size_t offset = 12;
    std::uint16_t ether_type = read_be16(frame + offset);
    offset += 2;
    if (ether_type == kEtherTypeVlan) {  // unwrap one 802.1Q tag
        if (len < offset + 4) {
            result.stats.dropped_malformed += 1;
            return;
        }
        ether_type = read_be16(frame + offset + 2);
        offset += 4;
    }
    if (ether_type != kEtherTypeArp) {
        result.stats.dropped_non_arp += 1;
        return;
    }
    if (len < offset + kArpPayloadLen) {
        result.stats.dropped_malformed += 1;
        return;
    }
    const std::uint8_t *arp = frame + offset;
    const std::uint16_t htype = read_be16(arp);
    const std::uint16_t ptype = read_be16(arp + 2);
    const std::uint8_t hlen = arp[4];
    const std::uint8_t plen = arp[5];
    const std::uint16_t opcode = read_be16(arp + 6);
    if (htype != 1 || ptype != 0x0800 || hlen != 6 || plen != 4 ||
        (opcode != 1 && opcode != 2)) {
        result.stats.dropped_malformed += 1;
        return;
    }
    ArpObservation obs;
    obs.timestamp_us = timestamp_us;
    std::copy(frame, frame + 6, obs.dst_mac.bytes.begin());
    std::copy(frame + 6, frame + 12, obs.src_mac.bytes.begin());
    if (obs.src_mac == MacAddr::broadcast()) {
        result.stats.dropped_malformed += 1;
        return;
    }
    obs.opcode = opcode;
    std::copy(arp + 14, arp + 18, obs.sender_ip.bytes.begin());
    std::copy(arp + 24, arp + 28, obs.target_ip.bytes.begin());
    result.observations.push_back(obs);
    result.stats.arp_packets += 1;
}

} // namespace detail

/// Parses a classic pcap stream (both endiannesses, microsecond and
/// nanosecond magic; nanosecond timestamps are truncated to microseconds).
/// Only link type 1 (Ethernet) is supported. On a truncated file the
/// result carries every complete record read before the cut.
inline IngestResult parse_pcap(std::istream &in) {
    IngestResult result;
    std::uint8_t header[24];
    if (detail::read_fully(in, header, sizeof(header)) != sizeof(header)) {
        result.error = IngestError::bad_magic;
        return result;
    }
    const std::uint32_t magic_le = detail::read_u32(header, true);
    bool little_endian = false;
    bool nanos = false;
    // The magic is written in the producer's byte order; reading it
    // little-endian distinguishes all four variants.
    switch (magic_le) {
    case 0xa1b2c3d4u: little_endian = true;  nanos = false; break;
    case 0xd4c3b2a1u: little_endian = false; nanos = false; break;
    case 0xa1b23c4du: little_endian = true;  nanos = true;  break;
    case 0x4d3cb2a1u: little_endian = false; nanos = true;  break;
    default:
        result.error = IngestError::bad_magic;
        return result;
    }
    const std::uint32_t link_type = detail::read_u32(header + 20, little_endian);
    if (link_type != 1) {
        result.error = IngestError::unsupported_link_type;
        return result;
    }
    std::vector<std::uint8_t> frame;
    for (;;) {
        std::uint8_t record[16];
        const std::size_t got = detail::read_fully(in, record, sizeof(record));
        if (got == 0) {
            break;  // clean end of file
        }
        if (got < sizeof(record)) {
            result.error = IngestError::truncated_header;
            break;
        }
        const std::uint32_t ts_sec = detail::read_u32(record, little_endian);
        const std::uint32_t ts_frac = detail::read_u32(record + 4, little_endian);
        const std::uint32_t incl_len = detail::read_u32(record + 8, little_endian);
        if (incl_len > 262144) {  // far beyond any sane snap length
            result.error = IngestError::truncated_header;
            break;
        }
        frame.resize(incl_len);
        if (detail::read_fully(in, frame.data(), incl_len) != incl_len) {
            result.error = IngestError::truncated_header;
            break;
        }
        const std::int64_t micros =
            nanos ? static_cast<std::int64_t>(ts_frac) / 1000
                  : static_cast<std::int64_t>(ts_frac);
        const std::int64_t timestamp_us =
            static_cast<std::int64_t>(ts_sec) * 1'000'000 + micros;
        detail::classify_frame(frame.data(), frame.size(), timestamp_us,
                               result);
    }
    return result;
}

/// Serializes an observation to the one-line record format:
/// `timestamp_us src_mac dst_mac opcode sender_ip target_ip`.
inline std::string format_record(const ArpObservation &obs) {
    std::string line;
    line += std::to_string(obs.timestamp_us);
    line += ' ';
    line += to_string(obs.src_mac);
    line += ' ';
    line += to_string(obs.dst_mac);
    line += ' ';
    line += std::to_string(obs.opcode);
    line += ' ';
    line += to_string(obs.sender_ip);
    line += ' ';
    line += to_string(obs.target_ip);
    return line;
}

namespace detail {

inline std::optional<ArpObservation> parse_record_line(std::string_view line) {
    std::array<std::string_view, 6> fields;
    std::size_t field_count = 0;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) {
            ++pos;
        }
        if (pos == line.size()) {
            break;
        }
        const std::size_t start = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') {
            ++pos;
        }
        if (field_count == fields.size()) {
            return std::nullopt;  // trailing junk
        }
        fields[field_count++] = line.substr(start, pos - start);
    }
    if (field_count != fields.size()) {
        return std::nullopt;
    }
    ArpObservation obs;
    {
        const auto text = fields[0];
        auto [next, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                          obs.timestamp_us);
        if (ec != std::errc{} || next != text.data() + text.size() ||
            obs.timestamp_us < 0) {
            return std::nullopt;
        }
    }
    const auto src = parse_mac(fields[1]);
    const auto dst = parse_mac(fields[2]);
    if (!src || !dst || *src == MacAddr::broadcast()) {
        return std::nullopt;
    }
    obs.src_mac = *src;
    obs.dst_mac = *dst;
    {
        const auto text = fields[3];
        unsigned value = 0;
        auto [next, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                          value);
        if (ec != std::errc{} || next != text.data() + text.size() ||
            (value != 1 && value != 2)) {
            return std::nullopt;
        }
        obs.opcode = static_cast<std::uint16_t>(value);
    }
    const auto sender = parse_ipv4(fields[4]);
    const auto target = parse_ipv4(fields[5]);
    if (!sender || !target) {
        return std::nullopt;
    }
    obs.sender_ip = *sender;
    obs.target_ip = *target;
    return obs;
}

} // namespace detail

/// Parses the line-delimited record format. Malformed lines are skipped
/// and counted; blank lines are ignored entirely.
inline IngestResult parse_records(std::istream &in) {
    IngestResult result;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view view = line;
        if (!view.empty() && view.back() == '\r') {
            view.remove_suffix(1);
        }
        const bool blank =
            view.find_first_not_of(" \t") == std::string_view::npos;
        if (blank) {
            continue;
        }
        result.stats.packets_total += 1;
        if (auto obs = detail::parse_record_line(view)) {
            result.observations.push_back(*obs);
            result.stats.arp_packets += 1;
        } else {
            result.stats.dropped_malformed += 1;
        }
    }
    return result;
}

} // namespace arpclust
