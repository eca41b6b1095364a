#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <arpclust/sequence_binner.hpp>

using namespace arpclust;

namespace {

const MacAddr kA{{0x02, 0, 0, 0, 0, 0x0a}};
const MacAddr kB{{0x02, 0, 0, 0, 0, 0x0b}};

ArpObservation obs_at(std::int64_t ts_us, const MacAddr &src,
                      const Ipv4Addr &target,
                      const MacAddr &dst = MacAddr::broadcast()) {
    ArpObservation obs;
    obs.timestamp_us = ts_us;
    obs.src_mac = src;
    obs.dst_mac = dst;
    obs.opcode = 1;
    obs.sender_ip = Ipv4Addr{{10, 0, 0, 99}};
    obs.target_ip = target;
    return obs;
}

} // namespace

TEST_CASE("bin_of uses floor division") {
    CHECK(bin_of(0) == 0);
    CHECK(bin_of(4'999'999) == 0);
    CHECK(bin_of(5'000'000) == 1);
    CHECK(bin_of(-1) == -1);
    CHECK(bin_of(-5'000'000) == -1);
    CHECK(bin_of(-5'000'001) == -2);
}

TEST_CASE("binning counts packets and distinct targets per host") {
    std::vector<ArpObservation> observations = {
        obs_at(0, kA, Ipv4Addr{{10, 0, 0, 1}}),
        obs_at(1'000'000, kA, Ipv4Addr{{10, 0, 0, 2}}),
        obs_at(2'000'000, kA, Ipv4Addr{{10, 0, 0, 1}}), // repeat target
        obs_at(5'000'000, kA, Ipv4Addr{{10, 0, 0, 3}}), // next bin
        obs_at(500'000, kB, Ipv4Addr{{10, 0, 0, 1}}),
    };
    const auto sequences = bin_observations(observations);
    REQUIRE(sequences.size() == 2);

    const HostSequence &a = sequences.at(kA);
    REQUIRE(a.bins.size() == 2);
    CHECK(a.bins.at(0) == HostBin{0, 3, 2});
    CHECK(a.bins.at(1) == HostBin{1, 1, 1});
    CHECK(a.first_bin == 0);
    CHECK(a.last_bin == 1);

    const HostSequence &b = sequences.at(kB);
    CHECK(b.bins.at(0) == HostBin{0, 1, 1});
}

TEST_CASE("degree mode selects target ip or destination mac") {
    const MacAddr dst1{{0x02, 0, 0, 0, 1, 1}};
    const MacAddr dst2{{0x02, 0, 0, 0, 1, 2}};
    std::vector<ArpObservation> observations = {
        obs_at(0, kA, Ipv4Addr{{10, 0, 0, 1}}, dst1),
        obs_at(1, kA, Ipv4Addr{{10, 0, 0, 1}}, dst2),
    };
    const auto by_ip = bin_observations(observations, DegreeMode::target_ip);
    CHECK(by_ip.at(kA).bins.at(0).degree == 1);

    const auto by_mac = bin_observations(observations, DegreeMode::dst_mac);
    CHECK(by_mac.at(kA).bins.at(0).degree == 2);
}

TEST_CASE("stored bins satisfy the count and degree invariants") {
    std::vector<ArpObservation> observations;
    std::mt19937_64 rng(42);
    for (int i = 0; i < 2000; ++i) {
        observations.push_back(
            obs_at(static_cast<std::int64_t>(rng() % 100'000'000),
                   rng() % 2 ? kA : kB,
                   Ipv4Addr{{10, 0, 0, static_cast<std::uint8_t>(rng() % 7)}}));
    }
    for (const auto &[mac, seq] : bin_observations(observations)) {
        for (const auto &[index, bin] : seq.bins) {
            CHECK(bin.bin_index == index);
            CHECK(bin.count >= 1);
            CHECK(bin.degree >= 1);
            CHECK(bin.degree <= bin.count);
        }
    }
}

TEST_CASE("densify fills implicit zeros and validates the range") {
    std::vector<ArpObservation> observations = {
        obs_at(0, kA, Ipv4Addr{{10, 0, 0, 1}}),
        obs_at(3 * kBinWidthUs, kA, Ipv4Addr{{10, 0, 0, 1}}),
    };
    const auto sequences = bin_observations(observations);
    const HostSequence &a = sequences.at(kA);

    const auto dense = densify(a, -1, 4);
    REQUIRE(dense.size() == 6);
    CHECK(dense[0] == HostBin{-1, 0, 0});
    CHECK(dense[1] == HostBin{0, 1, 1});
    CHECK(dense[2] == HostBin{1, 0, 0});
    CHECK(dense[3] == HostBin{2, 0, 0});
    CHECK(dense[4] == HostBin{3, 1, 1});
    CHECK(dense[5] == HostBin{4, 0, 0});

    CHECK_THROWS_AS(densify(a, 2, 1), std::invalid_argument);
}

TEST_CASE("sequence csv export") {
    std::vector<ArpObservation> observations = {
        obs_at(0, kA, Ipv4Addr{{10, 0, 0, 1}}),
        obs_at(2 * kBinWidthUs, kA, Ipv4Addr{{10, 0, 0, 2}}),
        obs_at(2 * kBinWidthUs + 1, kA, Ipv4Addr{{10, 0, 0, 3}}),
    };
    std::ostringstream out;
    write_sequences_csv(out, bin_observations(observations));
    CHECK(out.str() == "host_mac,bin_index,count,degree\n"
                       "02:00:00:00:00:0a,0,1,1\n"
                       "02:00:00:00:00:0a,1,0,0\n"
                       "02:00:00:00:00:0a,2,2,2\n");
}
