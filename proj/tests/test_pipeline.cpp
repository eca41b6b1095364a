#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <arpclust/pipeline.hpp>
#include <arpclust/synth_traffic.hpp>

#include "support/corpus.hpp"

using namespace arpclust;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string &name) {
    const fs::path dir = fs::temp_directory_path() / "arpclust_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path &path) {
    return detail::read_file(path);
}

/// Two clean families, one event per host; small but enough to train on.
GeneratedCorpus small_corpus(std::uint64_t seed) {
    const PatternFamily families[] = {PatternFamily::instant_large_boost,
                                      PatternFamily::slow_repetitive_probe};
    return testsupport::build_family_corpus(families, 8, seed);
}

nlohmann::json base_config(const fs::path &input, const fs::path &out_dir) {
    return nlohmann::json{
        {"inputs", {{{"path", input.string()}, {"format", "pcap"}}}},
        {"seed", 42},
        {"epochs", 2},
        {"k", 2},
        {"split", "none"},
        {"out_dir", out_dir.string()},
    };
}

} // namespace

TEST_CASE("config json maps onto the pipeline configuration") {
    const nlohmann::json j{
        {"inputs",
         {{{"path", "a.pcap"}},
          {{"path", "b.txt"}, {"format", "records"}, {"name", "lanB"}}}},
        {"degree_mode", "dst_mac"},
        {"opcodes", {1}},
        {"min_threshold", 256.0},
        {"window_bins", 30},
        {"seed", 7},
        {"epochs", 10},
        {"batch_size", 8},
        {"learning_rate", 0.001},
        {"k", 5},
        {"split", 2},
        {"out_dir", "out"},
    };
    const PipelineConfig config = load_config(j);
    REQUIRE(config.inputs.size() == 2);
    CHECK(config.inputs[0].path == "a.pcap");
    CHECK(config.inputs[0].format == InputFormat::pcap);
    CHECK(config.inputs[0].name == "0"); // positional default
    CHECK(config.inputs[1].format == InputFormat::records);
    CHECK(config.inputs[1].name == "lanB");
    CHECK(config.degree_mode == DegreeMode::dst_mac);
    CHECK(config.opcodes == std::vector<std::uint16_t>{1});
    CHECK(config.min_threshold == 256.0);
    CHECK(config.window_bins == 30);
    CHECK(config.seed == 7);
    CHECK(config.epochs == 10);
    CHECK(config.batch_size == 8);
    CHECK(config.learning_rate == 0.001);
    CHECK(config.k == 5);
    CHECK(config.split.mode == SplitSelector::Mode::index);
    CHECK(config.split.index == 2);
    CHECK(config.out_dir == "out");
    CHECK_NOTHROW(validate(config));
}

TEST_CASE("config validation rejects misconfigurations") {
    CHECK_THROWS_AS(load_config(nlohmann::json{{"not_a_key", 1}}),
                    std::invalid_argument);

    nlohmann::json j{
        {"inputs", {{{"path", "a.pcap"}}}},
        {"out_dir", "out"},
    };
    CHECK_NOTHROW(validate(load_config(j)));

    SECTION("no inputs") {
        j.erase("inputs");
        CHECK_THROWS_AS(validate(load_config(j)), std::invalid_argument);
    }
    SECTION("progressive split needs k = 5") {
        j["k"] = 4;
        j["split"] = "auto";
        CHECK_THROWS_AS(validate(load_config(j)), std::invalid_argument);
        j["split"] = "none";
        CHECK_NOTHROW(validate(load_config(j)));
    }
    SECTION("k range") {
        j["split"] = "none";
        j["k"] = 0;
        CHECK_THROWS_AS(validate(load_config(j)), std::invalid_argument);
        j["k"] = 27;
        CHECK_THROWS_AS(validate(load_config(j)), std::invalid_argument);
    }
    SECTION("opcode filter") {
        j["opcodes"] = nlohmann::json::array();
        CHECK_THROWS_AS(validate(load_config(j)), std::invalid_argument);
        j["opcodes"] = {3};
        CHECK_THROWS_AS(validate(load_config(j)), std::invalid_argument);
    }
    SECTION("bad numeric settings") {
        j["learning_rate"] = 0.0;
        CHECK_THROWS_AS(validate(load_config(j)), std::invalid_argument);
    }
    SECTION("bad degree mode") {
        j["degree_mode"] = "both";
        CHECK_THROWS_AS(load_config(j), std::invalid_argument);
    }
    SECTION("bad split selector") {
        j["split"] = "diagonal";
        CHECK_THROWS_AS(load_config(j), std::invalid_argument);
    }
}

TEST_CASE("the opcode filter drops hosts with no matching traffic") {
    ArpObservation request;
    request.timestamp_us = 0;
    request.src_mac = synth_host_mac(1);
    request.dst_mac = MacAddr::broadcast();
    request.opcode = 1;
    request.sender_ip = Ipv4Addr{{10, 0, 0, 1}};
    request.target_ip = Ipv4Addr{{10, 0, 0, 2}};
    ArpObservation reply = request;
    reply.src_mac = synth_host_mac(2);
    reply.opcode = 2;

    PipelineConfig config;
    config.opcodes = {1};
    const std::vector<ArpObservation> all = {request, reply};
    const SourceDetection source =
        detect_source(all, "s", IngestStats{}, config);
    CHECK(source.total_hosts == 1);
}

TEST_CASE("summaries count hosts, suspicious hosts and events") {
    SECTION("three hosts, one suspicious with two events") {
        SourceDetection source;
        source.name = "s";
        source.total_hosts = 3;
        for (int i = 0; i < 2; ++i) {
            PipelineEvent pe;
            pe.event_id = "e" + std::to_string(i);
            pe.source = "s";
            pe.event.host_mac = synth_host_mac(1);
            pe.event.onset_bin = i * 100;
            pe.event.bins = {HostBin{i * 100, 500u + 100u * i, 10u},
                             HostBin{i * 100 + 1, 20u, 4u}};
            source.events.push_back(std::move(pe));
        }
        std::vector<SourceDetection> sources;
        sources.push_back(std::move(source));
        const PipelineSummary summary = summarize(std::move(sources));
        CHECK(summary.total_hosts == 3);
        CHECK(summary.suspicious_hosts == 1);
        CHECK(summary.total_events == 2);
        CHECK(summary.mean_peak_count == (500.0 + 600.0) / 2.0);
        CHECK(summary.mean_peak_degree == 10.0);

        const nlohmann::json j = summary_to_json(summary);
        CHECK(j.at("totals").at("total_hosts") == 3);
        CHECK(j.at("totals").at("suspicious_hosts") == 1);
        CHECK(j.at("totals").at("events") == 2);
        REQUIRE(j.at("sources").size() == 1);
        CHECK(j.at("sources")[0].at("name") == "s");
    }
    SECTION("empty input") {
        const PipelineSummary summary = summarize({});
        CHECK(summary.total_hosts == 0);
        CHECK(summary.suspicious_hosts == 0);
        CHECK(summary.total_events == 0);
        CHECK(summary.mean_peak_count == 0.0);
    }
}

TEST_CASE("events json round trips and validates") {
    const GeneratedCorpus corpus = small_corpus(1);
    PipelineConfig config;
    const SourceDetection source =
        detect_source(corpus.observations, "synth", IngestStats{}, config);
    REQUIRE_FALSE(source.events.empty());

    std::vector<SourceDetection> sources = {source};
    const nlohmann::json j = events_to_json(sources, config.window_bins);
    const EventsFile parsed = parse_events_json(j);
    CHECK(parsed.window_bins == config.window_bins);
    REQUIRE(parsed.events.size() == source.events.size());
    for (std::size_t i = 0; i < parsed.events.size(); ++i) {
        CHECK(parsed.events[i].event_id == source.events[i].event_id);
        CHECK(parsed.events[i].source == source.events[i].source);
        CHECK(parsed.events[i].event.host_mac ==
              source.events[i].event.host_mac);
        CHECK(parsed.events[i].event.onset_bin ==
              source.events[i].event.onset_bin);
        CHECK(parsed.events[i].event.bins == source.events[i].event.bins);
    }

    nlohmann::json bad_format = j;
    bad_format["format"] = "x";
    CHECK_THROWS_AS(parse_events_json(bad_format), std::runtime_error);
    nlohmann::json short_bins = j;
    short_bins["events"][0]["bins"].erase(0);
    CHECK_THROWS_AS(parse_events_json(short_bins), std::runtime_error);
    nlohmann::json bad_mac = j;
    bad_mac["events"][0]["host"] = "not-a-mac";
    CHECK_THROWS_AS(parse_events_json(bad_mac), std::runtime_error);
}

TEST_CASE("ingest_input reports missing files") {
    InputSpec input;
    input.path = "/nonexistent/capture.pcap";
    input.format = InputFormat::pcap;
    IngestStats stats;
    CHECK_THROWS_AS(ingest_input(input, stats), std::runtime_error);
}

TEST_CASE("a full run writes every artifact and matches ground truth") {
    const fs::path dir = fresh_dir("full_run");
    const GeneratedCorpus corpus = small_corpus(2);
    emit(corpus.observations, EmitFormat::pcap, dir / "capture.pcap");

    PipelineConfig config =
        load_config(base_config(dir / "capture.pcap", dir / "out"));
    REQUIRE(run(config) == 0);

    for (const char *name :
         {"events.json", "features.csv", "model.json", "train_report.csv",
          "latents.csv", "clusters.json", "assignments.csv", "summary.json"}) {
        INFO(name);
        CHECK(fs::exists(dir / "out" / name));
    }

    const nlohmann::json summary =
        nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
    CHECK(summary.at("totals").at("total_hosts") == 16);
    CHECK(summary.at("totals").at("suspicious_hosts") == 16);
    CHECK(summary.at("totals").at("events") ==
          static_cast<int>(corpus.labels.size()));

    const auto features = parse_features_csv(slurp(dir / "out" / "features.csv"));
    CHECK(features.size() == corpus.labels.size());
    const auto latents = parse_latents_csv(slurp(dir / "out" / "latents.csv"));
    CHECK(latents.size() == features.size());

    // clustering a second output directory from the same inputs is
    // byte-identical
    PipelineConfig again = config;
    again.out_dir = dir / "out2";
    REQUIRE(run(again) == 0);
    for (const char *name :
         {"events.json", "features.csv", "latents.csv", "assignments.csv",
          "clusters.json", "summary.json"}) {
        INFO(name);
        CHECK(slurp(dir / "out" / name) == slurp(dir / "out2" / name));
    }
}

TEST_CASE("a benign-only capture exits with the no-events code") {
    const fs::path dir = fresh_dir("benign_only");
    std::vector<PatternSpec> specs;
    for (std::uint32_t h = 1; h <= 4; ++h) {
        PatternSpec spec;
        spec.family = PatternFamily::benign_background;
        spec.host_mac = synth_host_mac(h);
        spec.duration_bins = 120;
        specs.push_back(spec);
    }
    const GeneratedCorpus corpus = generate(specs, 3);
    emit(corpus.observations, EmitFormat::pcap, dir / "capture.pcap");

    PipelineConfig config =
        load_config(base_config(dir / "capture.pcap", dir / "out"));
    CHECK(run(config) == 2);
    CHECK(fs::exists(dir / "out" / "events.json"));
    CHECK(fs::exists(dir / "out" / "summary.json"));
    CHECK_FALSE(fs::exists(dir / "out" / "features.csv"));
    CHECK_FALSE(fs::exists(dir / "out" / "latents.csv"));
    CHECK_FALSE(fs::exists(dir / "out" / "clusters.json"));

    const nlohmann::json summary =
        nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
    CHECK(summary.at("totals").at("events") == 0);
    CHECK(summary.at("totals").at("suspicious_hosts") == 0);
    CHECK(summary.at("totals").at("total_hosts") == 4);
}

TEST_CASE("a run with fewer events than folds fails loudly") {
    const fs::path dir = fresh_dir("too_few");
    const PatternFamily families[] = {PatternFamily::instant_large_boost};
    const GeneratedCorpus corpus =
        testsupport::build_family_corpus(families, 3, 4);
    emit(corpus.observations, EmitFormat::pcap, dir / "capture.pcap");

    PipelineConfig config =
        load_config(base_config(dir / "capture.pcap", dir / "out"));
    CHECK_THROWS_AS(run(config), std::invalid_argument);
}

TEST_CASE("stage-wise cli invocations reproduce the single run exactly") {
    const std::string exe = std::string("\"") + ARPCLUST_CLI_PATH + "\"";

    const fs::path dir = fresh_dir("stagewise");
    const GeneratedCorpus corpus = small_corpus(5);
    emit(corpus.observations, EmitFormat::pcap, dir / "capture.pcap");

    const fs::path run_out = dir / "run_out";
    PipelineConfig config =
        load_config(base_config(dir / "capture.pcap", run_out));
    REQUIRE(run(config) == 0);

    const fs::path stage = dir / "stage_out";
    fs::create_directories(stage);
    const auto shell = [&](const std::string &args) {
        const std::string command = exe + " " + args;
        INFO(command);
        REQUIRE(std::system(command.c_str()) == 0);
    };
    shell("detect --input " + (dir / "capture.pcap").string() +
          " --name 0 --out " + (stage / "events.json").string());
    shell("featurize --events " + (stage / "events.json").string() +
          " --out " + (stage / "features.csv").string());
    shell("train --features " + (stage / "features.csv").string() +
          " --out " + stage.string() + " --seed 42 --epochs 2");
    shell("cluster --latents " + (stage / "latents.csv").string() +
          " --out " + stage.string() + " --seed 42 --k 2 --split none");

    for (const char *name : {"events.json", "features.csv", "model.json",
                             "train_report.csv", "latents.csv",
                             "clusters.json", "assignments.csv"}) {
        INFO(name);
        CHECK(slurp(run_out / name) == slurp(stage / name));
    }
}

TEST_CASE("the cli run subcommand matches the in-process pipeline") {
    const fs::path dir = fresh_dir("cli_run");
    const GeneratedCorpus corpus = small_corpus(6);
    emit(corpus.observations, EmitFormat::pcap, dir / "capture.pcap");

    const nlohmann::json config_json =
        base_config(dir / "capture.pcap", dir / "cli_out");
    detail::write_file_atomic(dir / "config.json", config_json.dump(2) + "\n");

    const std::string command = std::string("\"") + ARPCLUST_CLI_PATH +
                                "\" run --config " +
                                (dir / "config.json").string();
    REQUIRE(std::system(command.c_str()) == 0);

    PipelineConfig config = load_config(config_json);
    config.out_dir = dir / "lib_out";
    REQUIRE(run(config) == 0);

    for (const char *name :
         {"events.json", "features.csv", "latents.csv", "assignments.csv",
          "clusters.json", "summary.json"}) {
        INFO(name);
        CHECK(slurp(dir / "cli_out" / name) == slurp(dir / "lib_out" / name));
    }
}
