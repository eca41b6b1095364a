// Command-line front end: one binary exposing the full pipeline plus
// each stage as a sub-command, so intermediate artifacts can be
// produced and consumed independently.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <arpclust/arpclust.hpp>

namespace {

nlohmann::json load_json_file(const std::filesystem::path &path) {
    return nlohmann::json::parse(arpclust::detail::read_file(path));
}

arpclust::InputSpec make_input(const std::string &path,
                               const std::string &format,
                               const std::string &name) {
    arpclust::InputSpec input;
    input.path = path;
    input.format = arpclust::input_format_from_string(format);
    input.name = name;
    return input;
}

arpclust::SplitSelector parse_split(const std::string &text) {
    if (text == "auto") {
        return arpclust::SplitSelector::auto_select();
    }
    if (text == "none") {
        return arpclust::SplitSelector::no_split();
    }
    return arpclust::SplitSelector::at(std::stoi(text));
}

arpclust::DegreeMode parse_degree_mode(const std::string &text) {
    if (text == "target_ip") {
        return arpclust::DegreeMode::target_ip;
    }
    if (text == "dst_mac") {
        return arpclust::DegreeMode::dst_mac;
    }
    throw std::invalid_argument("unknown degree mode: " + text);
}

struct IngestArgs {
    std::string input;
    std::string format = "pcap";
    std::string out;
};

int cmd_ingest(const IngestArgs &args) {
    arpclust::InputSpec input = make_input(args.input, args.format, "0");
    arpclust::IngestStats stats;
    const std::vector<arpclust::ArpObservation> observations =
        arpclust::ingest_input(input, stats);
    if (!args.out.empty()) {
        arpclust::emit(observations, arpclust::EmitFormat::records, args.out);
    }
    const nlohmann::json j{{"packets_total", stats.packets_total},
                           {"arp_packets", stats.arp_packets},
                           {"dropped_malformed", stats.dropped_malformed},
                           {"dropped_non_arp", stats.dropped_non_arp}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

struct DetectArgs {
    std::string input;
    std::string format = "pcap";
    std::string name = "0";
    std::string degree_mode = "target_ip";
    std::vector<std::uint16_t> opcodes = {1, 2};
    double min_threshold = arpclust::kDefaultThresholdFloor;
    int window_bins = arpclust::kDefaultWindowBins;
    std::string out;
    std::string sequences;
};

int cmd_detect(const DetectArgs &args) {
    arpclust::PipelineConfig config;
    config.degree_mode = parse_degree_mode(args.degree_mode);
    config.opcodes = args.opcodes;
    config.min_threshold = args.min_threshold;
    config.window_bins = args.window_bins;

    arpclust::InputSpec input = make_input(args.input, args.format, args.name);
    arpclust::IngestStats stats;
    const std::vector<arpclust::ArpObservation> observations =
        arpclust::ingest_input(input, stats);
    std::vector<arpclust::SourceDetection> sources;
    sources.push_back(
        arpclust::detect_source(observations, args.name, stats, config));

    if (!args.sequences.empty()) {
        std::vector<arpclust::ArpObservation> kept;
        for (const arpclust::ArpObservation &obs : observations) {
            if (std::find(config.opcodes.begin(), config.opcodes.end(),
                          obs.opcode) != config.opcodes.end()) {
                kept.push_back(obs);
            }
        }
        std::ostringstream csv;
        arpclust::write_sequences_csv(
            csv, arpclust::bin_observations(kept, config.degree_mode));
        arpclust::detail::write_file_atomic(args.sequences, csv.str());
    }
    arpclust::write_json_file(
        args.out, arpclust::events_to_json(sources, config.window_bins));
    return 0;
}

struct FeaturizeArgs {
    std::string events;
    std::string out;
};

int cmd_featurize(const FeaturizeArgs &args) {
    const arpclust::EventsFile events =
        arpclust::parse_events_json(load_json_file(args.events));
    const std::vector<arpclust::FeatureVector> features =
        arpclust::featurize_events(events);
    arpclust::detail::write_file_atomic(
        args.out,
        arpclust::write_features_csv(
            features, static_cast<std::size_t>(2 * events.window_bins)));
    return 0;
}

struct TrainArgs {
    std::string features;
    std::string out_dir;
    std::uint64_t seed = 1;
    int epochs = 40;
    int batch_size = 16;
    double learning_rate = 1e-4;
};

int cmd_train(const TrainArgs &args) {
    const std::vector<arpclust::FeatureVector> features =
        arpclust::parse_features_csv(arpclust::detail::read_file(args.features));
    arpclust::TrainOptions opts;
    opts.seed = args.seed;
    opts.epochs = args.epochs;
    opts.batch_size = args.batch_size;
    opts.learning_rate = args.learning_rate;
    const auto [params, report] = arpclust::train(features, opts);

    const std::filesystem::path out_dir = args.out_dir;
    std::filesystem::create_directories(out_dir);
    arpclust::write_json_file(out_dir / "model.json",
                              arpclust::params_to_json(params,
                                                       report.seed_used));
    arpclust::detail::write_file_atomic(
        out_dir / "train_report.csv", arpclust::write_train_report_csv(report));
    arpclust::detail::write_file_atomic(
        out_dir / "latents.csv",
        arpclust::write_latents_csv(arpclust::encode_all(params, features)));
    return 0;
}

struct ClusterArgs {
    std::string latents;
    std::string out_dir;
    std::uint64_t seed = 1;
    int k = arpclust::kTopClusters;
    std::string split = "auto";
};

int cmd_cluster(const ClusterArgs &args) {
    const std::vector<arpclust::LatentPoint> latents =
        arpclust::parse_latents_csv(arpclust::detail::read_file(args.latents));
    const arpclust::ClusterTree tree = arpclust::cluster_latents(
        latents, parse_split(args.split), args.k, args.seed);

    const std::filesystem::path out_dir = args.out_dir;
    std::filesystem::create_directories(out_dir);
    arpclust::write_json_file(out_dir / "clusters.json",
                              arpclust::cluster_tree_to_json(tree), 2);
    arpclust::detail::write_file_atomic(
        out_dir / "assignments.csv",
        arpclust::write_assignments_csv(latents, tree));
    if (!tree.warning.empty()) {
        std::cerr << "warning: " << tree.warning << "\n";
    }
    return 0;
}

struct SynthArgs {
    std::string spec;
    std::uint64_t seed = 1;
    std::string format = "pcap";
    std::string out;
};

int cmd_synth(const SynthArgs &args) {
    const std::vector<arpclust::PatternSpec> specs =
        arpclust::parse_pattern_specs(load_json_file(args.spec));
    const arpclust::GeneratedCorpus corpus =
        arpclust::generate(specs, args.seed);
    arpclust::emit(corpus.observations,
                   args.format == "pcap" ? arpclust::EmitFormat::pcap
                                         : arpclust::EmitFormat::records,
                   args.out);
    return 0;
}

struct RunArgs {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
};

int cmd_run(const RunArgs &args) {
    arpclust::PipelineConfig config =
        arpclust::load_config(load_json_file(args.config));
    if (args.seed_set) {
        config.seed = args.seed;
    }
    if (!args.out.empty()) {
        config.out_dir = args.out;
    }
    return arpclust::run(config);
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"ARP traffic clustering pipeline"};
    app.require_subcommand(1);

    IngestArgs ingest_args;
    CLI::App *ingest = app.add_subcommand(
        "ingest", "Parse a capture and report ingest statistics");
    ingest->add_option("--input", ingest_args.input, "capture file")
        ->required();
    ingest->add_option("--format", ingest_args.format, "pcap|records");
    ingest->add_option("--out", ingest_args.out,
                       "write normalized records here");

    DetectArgs detect_args;
    CLI::App *detect = app.add_subcommand(
        "detect", "Extract suspicious events from a capture");
    detect->add_option("--input", detect_args.input, "capture file")
        ->required();
    detect->add_option("--format", detect_args.format, "pcap|records");
    detect->add_option("--name", detect_args.name, "source name");
    detect->add_option("--degree-mode", detect_args.degree_mode,
                       "target_ip|dst_mac");
    detect->add_option("--opcode", detect_args.opcodes,
                       "opcodes to keep (repeatable)");
    detect->add_option("--min-threshold", detect_args.min_threshold,
                       "threshold floor");
    detect->add_option("--window-bins", detect_args.window_bins,
                       "event window length in bins");
    detect->add_option("--out", detect_args.out, "events JSON path")
        ->required();
    detect->add_option("--sequences", detect_args.sequences,
                       "also write densified per-host sequences CSV");

    FeaturizeArgs featurize_args;
    CLI::App *featurize = app.add_subcommand(
        "featurize", "Build feature vectors from extracted events");
    featurize->add_option("--events", featurize_args.events, "events JSON")
        ->required();
    featurize->add_option("--out", featurize_args.out, "features CSV path")
        ->required();

    TrainArgs train_args;
    CLI::App *train = app.add_subcommand(
        "train", "Train the autoencoder and export latent points");
    train->add_option("--features", train_args.features, "features CSV")
        ->required();
    train->add_option("--out", train_args.out_dir, "output directory")
        ->required();
    train->add_option("--seed", train_args.seed, "training seed");
    train->add_option("--epochs", train_args.epochs, "training epochs");
    train->add_option("--batch", train_args.batch_size, "batch size");
    train->add_option("--lr", train_args.learning_rate, "learning rate");

    ClusterArgs cluster_args;
    CLI::App *cluster = app.add_subcommand(
        "cluster", "Cluster latent points and write the report");
    cluster->add_option("--latents", cluster_args.latents, "latents CSV")
        ->required();
    cluster->add_option("--out", cluster_args.out_dir, "output directory")
        ->required();
    cluster->add_option("--seed", cluster_args.seed, "clustering seed");
    cluster->add_option("--k", cluster_args.k, "cluster count");
    cluster->add_option("--split", cluster_args.split,
                        "auto, none, or a cluster index");

    SynthArgs synth_args;
    CLI::App *synth = app.add_subcommand(
        "synth", "Generate synthetic labeled ARP traffic");
    synth->add_option("--spec", synth_args.spec, "pattern spec JSON")
        ->required();
    synth->add_option("--seed", synth_args.seed, "generation seed");
    synth->add_option("--format", synth_args.format, "pcap|records");
    synth->add_option("--out", synth_args.out, "output file")->required();

    RunArgs run_args;
    CLI::App *run = app.add_subcommand("run", "Run the full pipeline");
    run->add_option("--config", run_args.config, "pipeline config JSON")
        ->required();
    CLI::Option *run_seed =
        run->add_option("--seed", run_args.seed, "override config seed");
    run->add_option("--out", run_args.out, "override output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            return cmd_ingest(ingest_args);
        }
        if (detect->parsed()) {
            return cmd_detect(detect_args);
        }
        if (featurize->parsed()) {
            return cmd_featurize(featurize_args);
        }
        if (train->parsed()) {
            return cmd_train(train_args);
        }
        if (cluster->parsed()) {
            return cmd_cluster(cluster_args);
        }
        if (synth->parsed()) {
            return cmd_synth(synth_args);
        }
        if (run->parsed()) {
            run_args.seed_set = run_seed->count() > 0;
            return cmd_run(run_args);
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
