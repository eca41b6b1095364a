#pragma once
// End-to-end orchestration: ingest -> bin -> detect -> featurize ->
// train -> cluster -> report, driven by one config. Later stages read
// the same intermediate artifacts the CLI sub-commands exchange, so a
// single `run` and a chain of stage invocations produce byte-identical
// files.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arpclust/arp_ingest.hpp"
#include "arpclust/autoencoder.hpp"
#include "arpclust/cluster_engine.hpp"
#include "arpclust/detail/fsio.hpp"
#include "arpclust/event_detector.hpp"
#include "arpclust/feature_builder.hpp"
#include "arpclust/sequence_binner.hpp"

namespace arpclust {

enum class InputFormat { pcap, records };

inline InputFormat input_format_from_string(const std::string &name) {
    if (name == "pcap") {
        return InputFormat::pcap;
    }
    if (name == "records") {
        return InputFormat::records;
    }
    throw std::invalid_argument("unknown input format: " + name);
}

struct InputSpec {
    std::filesystem::path path;
    InputFormat format = InputFormat::pcap;
    std::string name; // defaults to the input's position, "0", "1", ...
};

struct PipelineConfig {
    std::vector<InputSpec> inputs;
    DegreeMode degree_mode = DegreeMode::target_ip;
    std::vector<std::uint16_t> opcodes = {1, 2};
    double min_threshold = kDefaultThresholdFloor;
    int window_bins = kDefaultWindowBins;
    std::uint64_t seed = 1;
    int epochs = 40;
    int batch_size = 16;
    double learning_rate = 1e-4;
    int k = kTopClusters;
    SplitSelector split = SplitSelector::auto_select();
    std::filesystem::path out_dir;
};

inline void validate(const PipelineConfig &config) {
    if (config.inputs.empty()) {
        throw std::invalid_argument("config: no inputs");
    }
    if (config.opcodes.empty()) {
        throw std::invalid_argument("config: empty opcode filter");
    }
    for (const std::uint16_t op : config.opcodes) {
        if (op != 1 && op != 2) {
            throw std::invalid_argument("config: opcode filter must be 1 or 2");
        }
    }
    if (config.min_threshold < 0.0) {
        throw std::invalid_argument("config: negative threshold floor");
    }
    if (config.window_bins < 1) {
        throw std::invalid_argument("config: window_bins must be positive");
    }
    if (config.epochs < 1 || config.batch_size < 1) {
        throw std::invalid_argument("config: bad training parameters");
    }
    if (!(config.learning_rate > 0.0)) {
        throw std::invalid_argument("config: learning rate must be positive");
    }
    if (config.k < 1 || config.k > 26) {
        throw std::invalid_argument("config: k must be in 1..26");
    }
    if (config.split.mode != SplitSelector::Mode::none &&
        config.k != kTopClusters) {
        throw std::invalid_argument(
            "config: progressive split requires k = 5");
    }
    if (config.out_dir.empty()) {
        throw std::invalid_argument("config: missing output directory");
    }
}

/// Config file: single JSON object; unknown keys rejected so typos
/// cannot silently fall back to defaults.
inline PipelineConfig load_config(const nlohmann::json &j) {
    static const std::set<std::string> known = {
        "inputs",     "degree_mode", "opcodes",       "min_threshold",
        "window_bins", "seed",       "epochs",        "batch_size",
        "learning_rate", "k",        "split",         "out_dir"};
    for (const auto &[key, value] : j.items()) {
        if (!known.contains(key)) {
            throw std::invalid_argument("config: unknown key: " + key);
        }
    }
    PipelineConfig config;
    if (j.contains("inputs")) {
        for (const nlohmann::json &item : j.at("inputs")) {
            InputSpec input;
            input.path = item.at("path").get<std::string>();
            input.format = input_format_from_string(
                item.value("format", std::string("pcap")));
            input.name = item.value("name", std::string());
            config.inputs.push_back(std::move(input));
        }
    }
    if (j.contains("degree_mode")) {
        const auto mode = j.at("degree_mode").get<std::string>();
        if (mode == "target_ip") {
            config.degree_mode = DegreeMode::target_ip;
        } else if (mode == "dst_mac") {
            config.degree_mode = DegreeMode::dst_mac;
        } else {
            throw std::invalid_argument("config: unknown degree_mode: " + mode);
        }
    }
    if (j.contains("opcodes")) {
        config.opcodes = j.at("opcodes").get<std::vector<std::uint16_t>>();
    }
    config.min_threshold = j.value("min_threshold", config.min_threshold);
    config.window_bins = j.value("window_bins", config.window_bins);
    config.seed = j.value("seed", config.seed);
    config.epochs = j.value("epochs", config.epochs);
    config.batch_size = j.value("batch_size", config.batch_size);
    config.learning_rate = j.value("learning_rate", config.learning_rate);
    config.k = j.value("k", config.k);
    if (j.contains("split")) {
        const nlohmann::json &split = j.at("split");
        if (split.is_number_integer()) {
            config.split = SplitSelector::at(split.get<int>());
        } else if (split.get<std::string>() == "auto") {
            config.split = SplitSelector::auto_select();
        } else if (split.get<std::string>() == "none") {
            config.split = SplitSelector::no_split();
        } else {
            throw std::invalid_argument("config: bad split selector");
        }
    }
    if (j.contains("out_dir")) {
        config.out_dir = j.at("out_dir").get<std::string>();
    }
    for (std::size_t i = 0; i < config.inputs.size(); ++i) {
        if (config.inputs[i].name.empty()) {
            config.inputs[i].name = std::to_string(i);
        }
    }
    return config;
}

struct PipelineEvent {
    std::string event_id;
    std::string source;
    SuspiciousEvent event;
};

struct SourceDetection {
    std::string name;
    IngestStats stats;
    std::size_t total_hosts = 0;
    std::vector<PipelineEvent> events;
};

inline std::vector<ArpObservation>
ingest_input(const InputSpec &input, IngestStats &stats) {
    std::ifstream in(input.path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open input: " + input.path.string());
    }
    IngestResult result = input.format == InputFormat::pcap
                              ? parse_pcap(in)
                              : parse_records(in);
    if (result.error != IngestError::none) {
        throw std::runtime_error(input.path.string() + ": " +
                                 to_string(result.error));
    }
    stats = result.stats;
    return std::move(result.observations);
}

/// Bins one source's observations and runs the detector per host.
/// Events are ordered host-major (ascending MAC), then by onset.
inline SourceDetection detect_source(std::span<const ArpObservation> all,
                                     const std::string &name,
                                     const IngestStats &stats,
                                     const PipelineConfig &config) {
    std::vector<ArpObservation> kept;
    kept.reserve(all.size());
    for (const ArpObservation &obs : all) {
        if (std::find(config.opcodes.begin(), config.opcodes.end(),
                      obs.opcode) != config.opcodes.end()) {
            kept.push_back(obs);
        }
    }
    SourceDetection source;
    source.name = name;
    source.stats = stats;
    const auto sequences = bin_observations(kept, config.degree_mode);
    source.total_hosts = sequences.size();
    for (const auto &[mac, seq] : sequences) {
        const auto [threshold, events] = detect_host_events(
            seq, config.min_threshold, config.window_bins);
        for (const SuspiciousEvent &event : events) {
            PipelineEvent pe;
            pe.source = name;
            pe.event = event;
            pe.event_id = default_event_id(name, event);
            source.events.push_back(std::move(pe));
        }
    }
    return source;
}

struct PipelineSummary {
    std::vector<SourceDetection> sources; // events kept for counting only
    std::size_t total_hosts = 0;
    std::size_t suspicious_hosts = 0;
    std::size_t total_events = 0;
    double mean_peak_count = 0.0;
    double mean_peak_degree = 0.0;
};

inline PipelineSummary summarize(std::vector<SourceDetection> sources) {
    PipelineSummary summary;
    double peak_count_sum = 0.0;
    double peak_degree_sum = 0.0;
    for (SourceDetection &source : sources) {
        summary.total_hosts += source.total_hosts;
        std::set<MacAddr> suspicious;
        for (const PipelineEvent &pe : source.events) {
            suspicious.insert(pe.event.host_mac);
            std::uint32_t peak_count = 0;
            std::uint32_t peak_degree = 0;
            for (const HostBin &bin : pe.event.bins) {
                peak_count = std::max(peak_count, bin.count);
                peak_degree = std::max(peak_degree, bin.degree);
            }
            peak_count_sum += peak_count;
            peak_degree_sum += peak_degree;
        }
        summary.suspicious_hosts += suspicious.size();
        summary.total_events += source.events.size();
    }
    if (summary.total_events > 0) {
        const auto n = static_cast<double>(summary.total_events);
        summary.mean_peak_count = peak_count_sum / n;
        summary.mean_peak_degree = peak_degree_sum / n;
    }
    summary.sources = std::move(sources);
    return summary;
}

inline nlohmann::json summary_to_json(const PipelineSummary &summary) {
    nlohmann::json sources = nlohmann::json::array();
    for (const SourceDetection &source : summary.sources) {
        std::set<MacAddr> suspicious;
        for (const PipelineEvent &pe : source.events) {
            suspicious.insert(pe.event.host_mac);
        }
        sources.push_back(
            {{"name", source.name},
             {"total_hosts", source.total_hosts},
             {"suspicious_hosts", suspicious.size()},
             {"events", source.events.size()},
             {"ingest",
              {{"packets_total", source.stats.packets_total},
               {"arp_packets", source.stats.arp_packets},
               {"dropped_malformed", source.stats.dropped_malformed},
               {"dropped_non_arp", source.stats.dropped_non_arp}}}});
    }
    return nlohmann::json{
        {"format", "arpclust-summary"},
        {"version", 1},
        {"sources", std::move(sources)},
        {"totals",
         {{"total_hosts", summary.total_hosts},
          {"suspicious_hosts", summary.suspicious_hosts},
          {"events", summary.total_events}}},
        {"mean_peak_count", summary.mean_peak_count},
        {"mean_peak_degree", summary.mean_peak_degree}};
}

inline nlohmann::json
events_to_json(std::span<const SourceDetection> sources, int window_bins) {
    nlohmann::json events = nlohmann::json::array();
    for (const SourceDetection &source : sources) {
        for (const PipelineEvent &pe : source.events) {
            nlohmann::json e = event_to_json(pe.event);
            e["event_id"] = pe.event_id;
            e["source"] = pe.source;
            events.push_back(std::move(e));
        }
    }
    return nlohmann::json{{"format", "arpclust-events"},
                          {"version", 1},
                          {"window_bins", window_bins},
                          {"events", std::move(events)}};
}

struct EventsFile {
    int window_bins = kDefaultWindowBins;
    std::vector<PipelineEvent> events;
};

inline EventsFile parse_events_json(const nlohmann::json &j) {
    if (j.value("format", "") != "arpclust-events") {
        throw std::runtime_error("events json: unrecognized format");
    }
    EventsFile file;
    file.window_bins = j.at("window_bins").get<int>();
    for (const nlohmann::json &e : j.at("events")) {
        PipelineEvent pe;
        pe.event_id = e.at("event_id").get<std::string>();
        pe.source = e.value("source", std::string());
        const auto mac = parse_mac(e.at("host").get<std::string>());
        if (!mac) {
            throw std::runtime_error("events json: bad host MAC");
        }
        pe.event.host_mac = *mac;
        pe.event.onset_bin = e.at("onset_bin").get<std::int64_t>();
        std::int64_t index = pe.event.onset_bin;
        for (const nlohmann::json &bin : e.at("bins")) {
            HostBin hb;
            hb.bin_index = index++;
            hb.count = bin.at(0).get<std::uint32_t>();
            hb.degree = bin.at(1).get<std::uint32_t>();
            pe.event.bins.push_back(hb);
        }
        if (static_cast<int>(pe.event.bins.size()) != file.window_bins) {
            throw std::runtime_error("events json: bin count mismatch");
        }
        file.events.push_back(std::move(pe));
    }
    return file;
}

inline std::vector<FeatureVector> featurize_events(const EventsFile &file) {
    std::vector<FeatureVector> features;
    features.reserve(file.events.size());
    for (const PipelineEvent &pe : file.events) {
        features.push_back(build_feature(pe.event, pe.event_id));
    }
    return features;
}

namespace detail {

/// Plain k-means presented in the ClusterTree shape: k letter-labeled
/// leaves, no split.
inline ClusterTree single_level_tree(std::span<const LatentPoint> points,
                                     int k, std::uint64_t seed,
                                     KmeansOptions opts = {}) {
    ClusterTree tree;
    tree.top = kmeans(points, k, seed, opts);
    const std::map<int, std::string> reps = representatives(tree.top, points);
    const double total = static_cast<double>(points.size());
    tree.leaf_labels.assign(points.size(), "");
    for (int c = 0; c < k; ++c) {
        ClusterLeaf leaf;
        leaf.label = std::string{static_cast<char>('A' + c)};
        leaf.top_index = c;
        leaf.count = static_cast<std::size_t>(
            std::count(tree.top.labels.begin(), tree.top.labels.end(), c));
        leaf.percent = static_cast<double>(leaf.count) / total;
        if (const auto it = reps.find(c); it != reps.end()) {
            leaf.representative = it->second;
        }
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (tree.top.labels[i] == c) {
                tree.leaf_labels[i] = leaf.label;
            }
        }
        tree.leaves.push_back(std::move(leaf));
    }
    return tree;
}

} // namespace detail

/// Clustering entry point shared by `run` and the `cluster`
/// sub-command: progressive when a split is requested, single-level
/// otherwise.
inline ClusterTree cluster_latents(std::span<const LatentPoint> points,
                                   const SplitSelector &split, int k,
                                   std::uint64_t seed,
                                   KmeansOptions opts = {}) {
    if (split.mode == SplitSelector::Mode::none) {
        return detail::single_level_tree(points, k, seed, opts);
    }
    if (k != kTopClusters) {
        throw std::invalid_argument("cluster: progressive split requires k = 5");
    }
    return progressive_cluster(points, split, seed, opts);
}

inline void write_json_file(const std::filesystem::path &path,
                            const nlohmann::json &j, int indent = -1) {
    detail::write_file_atomic(path, j.dump(indent) + "\n");
}

/// Runs the whole pipeline. Returns 0 on success and 2 when no events
/// were detected (events.json and summary.json still written); all
/// other failures throw.
inline int run(const PipelineConfig &config) {
    validate(config);
    std::filesystem::create_directories(config.out_dir);

    std::vector<SourceDetection> sources;
    sources.reserve(config.inputs.size());
    for (const InputSpec &input : config.inputs) {
        IngestStats stats;
        const std::vector<ArpObservation> observations =
            ingest_input(input, stats);
        sources.push_back(
            detect_source(observations, input.name, stats, config));
    }

    const nlohmann::json events_json =
        events_to_json(sources, config.window_bins);
    write_json_file(config.out_dir / "events.json", events_json);

    PipelineSummary summary = summarize(std::move(sources));
    if (summary.total_events == 0) {
        write_json_file(config.out_dir / "summary.json",
                        summary_to_json(summary), 2);
        return 2;
    }

    // Each stage consumes the artifact text it just wrote, so `run`
    // and the stage-by-stage CLI path see bit-for-bit identical inputs.
    const EventsFile events = parse_events_json(events_json);
    const std::vector<FeatureVector> features_built = featurize_events(events);
    const std::string features_csv = write_features_csv(
        features_built, static_cast<std::size_t>(2 * config.window_bins));
    detail::write_file_atomic(config.out_dir / "features.csv", features_csv);

    const std::vector<FeatureVector> features =
        parse_features_csv(features_csv);
    TrainOptions train_opts;
    train_opts.seed = config.seed;
    train_opts.epochs = config.epochs;
    train_opts.batch_size = config.batch_size;
    train_opts.learning_rate = config.learning_rate;
    const auto [params, report] = train(features, train_opts);
    write_json_file(config.out_dir / "model.json",
                    params_to_json(params, report.seed_used));
    detail::write_file_atomic(config.out_dir / "train_report.csv",
                              write_train_report_csv(report));

    const std::string latents_csv =
        write_latents_csv(encode_all(params, features));
    detail::write_file_atomic(config.out_dir / "latents.csv", latents_csv);

    const std::vector<LatentPoint> latents = parse_latents_csv(latents_csv);
    const ClusterTree tree =
        cluster_latents(latents, config.split, config.k, config.seed);
    write_json_file(config.out_dir / "clusters.json",
                    cluster_tree_to_json(tree), 2);
    detail::write_file_atomic(config.out_dir / "assignments.csv",
                              write_assignments_csv(latents, tree));

    write_json_file(config.out_dir / "summary.json", summary_to_json(summary),
                    2);
    return 0;
}

} // namespace arpclust
