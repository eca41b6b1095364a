#pragma once
// K-means over the 3-D latent points plus one level of progressive
// sub-clustering. Lloyd iterations optimize the squared-Euclidean
// objective; the reported inertia is the unsquared distance sum.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arpclust/autoencoder.hpp"
#include "arpclust/detail/rng.hpp"

namespace arpclust {

using Point3 = std::array<double, 3>;

inline double dist2(const Point3 &a, const Point3 &b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

struct ClusterModel {
    int k = 0;
    std::vector<Point3> centroids;
    std::vector<int> labels;                 // parallel to the input points
    std::map<std::string, int> assignments;  // event_id -> cluster index
    double inertia = 0.0;                    // sum of unsquared distances
    double squared_objective = 0.0;
    std::vector<double> objective_trace;     // squared objective per iteration
};

struct KmeansOptions {
    int restarts = 10;
    int max_iterations = 300;
};

namespace detail {

inline std::size_t count_distinct(std::span<const LatentPoint> points) {
    std::set<Point3> seen;
    for (const LatentPoint &p : points) {
        seen.insert(p.z);
    }
    return seen.size();
}

/// k-means++: first centroid uniform, then each next drawn with
/// probability proportional to squared distance from the nearest chosen
/// centroid. The prefix-sum walk runs in index order.
inline std::vector<Point3> kmeanspp_seed(std::span<const LatentPoint> points,
                                         int k, std::mt19937_64 &rng) {
    const std::size_t n = points.size();
    std::vector<Point3> centroids;
    centroids.reserve(static_cast<std::size_t>(k));
    centroids.push_back(points[uniform_below(rng, n)].z);
    std::vector<double> d2(n);
    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = dist2(points[i].z, centroids[0]);
            for (std::size_t c = 1; c < centroids.size(); ++c) {
                best = std::min(best, dist2(points[i].z, centroids[c]));
            }
            d2[i] = best;
            total += best;
        }
        const double r = uniform_unit(rng) * total;
        double cum = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] == 0.0) {
                continue;
            }
            cum += d2[i];
            pick = i;
            if (cum > r) {
                break;
            }
        }
        // pick == n cannot happen while distinct points remain, which the
        // caller's precondition guarantees.
        centroids.push_back(points[pick].z);
    }
    return centroids;
}

inline void assign_nearest(std::span<const LatentPoint> points,
                           std::span<const Point3> centroids,
                           std::vector<int> &labels) {
    for (std::size_t i = 0; i < points.size(); ++i) {
        int best = 0;
        double best_d = dist2(points[i].z, centroids[0]);
        for (std::size_t c = 1; c < centroids.size(); ++c) {
            const double d = dist2(points[i].z, centroids[c]);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        labels[i] = best;
    }
}

/// Relocates each empty cluster's centroid onto the point currently
/// farthest from its own centroid (drawn from clusters with more than
/// one member, so no cluster is emptied in the process). Moving the
/// centroid onto the point drops that point's distance to zero, so the
/// objective never increases.
inline void fix_empty_clusters(std::span<const LatentPoint> points,
                               std::vector<Point3> &centroids,
                               std::vector<int> &labels) {
    const int k = static_cast<int>(centroids.size());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (const int label : labels) {
        counts[static_cast<std::size_t>(label)] += 1;
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] != 0) {
            continue;
        }
        double worst = -1.0;
        std::size_t worst_i = points.size();
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto owner = static_cast<std::size_t>(labels[i]);
            if (counts[owner] <= 1) {
                continue;
            }
            const double d = dist2(points[i].z, centroids[owner]);
            if (d > worst) {
                worst = d;
                worst_i = i;
            }
        }
        if (worst_i == points.size()) {
            continue; // every other cluster is a singleton; leave empty
        }
        counts[static_cast<std::size_t>(labels[worst_i])] -= 1;
        labels[worst_i] = c;
        counts[static_cast<std::size_t>(c)] = 1;
        centroids[static_cast<std::size_t>(c)] = points[worst_i].z;
    }
}

inline double squared_objective_of(std::span<const LatentPoint> points,
                                   std::span<const Point3> centroids,
                                   std::span<const int> labels) {
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        sum += dist2(points[i].z,
                     centroids[static_cast<std::size_t>(labels[i])]);
    }
    return sum;
}

/// Coordinate means in index order, so the sums are reproducible.
inline void recompute_centroids(std::span<const LatentPoint> points,
                                std::span<const int> labels,
                                std::vector<Point3> &centroids) {
    std::vector<Point3> sums(centroids.size(), Point3{0.0, 0.0, 0.0});
    std::vector<std::size_t> counts(centroids.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        sums[c][0] += points[i].z[0];
        sums[c][1] += points[i].z[1];
        sums[c][2] += points[i].z[2];
        counts[c] += 1;
    }
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        if (counts[c] == 0) {
            continue;
        }
        const double inv = 1.0 / static_cast<double>(counts[c]);
        centroids[c] = {sums[c][0] * inv, sums[c][1] * inv, sums[c][2] * inv};
    }
}

} // namespace detail

/// k-means++ seeding followed by Lloyd iterations, repeated over
/// `restarts` independent seedings; the restart with the lowest final
/// squared objective wins (earliest on ties).
inline ClusterModel kmeans(std::span<const LatentPoint> points, int k,
                           std::uint64_t seed, KmeansOptions opts = {}) {
    if (k < 1) {
        throw std::invalid_argument("kmeans: k must be at least 1");
    }
    if (opts.restarts < 1 || opts.max_iterations < 1) {
        throw std::invalid_argument("kmeans: bad options");
    }
    if (detail::count_distinct(points) < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("kmeans: fewer distinct points than k");
    }

    ClusterModel best;
    bool have_best = false;
    for (int restart = 0; restart < opts.restarts; ++restart) {
        std::mt19937_64 rng =
            detail::seeded_engine(seed, static_cast<std::uint64_t>(restart));
        std::vector<Point3> centroids = detail::kmeanspp_seed(points, k, rng);
        std::vector<int> labels(points.size(), 0);
        std::vector<int> prev_labels;
        std::vector<double> trace;
        for (int iter = 0; iter < opts.max_iterations; ++iter) {
            detail::assign_nearest(points, centroids, labels);
            detail::fix_empty_clusters(points, centroids, labels);
            trace.push_back(
                detail::squared_objective_of(points, centroids, labels));
            if (labels == prev_labels) {
                break;
            }
            prev_labels = labels;
            detail::recompute_centroids(points, labels, centroids);
        }
        const double objective = trace.back();
        if (!have_best || objective < best.squared_objective) {
            have_best = true;
            best.k = k;
            best.centroids = std::move(centroids);
            best.labels = std::move(labels);
            best.squared_objective = objective;
            best.objective_trace = std::move(trace);
        }
    }

    best.inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        best.inertia += std::sqrt(dist2(
            points[i].z,
            best.centroids[static_cast<std::size_t>(best.labels[i])]));
    }
    best.assignments.clear();
    for (std::size_t i = 0; i < points.size(); ++i) {
        best.assignments[points[i].event_id] = best.labels[i];
    }
    return best;
}

/// Per non-empty cluster, the member event nearest the centroid; on
/// distance ties the lexicographically smaller event_id wins.
inline std::map<int, std::string>
representatives(const ClusterModel &model,
                std::span<const LatentPoint> points) {
    std::map<int, std::string> reps;
    std::map<int, double> best_d;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int c = model.labels[i];
        const double d =
            dist2(points[i].z, model.centroids[static_cast<std::size_t>(c)]);
        const auto it = reps.find(c);
        if (it == reps.end() || d < best_d[c] ||
            (d == best_d[c] && points[i].event_id < it->second)) {
            reps[c] = points[i].event_id;
            best_d[c] = d;
        }
    }
    return reps;
}

struct SplitSelector {
    enum class Mode { automatic, index, none };
    Mode mode = Mode::automatic;
    int index = -1;

    static SplitSelector auto_select() { return {Mode::automatic, -1}; }
    static SplitSelector at(int i) { return {Mode::index, i}; }
    static SplitSelector no_split() { return {Mode::none, -1}; }
};

struct ClusterLeaf {
    std::string label;        // A..E, or letter+digit for sub-clusters
    int top_index = 0;
    int sub_index = -1;       // -1 for unsplit leaves
    std::size_t count = 0;
    double percent = 0.0;     // fraction of all points
    std::string representative;
};

struct ClusterTree {
    ClusterModel top;
    int split_cluster = -1;
    std::optional<ClusterModel> sub;
    std::vector<ClusterLeaf> leaves;
    std::vector<std::string> leaf_labels; // parallel to the input points
    std::string warning;
};

constexpr int kTopClusters = 5;
constexpr int kSubClusters = 5;

/// Mean unsquared distance of members to their centroid; the `auto`
/// split picks the cluster where this is largest.
inline double cluster_dispersion(const ClusterModel &model,
                                 std::span<const LatentPoint> points,
                                 int cluster) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (model.labels[i] != cluster) {
            continue;
        }
        sum += std::sqrt(dist2(
            points[i].z, model.centroids[static_cast<std::size_t>(cluster)]));
        count += 1;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

/// Top-level k-means with k=5, then one optional re-clustering of the
/// selected cluster with k=5 (seeded with seed+1). Leaves keep the
/// top-level order, with the split position expanded in place.
inline ClusterTree progressive_cluster(std::span<const LatentPoint> points,
                                       SplitSelector selector,
                                       std::uint64_t seed,
                                       KmeansOptions opts = {}) {
    if (detail::count_distinct(points) < 10) {
        throw std::invalid_argument(
            "progressive_cluster: fewer than 10 distinct points");
    }
    ClusterTree tree;
    tree.top = kmeans(points, kTopClusters, seed, opts);

    int split = -1;
    switch (selector.mode) {
    case SplitSelector::Mode::automatic: {
        double best = -1.0;
        for (int c = 0; c < kTopClusters; ++c) {
            const double d = cluster_dispersion(tree.top, points, c);
            if (d > best) {
                best = d;
                split = c;
            }
        }
        break;
    }
    case SplitSelector::Mode::index:
        if (selector.index < 0 || selector.index >= kTopClusters) {
            throw std::invalid_argument(
                "progressive_cluster: split index out of range");
        }
        split = selector.index;
        break;
    case SplitSelector::Mode::none:
        break;
    }

    std::vector<LatentPoint> subset;
    std::vector<std::size_t> subset_index;
    if (split >= 0) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (tree.top.labels[i] == split) {
                subset.push_back(points[i]);
                subset_index.push_back(i);
            }
        }
        if (detail::count_distinct(subset) <
            static_cast<std::size_t>(kSubClusters)) {
            std::ostringstream msg;
            msg << "cluster " << split << " has fewer than " << kSubClusters
                << " distinct points; tree left unsplit";
            tree.warning = msg.str();
            split = -1;
        }
    }
    tree.split_cluster = split;
    if (split >= 0) {
        tree.sub = kmeans(subset, kSubClusters, seed + 1, opts);
    }

    const double total = static_cast<double>(points.size());
    const std::map<int, std::string> top_reps = representatives(tree.top, points);
    std::map<int, std::string> sub_reps;
    if (tree.sub) {
        sub_reps = representatives(*tree.sub, subset);
    }

    tree.leaf_labels.assign(points.size(), "");
    for (int c = 0; c < kTopClusters; ++c) {
        const char letter = static_cast<char>('A' + c);
        if (c == split) {
            std::vector<std::size_t> sub_counts(kSubClusters, 0);
            for (std::size_t s = 0; s < subset.size(); ++s) {
                const int sc = tree.sub->labels[s];
                sub_counts[static_cast<std::size_t>(sc)] += 1;
                tree.leaf_labels[subset_index[s]] =
                    std::string{letter} + std::to_string(sc + 1);
            }
            for (int sc = 0; sc < kSubClusters; ++sc) {
                ClusterLeaf leaf;
                leaf.label = std::string{letter} + std::to_string(sc + 1);
                leaf.top_index = c;
                leaf.sub_index = sc;
                leaf.count = sub_counts[static_cast<std::size_t>(sc)];
                leaf.percent = static_cast<double>(leaf.count) / total;
                if (const auto it = sub_reps.find(sc); it != sub_reps.end()) {
                    leaf.representative = it->second;
                }
                tree.leaves.push_back(std::move(leaf));
            }
        } else {
            ClusterLeaf leaf;
            leaf.label = std::string{letter};
            leaf.top_index = c;
            leaf.count = static_cast<std::size_t>(std::count(
                tree.top.labels.begin(), tree.top.labels.end(), c));
            leaf.percent = static_cast<double>(leaf.count) / total;
            if (const auto it = top_reps.find(c); it != top_reps.end()) {
                leaf.representative = it->second;
            }
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (tree.top.labels[i] == c) {
                    tree.leaf_labels[i] = leaf.label;
                }
            }
            tree.leaves.push_back(std::move(leaf));
        }
    }
    return tree;
}

namespace detail {

inline nlohmann::json centroids_json(const ClusterModel &model) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Point3 &c : model.centroids) {
        arr.push_back({c[0], c[1], c[2]});
    }
    return arr;
}

} // namespace detail

inline nlohmann::json cluster_tree_to_json(const ClusterTree &tree) {
    nlohmann::json top_clusters = nlohmann::json::array();
    for (const ClusterLeaf &leaf : tree.leaves) {
        if (leaf.top_index == tree.split_cluster) {
            continue;
        }
        top_clusters.push_back({{"index", leaf.top_index},
                                {"label", leaf.label},
                                {"count", leaf.count},
                                {"percent", leaf.percent},
                                {"representative_event", leaf.representative}});
    }
    nlohmann::json j{{"format", "arpclust-clusters"},
                     {"version", 1},
                     {"k", tree.top.k},
                     {"inertia", tree.top.inertia},
                     {"squared_objective", tree.top.squared_objective},
                     {"centroids", detail::centroids_json(tree.top)},
                     {"clusters", std::move(top_clusters)}};
    if (tree.split_cluster >= 0) {
        j["split_cluster"] = tree.split_cluster;
        nlohmann::json sub_clusters = nlohmann::json::array();
        for (const ClusterLeaf &leaf : tree.leaves) {
            if (leaf.top_index != tree.split_cluster) {
                continue;
            }
            sub_clusters.push_back(
                {{"index", leaf.sub_index},
                 {"label", leaf.label},
                 {"count", leaf.count},
                 {"percent", leaf.percent},
                 {"representative_event", leaf.representative}});
        }
        j["sub"] = {{"k", tree.sub->k},
                    {"inertia", tree.sub->inertia},
                    {"squared_objective", tree.sub->squared_objective},
                    {"centroids", detail::centroids_json(*tree.sub)},
                    {"clusters", std::move(sub_clusters)}};
    } else {
        j["split_cluster"] = nullptr;
    }
    if (!tree.warning.empty()) {
        j["warning"] = tree.warning;
    }
    return j;
}

inline std::string
write_assignments_csv(std::span<const LatentPoint> points,
                      const ClusterTree &tree) {
    std::ostringstream out;
    out << "event_id,leaf_label\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        out << points[i].event_id << "," << tree.leaf_labels[i] << "\n";
    }
    return out.str();
}

} // namespace arpclust
