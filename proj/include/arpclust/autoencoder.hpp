#pragma once
// Shallow autoencoder (input -> hidden -> latent -> input) trained with
// binary cross-entropy and Adam. ReLU on hidden and latent layers keeps
// the latent points in the nonnegative octant; sigmoid on the output
// matches the [0, 1] range of normalized feature vectors.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arpclust/detail/fsio.hpp"
#include "arpclust/detail/rng.hpp"
#include "arpclust/feature_builder.hpp"

namespace arpclust {

struct AutoencoderDims {
    std::size_t input = 120;
    std::size_t hidden = 50;
    std::size_t latent = 3;

    bool operator==(const AutoencoderDims &) const = default;

    std::size_t parameter_count() const {
        return hidden * input + hidden + latent * hidden + latent +
               input * latent + input;
    }
};

/// All parameters live in one flat buffer laid out [w1|b1|w2|b2|w3|b3];
/// the same type doubles as a gradient accumulator.
struct AutoencoderParams {
    AutoencoderDims dims;
    std::vector<double> data;

    explicit AutoencoderParams(AutoencoderDims d = {})
        : dims(d), data(d.parameter_count(), 0.0) {}

    // Weight matrices are row-major: w1 is hidden x input, w2 is
    // latent x hidden, w3 is input x latent.
    std::span<double> w1() { return {data.data(), dims.hidden * dims.input}; }
    std::span<double> b1() {
        return {data.data() + dims.hidden * dims.input, dims.hidden};
    }
    std::span<double> w2() {
        return {data.data() + off_w2(), dims.latent * dims.hidden};
    }
    std::span<double> b2() {
        return {data.data() + off_w2() + dims.latent * dims.hidden,
                dims.latent};
    }
    std::span<double> w3() {
        return {data.data() + off_w3(), dims.input * dims.latent};
    }
    std::span<double> b3() {
        return {data.data() + off_w3() + dims.input * dims.latent,
                dims.input};
    }
    std::span<const double> w1() const {
        return {data.data(), dims.hidden * dims.input};
    }
    std::span<const double> b1() const {
        return {data.data() + dims.hidden * dims.input, dims.hidden};
    }
    std::span<const double> w2() const {
        return {data.data() + off_w2(), dims.latent * dims.hidden};
    }
    std::span<const double> b2() const {
        return {data.data() + off_w2() + dims.latent * dims.hidden,
                dims.latent};
    }
    std::span<const double> w3() const {
        return {data.data() + off_w3(), dims.input * dims.latent};
    }
    std::span<const double> b3() const {
        return {data.data() + off_w3() + dims.input * dims.latent,
                dims.input};
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

  private:
    std::size_t off_w2() const {
        return dims.hidden * dims.input + dims.hidden;
    }
    std::size_t off_w3() const {
        return off_w2() + dims.latent * dims.hidden + dims.latent;
    }
};

/// Glorot-uniform weights, zero biases. Weights are drawn in layout
/// order from a single engine so the result is a pure function of
/// (seed, dims).
inline AutoencoderParams init_params(std::uint64_t seed,
                                     AutoencoderDims dims = {}) {
    AutoencoderParams params(dims);
    std::mt19937_64 rng(seed);
    const auto fill = [&rng](std::span<double> w, std::size_t fan_in,
                             std::size_t fan_out) {
        const double bound =
            std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double &v : w) {
            v = (2.0 * detail::uniform_unit(rng) - 1.0) * bound;
        }
    };
    fill(params.w1(), dims.input, dims.hidden);
    fill(params.w2(), dims.hidden, dims.latent);
    fill(params.w3(), dims.latent, dims.input);
    return params;
}

struct Activations {
    std::vector<double> h;    // hidden, post-ReLU
    std::vector<double> z;    // latent, post-ReLU
    std::vector<double> xhat; // reconstruction, post-sigmoid
};

inline Activations forward(const AutoencoderParams &params,
                           std::span<const double> x) {
    const AutoencoderDims &d = params.dims;
    if (x.size() != d.input) {
        throw std::invalid_argument("forward: input size mismatch");
    }
    Activations act;
    act.h.resize(d.hidden);
    act.z.resize(d.latent);
    act.xhat.resize(d.input);
    const auto w1 = params.w1(), b1 = params.b1(), w2 = params.w2(),
               b2 = params.b2(), w3 = params.w3(), b3 = params.b3();
    for (std::size_t j = 0; j < d.hidden; ++j) {
        double u = b1[j];
        const double *row = w1.data() + j * d.input;
        for (std::size_t i = 0; i < d.input; ++i) {
            u += row[i] * x[i];
        }
        act.h[j] = u > 0.0 ? u : 0.0;
    }
    for (std::size_t k = 0; k < d.latent; ++k) {
        double u = b2[k];
        const double *row = w2.data() + k * d.hidden;
        for (std::size_t j = 0; j < d.hidden; ++j) {
            u += row[j] * act.h[j];
        }
        act.z[k] = u > 0.0 ? u : 0.0;
    }
    for (std::size_t o = 0; o < d.input; ++o) {
        double u = b3[o];
        const double *row = w3.data() + o * d.latent;
        for (std::size_t k = 0; k < d.latent; ++k) {
            u += row[k] * act.z[k];
        }
        act.xhat[o] = 1.0 / (1.0 + std::exp(-u));
    }
    return act;
}

/// Mean binary cross-entropy over the vector. Predictions are clamped
/// away from {0, 1} only to keep the logs finite; at any realistic
/// parameter scale the clamp never engages.
inline double bce_loss(std::span<const double> x,
                       std::span<const double> xhat) {
    if (x.size() != xhat.size() || x.empty()) {
        throw std::invalid_argument("bce_loss: size mismatch");
    }
    constexpr double kEps = 1e-15;
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p = std::clamp(xhat[i], kEps, 1.0 - kEps);
        sum -= x[i] * std::log(p) + (1.0 - x[i]) * std::log(1.0 - p);
    }
    return sum / static_cast<double>(x.size());
}

/// Accumulates the gradient of bce_loss(x, forward(params, x).xhat)
/// with respect to every parameter into `grad` (same layout as the
/// params). Callers average over a batch by scaling afterwards.
inline void backward(const AutoencoderParams &params,
                     std::span<const double> x, const Activations &act,
                     AutoencoderParams &grad) {
    const AutoencoderDims &d = params.dims;
    if (grad.dims != d) {
        throw std::invalid_argument("backward: gradient dims mismatch");
    }
    const auto w2 = params.w2(), w3 = params.w3();
    auto gw1 = grad.w1(), gb1 = grad.b1(), gw2 = grad.w2(), gb2 = grad.b2(),
         gw3 = grad.w3(), gb3 = grad.b3();

    // Sigmoid + BCE collapse: dL/du_o = (xhat_o - x_o) / input.
    std::vector<double> du(d.input);
    for (std::size_t o = 0; o < d.input; ++o) {
        du[o] = (act.xhat[o] - x[o]) / static_cast<double>(d.input);
    }
    std::vector<double> dz(d.latent, 0.0);
    for (std::size_t o = 0; o < d.input; ++o) {
        gb3[o] += du[o];
        double *row = gw3.data() + o * d.latent;
        const double *wrow = w3.data() + o * d.latent;
        for (std::size_t k = 0; k < d.latent; ++k) {
            row[k] += du[o] * act.z[k];
            dz[k] += du[o] * wrow[k];
        }
    }
    for (std::size_t k = 0; k < d.latent; ++k) {
        if (act.z[k] <= 0.0) {
            dz[k] = 0.0;
        }
    }
    std::vector<double> dh(d.hidden, 0.0);
    for (std::size_t k = 0; k < d.latent; ++k) {
        gb2[k] += dz[k];
        double *row = gw2.data() + k * d.hidden;
        const double *wrow = w2.data() + k * d.hidden;
        for (std::size_t j = 0; j < d.hidden; ++j) {
            row[j] += dz[k] * act.h[j];
            dh[j] += dz[k] * wrow[j];
        }
    }
    for (std::size_t j = 0; j < d.hidden; ++j) {
        if (act.h[j] <= 0.0) {
            dh[j] = 0.0;
        }
        gb1[j] += dh[j];
        double *row = gw1.data() + j * d.input;
        for (std::size_t i = 0; i < d.input; ++i) {
            row[i] += dh[j] * x[i];
        }
    }
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

inline void adam_step(AutoencoderParams &params, const AutoencoderParams &grad,
                      AdamState &state, double learning_rate) {
    if (state.m.size() != params.data.size()) {
        throw std::invalid_argument("adam_step: state size mismatch");
    }
    state.step += 1;
    const double bc1 =
        1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
    const double bc2 =
        1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.data.size(); ++i) {
        const double g = grad.data[i];
        state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
        state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params.data[i] -= learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
    }
}

struct TrainOptions {
    std::uint64_t seed = 1;
    int epochs = 40;
    int batch_size = 16;
    double learning_rate = 1e-4;
    int folds = 5;
    std::size_t hidden = 50;
    std::size_t latent = 3;
};

struct FoldEpoch {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainReport {
    std::vector<std::vector<FoldEpoch>> folds; // [fold][epoch]
    std::vector<double> final_train;           // [epoch]
    bool restarted = false;
    std::uint64_t seed_used = 0;
};

namespace detail {

/// One full pass over `order` in batches: per batch, loss and gradient
/// at the current parameters, then one Adam update. Returns the
/// sample-weighted mean of the pre-update batch losses.
inline double train_epoch(AutoencoderParams &params, AdamState &adam,
                          std::span<const FeatureVector> features,
                          std::span<const std::size_t> order,
                          const TrainOptions &opts, AutoencoderParams &grad) {
    double loss_sum = 0.0;
    const std::size_t batch = static_cast<std::size_t>(opts.batch_size);
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
        const std::size_t end = std::min(begin + batch, order.size());
        const double n = static_cast<double>(end - begin);
        grad.zero();
        double batch_loss = 0.0;
        for (std::size_t p = begin; p < end; ++p) {
            const std::vector<double> &x = features[order[p]].values;
            const Activations act = forward(params, x);
            batch_loss += bce_loss(x, act.xhat);
            backward(params, x, act, grad);
        }
        for (double &g : grad.data) {
            g /= n;
        }
        loss_sum += batch_loss;
        adam_step(params, grad, adam, opts.learning_rate);
    }
    return loss_sum / static_cast<double>(order.size());
}

inline double mean_loss(const AutoencoderParams &params,
                        std::span<const FeatureVector> features,
                        std::span<const std::size_t> indices) {
    double sum = 0.0;
    for (const std::size_t i : indices) {
        const std::vector<double> &x = features[i].values;
        sum += bce_loss(x, forward(params, x).xhat);
    }
    return sum / static_cast<double>(indices.size());
}

inline std::pair<AutoencoderParams, TrainReport>
train_once(std::span<const FeatureVector> features, const TrainOptions &opts,
           std::uint64_t seed) {
    const AutoencoderDims dims{features[0].values.size(), opts.hidden,
                               opts.latent};
    TrainReport report;
    report.seed_used = seed;
    AutoencoderParams grad(dims);

    const std::size_t n = features.size();
    std::vector<std::size_t> shuffled(n);
    std::iota(shuffled.begin(), shuffled.end(), std::size_t{0});
    {
        std::mt19937_64 rng = seeded_engine(seed, 0);
        shuffle(shuffled, rng);
    }

    const std::size_t folds = static_cast<std::size_t>(opts.folds);
    report.folds.resize(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t lo = f * n / folds;
        const std::size_t hi = (f + 1) * n / folds;
        std::vector<std::size_t> val(shuffled.begin() + lo,
                                     shuffled.begin() + hi);
        std::vector<std::size_t> order;
        order.reserve(n - val.size());
        order.insert(order.end(), shuffled.begin(), shuffled.begin() + lo);
        order.insert(order.end(), shuffled.begin() + hi, shuffled.end());

        AutoencoderParams params = init_params(seed, dims);
        AdamState adam(params.data.size());
        std::mt19937_64 rng = seeded_engine(seed, 1 + f);
        report.folds[f].reserve(static_cast<std::size_t>(opts.epochs));
        for (int epoch = 0; epoch < opts.epochs; ++epoch) {
            shuffle(order, rng);
            FoldEpoch fe;
            fe.train_loss =
                train_epoch(params, adam, features, order, opts, grad);
            fe.val_loss = mean_loss(params, features, val);
            report.folds[f].push_back(fe);
        }
    }

    AutoencoderParams params = init_params(seed, dims);
    AdamState adam(params.data.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng = seeded_engine(seed, 100);
    report.final_train.reserve(static_cast<std::size_t>(opts.epochs));
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        shuffle(order, rng);
        report.final_train.push_back(
            train_epoch(params, adam, features, order, opts, grad));
    }
    return {std::move(params), std::move(report)};
}

} // namespace detail

/// K-fold cross-validation for the loss report, then a final model
/// trained on everything. If the final model collapses (over 90% of
/// inputs land on an exactly zero latent), training restarts once with
/// the next seed.
inline std::pair<AutoencoderParams, TrainReport>
train(std::span<const FeatureVector> features, const TrainOptions &opts = {}) {
    if (features.size() < static_cast<std::size_t>(opts.folds)) {
        throw std::invalid_argument("train: too few samples");
    }
    for (const FeatureVector &fv : features) {
        if (fv.values.size() != features[0].values.size()) {
            throw std::invalid_argument("train: inconsistent feature width");
        }
    }
    if (opts.epochs <= 0 || opts.batch_size <= 0 || opts.folds <= 0) {
        throw std::invalid_argument("train: bad options");
    }

    auto [params, report] = detail::train_once(features, opts, opts.seed);
    std::size_t dead = 0;
    for (const FeatureVector &fv : features) {
        const Activations act = forward(params, fv.values);
        const bool zero = std::all_of(act.z.begin(), act.z.end(),
                                      [](double v) { return v == 0.0; });
        dead += zero ? 1 : 0;
    }
    if (static_cast<double>(dead) >
        0.9 * static_cast<double>(features.size())) {
        auto retry = detail::train_once(features, opts, opts.seed + 1);
        params = std::move(retry.first);
        report = std::move(retry.second);
        report.restarted = true;
    }
    return {std::move(params), std::move(report)};
}

struct LatentPoint {
    std::string event_id;
    std::array<double, 3> z{};

    bool operator==(const LatentPoint &) const = default;
};

inline std::vector<LatentPoint>
encode_all(const AutoencoderParams &params,
           std::span<const FeatureVector> features) {
    if (params.dims.latent != 3) {
        throw std::invalid_argument("encode_all: latent dimension must be 3");
    }
    std::vector<LatentPoint> points;
    points.reserve(features.size());
    for (const FeatureVector &fv : features) {
        const Activations act = forward(params, fv.values);
        points.push_back(
            {fv.event_id, {act.z[0], act.z[1], act.z[2]}});
    }
    return points;
}

inline nlohmann::json params_to_json(const AutoencoderParams &params,
                                     std::uint64_t seed) {
    const auto dump = [](std::span<const double> s) {
        return nlohmann::json(std::vector<double>(s.begin(), s.end()));
    };
    return nlohmann::json{
        {"format", "arpclust-autoencoder"},
        {"version", 1},
        {"seed", seed},
        {"dims",
         {{"input", params.dims.input},
          {"hidden", params.dims.hidden},
          {"latent", params.dims.latent}}},
        {"w1", dump(params.w1())},
        {"b1", dump(params.b1())},
        {"w2", dump(params.w2())},
        {"b2", dump(params.b2())},
        {"w3", dump(params.w3())},
        {"b3", dump(params.b3())}};
}

inline AutoencoderParams params_from_json(const nlohmann::json &j) {
    if (j.value("format", "") != "arpclust-autoencoder") {
        throw std::runtime_error("model json: unrecognized format");
    }
    AutoencoderDims dims;
    dims.input = j.at("dims").at("input").get<std::size_t>();
    dims.hidden = j.at("dims").at("hidden").get<std::size_t>();
    dims.latent = j.at("dims").at("latent").get<std::size_t>();
    AutoencoderParams params(dims);
    const auto load = [&j](std::span<double> dst, const char *key) {
        const auto src = j.at(key).get<std::vector<double>>();
        if (src.size() != dst.size()) {
            throw std::runtime_error(std::string("model json: bad size for ") +
                                     key);
        }
        std::copy(src.begin(), src.end(), dst.begin());
    };
    load(params.w1(), "w1");
    load(params.b1(), "b1");
    load(params.w2(), "w2");
    load(params.b2(), "b2");
    load(params.w3(), "w3");
    load(params.b3(), "b3");
    return params;
}

inline std::string write_train_report_csv(const TrainReport &report) {
    std::ostringstream out;
    out << "fold,epoch,train_loss,val_loss\n";
    for (std::size_t f = 0; f < report.folds.size(); ++f) {
        for (std::size_t e = 0; e < report.folds[f].size(); ++e) {
            out << f << "," << e + 1 << ","
                << detail::format_double(report.folds[f][e].train_loss) << ","
                << detail::format_double(report.folds[f][e].val_loss) << "\n";
        }
    }
    for (std::size_t e = 0; e < report.final_train.size(); ++e) {
        out << "final," << e + 1 << ","
            << detail::format_double(report.final_train[e]) << ",\n";
    }
    return out.str();
}

inline std::string write_latents_csv(std::span<const LatentPoint> points) {
    std::ostringstream out;
    out << "event_id,z0,z1,z2\n";
    for (const LatentPoint &p : points) {
        out << p.event_id << "," << detail::format_double(p.z[0]) << ","
            << detail::format_double(p.z[1]) << ","
            << detail::format_double(p.z[2]) << "\n";
    }
    return out.str();
}

inline std::vector<LatentPoint> parse_latents_csv(const std::string &text) {
    std::vector<LatentPoint> points;
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
        LatentPoint p;
        std::size_t pos = line.find(',');
        if (pos == std::string::npos) {
            throw std::runtime_error("latents csv: row without values");
        }
        p.event_id = line.substr(0, pos);
        for (int k = 0; k < 3; ++k) {
            const std::size_t start = pos + 1;
            pos = line.find(',', start);
            if ((k < 2) != (pos != std::string::npos)) {
                throw std::runtime_error("latents csv: wrong column count");
            }
            const std::size_t end =
                pos == std::string::npos ? line.size() : pos;
            const char *first = line.data() + start;
            const char *last = line.data() + end;
            const auto [ptr, ec] = std::from_chars(first, last, p.z[k]);
            if (ec != std::errc() || ptr != last) {
                throw std::runtime_error("latents csv: bad number");
            }
        }
        points.push_back(std::move(p));
    }
    return points;
}

} // namespace arpclust
